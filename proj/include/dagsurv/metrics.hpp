#pragma once

// Time-dependent concordance and bootstrap notched-box-plot summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dagsurv/errors.hpp"
#include "dagsurv/graph.hpp"
#include "dagsurv/io.hpp"

namespace dagsurv {

// Pair counts behind a concordance value. Kept as integers so that two
// implementations agreeing on every pair agree bit for bit on the ratio.
struct ConcordanceCounts {
  std::int64_t concordant = 0;
  std::int64_t tied = 0;
  std::int64_t comparable = 0;

  double value() const {
    if (comparable == 0) throw NoComparablePairsError("no comparable pairs");
    return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
           static_cast<double>(comparable);
  }
};

// Counts over the instances listed in `idx` (repeats allowed, as produced by
// a bootstrap resample). `cdf_at(i, j)` must return F(t_i | x_j).
//
// (a, b) is comparable when t_a < t_b and a's event was observed. It is
// concordant when F(t_a | x_a) > F(t_a | x_b); equal values count one half.
template <typename CdfAt>
ConcordanceCounts concordance_counts(CdfAt&& cdf_at, std::span<const int> times,
                                     std::span<const int> events,
                                     std::span<const std::size_t> idx) {
  ConcordanceCounts c;
  std::vector<std::size_t> by_time(idx.begin(), idx.end());
  std::sort(by_time.begin(), by_time.end(),
            [&](std::size_t x, std::size_t y) { return times[x] < times[y]; });
  for (std::size_t a : idx) {
    if (events[a] != 1) continue;
    const int ta = times[a];
    const double own = cdf_at(a, a);
    auto first = std::upper_bound(by_time.begin(), by_time.end(), ta,
                                  [&](int t, std::size_t y) { return t < times[y]; });
    for (auto it = first; it != by_time.end(); ++it) {
      const std::size_t b = *it;
      ++c.comparable;
      const double other = cdf_at(a, b);
      if (own > other)
        ++c.concordant;
      else if (own == other)
        ++c.tied;
    }
  }
  return c;
}

namespace detail {

inline void check_ctd_inputs(const Matrix& cdf, std::span<const int> times,
                             std::span<const int> events) {
  const auto n = static_cast<std::size_t>(cdf.rows());
  if (times.size() != n || events.size() != n)
    throw DimensionError("ctd: cdf rows, times and events must have equal length");
  for (int t : times)
    if (t < 0 || t >= cdf.cols()) throw DimensionError("ctd: time bin outside the cdf grid");
}

inline std::vector<std::size_t> iota_index(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace detail

// `cdf` is N x (M+1): row j holds F(k | x_j) for k = 0..M.
inline ConcordanceCounts ctd_counts(const Matrix& cdf, std::span<const int> times,
                                    std::span<const int> events,
                                    std::span<const std::size_t> idx) {
  detail::check_ctd_inputs(cdf, times, events);
  auto at = [&](std::size_t i, std::size_t j) {
    return cdf(static_cast<Eigen::Index>(j), times[i]);
  };
  return concordance_counts(at, times, events, idx);
}

inline double ctd(const Matrix& cdf, std::span<const int> times, std::span<const int> events) {
  auto idx = detail::iota_index(times.size());
  return ctd_counts(cdf, times, events, idx).value();
}

// ---- bootstrap -----------------------------------------------------------

struct CtdReport {
  double point_estimate = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double notch_low = 0.0;
  double notch_high = 0.0;
  std::size_t b = 0;
  std::vector<double> values;  // one C_td per resample, in resample order

  double notch_half_width() const { return 0.5 * (notch_high - notch_low); }
};

// Quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw Error("quantile of empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

// Fills median, quartiles and notches (median -/+ 1.57 IQR / sqrt(b)) from
// report.values.
inline void summarize(CtdReport& r) {
  r.b = r.values.size();
  r.median = quantile(r.values, 0.5);
  r.q1 = quantile(r.values, 0.25);
  r.q3 = quantile(r.values, 0.75);
  r.iqr = r.q3 - r.q1;
  const double half = 1.57 * r.iqr / std::sqrt(static_cast<double>(r.b));
  r.notch_low = r.median - half;
  r.notch_high = r.median + half;
}

struct BootstrapOptions {
  std::size_t b = 1000;
  std::uint64_t seed = 0;
  // Redraws allowed for a resample with no comparable pair before giving up.
  int max_redraws = 100;
};

// Resamples the test set with replacement `b` times. Resample k draws its
// indices from a generator seeded by (seed, k, attempt), so results do not
// depend on evaluation order.
inline CtdReport bootstrap_ctd(const Matrix& cdf, std::span<const int> times,
                               std::span<const int> events, const BootstrapOptions& opt) {
  detail::check_ctd_inputs(cdf, times, events);
  if (opt.b == 0) throw ConfigError("bootstrap needs b >= 1");
  const std::size_t n = times.size();
  CtdReport r;
  r.point_estimate = ctd(cdf, times, events);
  r.values.reserve(opt.b);
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < opt.b; ++k) {
    bool done = false;
    for (int attempt = 0; attempt <= opt.max_redraws && !done; ++attempt) {
      std::seed_seq seq{static_cast<std::uint32_t>(opt.seed),
                        static_cast<std::uint32_t>(opt.seed >> 32),
                        static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(attempt)};
      std::mt19937_64 rng(seq);
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& i : idx) i = pick(rng);
      auto counts = ctd_counts(cdf, times, events, idx);
      if (counts.comparable > 0) {
        r.values.push_back(counts.value());
        done = true;
      }
    }
    if (!done)
      throw NoComparablePairsError("bootstrap resample " + std::to_string(k) +
                                   " had no comparable pairs after redraws");
  }
  summarize(r);
  return r;
}

// Box-plot CSV: a (resample_id, ctd) row per resample followed by summary
// rows keyed by name in the first column.
inline std::string format_ctd_report_csv(const CtdReport& r) {
  std::string out = "resample_id,ctd\n";
  for (std::size_t k = 0; k < r.values.size(); ++k)
    out += std::to_string(k) + ',' + io::format_double(r.values[k]) + '\n';
  auto row = [&](const char* key, double v) {
    out += key;
    out += ',';
    out += io::format_double(v);
    out += '\n';
  };
  row("point_estimate", r.point_estimate);
  row("median", r.median);
  row("q1", r.q1);
  row("q3", r.q3);
  row("iqr", r.iqr);
  row("notch_low", r.notch_low);
  row("notch_high", r.notch_high);
  out += "b," + std::to_string(r.b) + '\n';
  return out;
}

inline CtdReport parse_ctd_report_csv(const std::string& text,
                                      const std::string& file = "<report>") {
  CtdReport r;
  auto ls = io::lines(text);
  bool header = false;
  bool have_b = false;
  for (std::size_t ln = 0; ln < ls.size(); ++ln) {
    auto line = io::trim(ls[ln]);
    if (line.empty()) continue;
    auto toks = io::split(line, ',');
    if (toks.size() != 2) throw ParseError(file, ln + 1, "expected two fields");
    if (!header) {
      if (toks[0] != "resample_id" || toks[1] != "ctd")
        throw ParseError(file, ln + 1, "expected header resample_id,ctd");
      header = true;
      continue;
    }
    const auto key = toks[0];
    if (!key.empty() && std::isdigit(static_cast<unsigned char>(key[0]))) {
      auto id = io::parse_int(key, file, ln + 1);
      if (id != static_cast<long long>(r.values.size()))
        throw ParseError(file, ln + 1, "resample ids must be consecutive from 0");
      r.values.push_back(io::parse_double(toks[1], file, ln + 1));
    } else if (key == "point_estimate") {
      r.point_estimate = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "median") {
      r.median = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "q1") {
      r.q1 = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "q3") {
      r.q3 = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "iqr") {
      r.iqr = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "notch_low") {
      r.notch_low = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "notch_high") {
      r.notch_high = io::parse_double(toks[1], file, ln + 1);
    } else if (key == "b") {
      r.b = static_cast<std::size_t>(io::parse_int(toks[1], file, ln + 1));
      have_b = true;
    } else {
      throw ParseError(file, ln + 1, "unknown summary key '" + std::string(key) + "'");
    }
  }
  if (!header) throw ParseError(file, 1, "empty report");
  if (!have_b || r.b != r.values.size())
    throw ParseError(file, ls.size(), "summary b does not match the resample count");
  return r;
}

}  // namespace dagsurv
