#pragma once

// Survival datasets: synthetic generation from a weighted DAG, censoring,
// time discretization, train/validation/test splitting and CSV I/O.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dagsurv/errors.hpp"
#include "dagsurv/graph.hpp"
#include "dagsurv/io.hpp"

namespace dagsurv {

// Equal-width grid over [0, max_time] with indices 0..horizon.
struct TimeGrid {
  int horizon = 0;
  double max_time = 0.0;

  int bin(double t) const {
    if (t <= 0.0) return 0;
    double k = std::floor(t / max_time * static_cast<double>(horizon));
    return static_cast<int>(std::min(k, static_cast<double>(horizon)));
  }
};

struct SurvivalDataset {
  Matrix covariates;                // N x L
  std::vector<double> raw_times;    // continuous times, N
  std::vector<int> time_bins;       // in [0, grid.horizon], empty until discretized
  std::vector<int> events;          // 1 = event observed, 0 = censored
  TimeGrid grid;
  std::vector<std::string> names;   // covariate column names, L

  std::size_t size() const { return raw_times.size(); }
  std::size_t num_covariates() const { return static_cast<std::size_t>(covariates.cols()); }
  int horizon() const { return grid.horizon; }
  bool discretized() const { return time_bins.size() == raw_times.size() && grid.horizon > 0; }

  double censored_fraction() const {
    if (events.empty()) return 0.0;
    auto c = std::count(events.begin(), events.end(), 0);
    return static_cast<double>(c) / static_cast<double>(events.size());
  }

  SurvivalDataset subset(const std::vector<std::size_t>& idx) const {
    SurvivalDataset out;
    out.covariates.resize(static_cast<Eigen::Index>(idx.size()), covariates.cols());
    out.grid = grid;
    out.names = names;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      out.covariates.row(static_cast<Eigen::Index>(k)) =
          covariates.row(static_cast<Eigen::Index>(idx[k]));
      out.raw_times.push_back(raw_times[idx[k]]);
      out.events.push_back(events[idx[k]]);
      if (!time_bins.empty()) out.time_bins.push_back(time_bins[idx[k]]);
    }
    return out;
  }

  void check() const {
    const auto n = size();
    if (n == 0) throw EmptyDatasetError("dataset has no rows");
    if (covariates.cols() < 1) throw DimensionError("dataset has no covariates");
    if (static_cast<std::size_t>(covariates.rows()) != n || events.size() != n)
      throw DimensionError("dataset columns have inconsistent lengths");
    for (std::size_t i = 0; i < n; ++i) {
      if (!(raw_times[i] >= 0.0) || !std::isfinite(raw_times[i]))
        throw Error("raw time at row " + std::to_string(i) + " is negative or not finite");
      if (events[i] != 0 && events[i] != 1)
        throw Error("event at row " + std::to_string(i) + " is not 0/1");
    }
    if (!time_bins.empty()) {
      if (time_bins.size() != n) throw DimensionError("time_bins has wrong length");
      for (int b : time_bins)
        if (b < 0 || b > grid.horizon) throw Error("time bin outside [0, horizon]");
    }
  }
};

inline std::vector<std::string> default_covariate_names(std::size_t l) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < l; ++i) names.push_back("x" + std::to_string(i + 1));
  return names;
}

enum class NoiseScale { Variance, StdDev };

struct GenConfig {
  std::size_t n_samples = 10000;
  double scale_c = 90.0;
  double covariate_noise_sd = 1.0;
  double target_noise_mean = 30.0;
  double target_noise_scale = 70.0;
  // How target_noise_scale is read: "N(30, 70)" as variance 70 by default.
  NoiseScale target_noise_kind = NoiseScale::Variance;
  std::uint64_t seed = 0;

  double target_noise_sd() const {
    return target_noise_kind == NoiseScale::Variance ? std::sqrt(target_noise_scale)
                                                     : target_noise_scale;
  }

  void check() const {
    if (n_samples == 0) throw ConfigError("n_samples must be positive");
    if (!(scale_c > 0.0)) throw ConfigError("scale_c must be positive");
    if (!(covariate_noise_sd >= 0.0)) throw ConfigError("covariate_noise_sd must be >= 0");
    if (!(target_noise_scale >= 0.0)) throw ConfigError("target_noise_scale must be >= 0");
  }
};

// Ancestral sampling in topological order. Node index L (the last one) is the
// time-to-event node, the others are covariates:
//   x_i = sum_{j -> i} A_ji cos(v_j + 1) + z_i,       z_i ~ N(0, sd^2)
//   t   = max(0, c exp(sum_{j -> t} A_jt cos(v_j + 1)) + z_t)
// Each node has its own noise stream seeded from (seed, node), so a node's
// value depends only on its ancestors and its own draws.
//
// If the time node has children a warning is appended to `warnings` (when
// given); those covariates are functions of the label.
inline SurvivalDataset generate(const Dag& dag, const GenConfig& cfg,
                                std::vector<std::string>* warnings = nullptr) {
  cfg.check();
  const std::size_t nodes = dag.num_nodes();
  if (nodes < 2) throw DimensionError("need at least one covariate plus the time node");
  const std::size_t l = nodes - 1;
  const std::size_t target = l;
  if (!dag.is_sink(target) && warnings)
    warnings->push_back("time node " + std::to_string(target) + " has " +
                        std::to_string(dag.out_edges(target).size()) +
                        " outgoing edge(s); downstream covariates depend on the label");

  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  Matrix noise(n, static_cast<Eigen::Index>(nodes));
  for (std::size_t node = 0; node < nodes; ++node) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed),
                      static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(node)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> std_normal(0.0, 1.0);
    for (Eigen::Index r = 0; r < n; ++r)
      noise(r, static_cast<Eigen::Index>(node)) = std_normal(rng);
  }

  const double t_sd = cfg.target_noise_sd();
  Matrix values(n, static_cast<Eigen::Index>(nodes));
  for (std::size_t node : dag.topo_order()) {
    const auto c = static_cast<Eigen::Index>(node);
    for (Eigen::Index r = 0; r < n; ++r) {
      double s = 0.0;
      for (const Edge& e : dag.in_edges(node))
        s += e.weight * std::cos(values(r, static_cast<Eigen::Index>(e.from)) + 1.0);
      if (node == target)
        values(r, c) = std::max(
            0.0, cfg.scale_c * std::exp(s) + cfg.target_noise_mean + t_sd * noise(r, c));
      else
        values(r, c) = s + cfg.covariate_noise_sd * noise(r, c);
    }
  }

  SurvivalDataset ds;
  ds.covariates = values.leftCols(static_cast<Eigen::Index>(l));
  ds.raw_times.resize(cfg.n_samples);
  for (Eigen::Index r = 0; r < n; ++r)
    ds.raw_times[static_cast<std::size_t>(r)] = values(r, static_cast<Eigen::Index>(target));
  ds.events.assign(cfg.n_samples, 1);
  ds.names = default_covariate_names(l);
  return ds;
}

enum class CensorMode {
  // round(fraction * N) instances chosen uniformly; each gets a censor time
  // uniform on (0, t_n). The realized fraction is exact.
  ExactFraction,
  // Every instance draws c ~ U(0, max t); censored when c < t_n. The
  // realized fraction is random and `fraction` is ignored.
  GlobalUniform,
};

inline SurvivalDataset apply_censoring(SurvivalDataset ds, double fraction,
                                       std::uint64_t seed,
                                       CensorMode mode = CensorMode::ExactFraction) {
  if (!(fraction >= 0.0 && fraction < 1.0))
    throw ConfigError("censor fraction must be in [0, 1)");
  for (int e : ds.events)
    if (e != 1) throw Error("apply_censoring expects every event indicator to be 1");
  const std::size_t n = ds.size();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto open_unit = [&] {
    double u = 0.0;
    while (u == 0.0) u = unit(rng);
    return u;
  };

  if (mode == CensorMode::ExactFraction) {
    const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
    if (k == 0) return ds;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    for (std::size_t i : idx) {
      ds.raw_times[i] = open_unit() * ds.raw_times[i];
      ds.events[i] = 0;
    }
  } else {
    const double tmax = *std::max_element(ds.raw_times.begin(), ds.raw_times.end());
    for (std::size_t i = 0; i < n; ++i) {
      double c = open_unit() * tmax;
      if (c < ds.raw_times[i]) {
        ds.raw_times[i] = c;
        ds.events[i] = 0;
      }
    }
  }
  ds.time_bins.clear();
  return ds;
}

// Bins times on an existing grid (e.g. the training grid at evaluation time).
// Times beyond grid.max_time land in the last bin.
inline SurvivalDataset apply_grid(SurvivalDataset ds, const TimeGrid& grid) {
  if (grid.horizon < 1 || !(grid.max_time > 0.0))
    throw ConfigError("time grid needs horizon >= 1 and max_time > 0");
  ds.grid = grid;
  ds.time_bins.resize(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) ds.time_bins[i] = grid.bin(ds.raw_times[i]);
  return ds;
}

// Equal-width bins over [0, max raw time] with indices 0..num_bins.
inline SurvivalDataset discretize(SurvivalDataset ds, int num_bins) {
  if (num_bins < 2) throw ConfigError("discretize needs num_bins >= 2");
  if (ds.size() == 0) throw EmptyDatasetError("cannot discretize an empty dataset");
  auto [lo, hi] = std::minmax_element(ds.raw_times.begin(), ds.raw_times.end());
  if (*lo == *hi) throw DegenerateRangeError("all raw times are equal");
  return apply_grid(std::move(ds), TimeGrid{num_bins, *hi});
}

// ceil(max raw time), i.e. bins of (at most) unit width.
inline int default_horizon(const SurvivalDataset& ds) {
  if (ds.size() == 0) throw EmptyDatasetError("empty dataset");
  double hi = *std::max_element(ds.raw_times.begin(), ds.raw_times.end());
  return std::max(2, static_cast<int>(std::ceil(hi)));
}

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

inline SplitIndices split_indices(std::size_t n, std::uint64_t seed,
                                  double train_frac = 0.8,
                                  double val_frac_of_train = 0.2) {
  const auto nd = static_cast<double>(n);
  const auto n_train =
      static_cast<std::size_t>(std::llround(train_frac * (1.0 - val_frac_of_train) * nd));
  const auto n_val =
      static_cast<std::size_t>(std::llround(train_frac * val_frac_of_train * nd));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
    throw TooSmallError("dataset of " + std::to_string(n) +
                        " rows is too small to split three ways");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  SplitIndices s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
               idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
  return s;
}

struct DatasetSplit {
  SurvivalDataset train, val, test;
};

inline DatasetSplit split(const SurvivalDataset& ds, std::uint64_t seed,
                          double train_frac = 0.8, double val_frac_of_train = 0.2) {
  auto s = split_indices(ds.size(), seed, train_frac, val_frac_of_train);
  return {ds.subset(s.train), ds.subset(s.val), ds.subset(s.test)};
}

// ---- dataset CSV: x1,...,xL,time,event ----------------------------------

inline std::string format_dataset_csv(const SurvivalDataset& ds) {
  std::string out;
  auto names = ds.names.size() == ds.num_covariates() ? ds.names
                                                      : default_covariate_names(ds.num_covariates());
  for (const auto& nm : names) out += nm + ',';
  out += "time,event\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (Eigen::Index j = 0; j < ds.covariates.cols(); ++j) {
      out += io::format_double(ds.covariates(static_cast<Eigen::Index>(i), j));
      out += ',';
    }
    out += io::format_double(ds.raw_times[i]);
    out += ',';
    out += std::to_string(ds.events[i]);
    out += '\n';
  }
  return out;
}

inline SurvivalDataset parse_dataset_csv(const std::string& text,
                                         const std::string& file = "<dataset>") {
  auto ls = io::lines(text);
  std::size_t ln = 0;
  while (ln < ls.size() && io::trim(ls[ln]).empty()) ++ln;
  if (ln == ls.size()) throw ParseError(file, 1, "missing header row");
  auto header = io::split(io::trim(ls[ln]), ',');
  if (header.size() < 3 || header[header.size() - 2] != "time" || header.back() != "event")
    throw ParseError(file, ln + 1,
                     "header must be x1,...,xL,time,event with at least one covariate");
  const std::size_t l = header.size() - 2;
  SurvivalDataset ds;
  for (std::size_t j = 0; j < l; ++j) ds.names.emplace_back(header[j]);

  std::vector<double> cov;
  for (++ln; ln < ls.size(); ++ln) {
    auto line = io::trim(ls[ln]);
    if (line.empty()) continue;
    auto toks = io::split(line, ',');
    if (toks.size() != l + 2)
      throw ParseError(file, ln + 1,
                       "row has " + std::to_string(toks.size()) + " fields, expected " +
                           std::to_string(l + 2));
    for (std::size_t j = 0; j < l; ++j) cov.push_back(io::parse_double(toks[j], file, ln + 1));
    double t = io::parse_double(toks[l], file, ln + 1);
    if (t < 0.0) throw ParseError(file, ln + 1, "time must be nonnegative");
    auto e = io::parse_int(toks[l + 1], file, ln + 1);
    if (e != 0 && e != 1) throw ParseError(file, ln + 1, "event must be 0 or 1");
    ds.raw_times.push_back(t);
    ds.events.push_back(static_cast<int>(e));
  }
  if (ds.raw_times.empty()) throw ParseError(file, ln, "dataset has no data rows");
  const auto n = static_cast<Eigen::Index>(ds.raw_times.size());
  ds.covariates.resize(n, static_cast<Eigen::Index>(l));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(l); ++j)
      ds.covariates(i, j) = cov[static_cast<std::size_t>(i) * l + static_cast<std::size_t>(j)];
  return ds;
}

inline SurvivalDataset read_dataset_file(const std::string& path) {
  return parse_dataset_csv(io::read_file(path), path);
}

inline void write_dataset_file(const std::string& path, const SurvivalDataset& ds) {
  io::write_file(path, format_dataset_csv(ds));
}

}  // namespace dagsurv
