#pragma once

// Exact entropy bookkeeping for small discrete Bayesian networks.
//
// A net factorizes as p(x) = prod_i p(x_i | x_pa(i)). With the DAG known
// (knows_dag = true) the joint is that product; without it the symbols are
// treated as independent and the joint is the product of the marginals.
// entropy_gap() measures how many bits the factorization saves:
//   gap = sum_i H(X_i) - H(X) >= 0,
// strictly positive as soon as some node's CPT varies with its parents (and
// every parent configuration has positive probability).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dagsurv/errors.hpp"
#include "dagsurv/graph.hpp"
#include "dagsurv/io.hpp"

namespace dagsurv {

inline constexpr int kMaxCardinality = 8;
inline constexpr std::size_t kMaxJointStates = 1000000;

struct DiscreteBayesNet {
  Dag dag = Dag::empty(1);
  std::vector<int> cards;
  // cpts[i] is (prod of parent cards) x cards[i]. Parents are ordered by
  // index; the last parent varies fastest across rows.
  std::vector<Matrix> cpts;
  bool knows_dag = true;  // K_A

  std::size_t num_nodes() const { return cards.size(); }

  std::vector<std::size_t> parents(std::size_t i) const {
    std::vector<std::size_t> out;
    for (const auto& e : dag.in_edges(i)) out.push_back(e.from);
    return out;
  }

  std::size_t parent_configs(std::size_t i) const {
    std::size_t n = 1;
    for (auto p : parents(i)) n *= static_cast<std::size_t>(cards[p]);
    return n;
  }

  std::size_t joint_size() const {
    std::size_t n = 1;
    for (int c : cards) n *= static_cast<std::size_t>(c);
    return n;
  }

  void check() const {
    const std::size_t n = num_nodes();
    if (dag.num_nodes() != n || cpts.size() != n)
      throw DimensionError("net: dag, cardinalities and CPTs disagree on node count");
    double states = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (cards[i] < 1 || cards[i] > kMaxCardinality)
        throw ConfigError("net: node " + std::to_string(i) + " cardinality must be in [1, 8]");
      states *= cards[i];
      const auto& t = cpts[i];
      if (static_cast<std::size_t>(t.rows()) != parent_configs(i) || t.cols() != cards[i])
        throw DimensionError("net: CPT of node " + std::to_string(i) + " has shape " +
                             std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                             ", expected " + std::to_string(parent_configs(i)) + "x" +
                             std::to_string(cards[i]));
      for (Eigen::Index r = 0; r < t.rows(); ++r) {
        if ((t.row(r).array() < 0.0).any())
          throw ConfigError("net: CPT of node " + std::to_string(i) + " has a negative entry");
        if (std::abs(t.row(r).sum() - 1.0) > 1e-12)
          throw ConfigError("net: CPT row " + std::to_string(r) + " of node " +
                            std::to_string(i) + " does not sum to 1");
      }
    }
    if (states > static_cast<double>(kMaxJointStates))
      throw ConfigError("net: joint support exceeds 10^6 states");
  }
};

// Joint table over all states, index = mixed radix with node 0 most
// significant and node n-1 varying fastest.
struct JointTable {
  std::vector<int> cards;
  std::vector<double> probs;

  std::vector<int> decode(std::size_t index) const {
    std::vector<int> s(cards.size());
    for (std::size_t k = cards.size(); k-- > 0;) {
      s[k] = static_cast<int>(index % static_cast<std::size_t>(cards[k]));
      index /= static_cast<std::size_t>(cards[k]);
    }
    return s;
  }

  // Marginal distribution of one node.
  std::vector<double> marginal(std::size_t node) const {
    std::vector<double> m(static_cast<std::size_t>(cards[node]), 0.0);
    std::size_t stride = 1;
    for (std::size_t k = node + 1; k < cards.size(); ++k) stride *= static_cast<std::size_t>(cards[k]);
    for (std::size_t i = 0; i < probs.size(); ++i)
      m[(i / stride) % static_cast<std::size_t>(cards[node])] += probs[i];
    return m;
  }
};

namespace detail {

inline std::size_t parent_row(const DiscreteBayesNet& net, std::size_t node,
                              const std::vector<int>& state) {
  std::size_t row = 0;
  for (auto p : net.parents(node)) row = row * static_cast<std::size_t>(net.cards[p]) +
                                         static_cast<std::size_t>(state[p]);
  return row;
}

inline JointTable factored_joint(const DiscreteBayesNet& net) {
  JointTable j{net.cards, std::vector<double>(net.joint_size(), 0.0)};
  for (std::size_t idx = 0; idx < j.probs.size(); ++idx) {
    auto s = j.decode(idx);
    double p = 1.0;
    for (std::size_t node : net.dag.topo_order()) {
      p *= net.cpts[node](static_cast<Eigen::Index>(parent_row(net, node, s)), s[node]);
      if (p == 0.0) break;
    }
    j.probs[idx] = p;
  }
  return j;
}

}  // namespace detail

// p(x) under the net; with knows_dag == false, the product of its marginals.
inline JointTable joint(const DiscreteBayesNet& net) {
  net.check();
  JointTable j = detail::factored_joint(net);
  if (net.knows_dag) return j;
  std::vector<std::vector<double>> margins;
  for (std::size_t i = 0; i < net.num_nodes(); ++i) margins.push_back(j.marginal(i));
  for (std::size_t idx = 0; idx < j.probs.size(); ++idx) {
    auto s = j.decode(idx);
    double p = 1.0;
    for (std::size_t i = 0; i < s.size(); ++i) p *= margins[i][static_cast<std::size_t>(s[i])];
    j.probs[idx] = p;
  }
  return j;
}

// Shannon entropy in bits, with 0 log 0 = 0.
inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log2(x);
  return std::max(0.0, h);
}

inline double entropy(const JointTable& t) { return entropy(t.probs); }

struct EntropyGap {
  double joint_entropy = 0.0;    // H(X)
  double marginal_sum = 0.0;     // sum_i H(X_i)
  double gap = 0.0;              // marginal_sum - joint_entropy
};

inline EntropyGap entropy_gap(const DiscreteBayesNet& net) {
  JointTable j = joint(net);
  EntropyGap g;
  g.joint_entropy = entropy(j);
  for (std::size_t i = 0; i < net.num_nodes(); ++i) g.marginal_sum += entropy(j.marginal(i));
  g.gap = g.marginal_sum - g.joint_entropy;
  return g;
}

// True when some node's CPT is not the same row for every parent
// configuration, i.e. some edge actually carries dependence.
inline bool has_dependence(const DiscreteBayesNet& net, double tol = 1e-12) {
  for (const auto& t : net.cpts)
    for (Eigen::Index r = 1; r < t.rows(); ++r)
      if ((t.row(r) - t.row(0)).cwiseAbs().maxCoeff() > tol) return true;
  return false;
}

struct RandomNetConfig {
  std::size_t num_nodes = 4;
  double expected_degree = 1.5;
  int min_card = 2;
  int max_card = 3;
  // Replace every CPT by a single row repeated over parent configurations:
  // the edges stay but carry no dependence.
  bool vacuous = false;
  std::uint64_t seed = 0;
};

// Random DAG with Dirichlet(1) CPT rows (strictly positive almost surely).
inline DiscreteBayesNet random_net(const RandomNetConfig& cfg) {
  DagSampleConfig dc;
  dc.num_nodes = cfg.num_nodes;
  dc.expected_degree = cfg.num_nodes > 1
                           ? std::min(cfg.expected_degree, static_cast<double>(cfg.num_nodes) - 0.5)
                           : 1.0;
  dc.weight_low = dc.weight_high = 1.0;
  dc.seed = cfg.seed;
  DiscreteBayesNet net;
  net.dag = validate_dag(sample_erdos_renyi_dag(dc).adjacency());

  std::mt19937_64 rng(cfg.seed ^ 0xa5a5a5a5a5a5a5a5ULL);
  std::uniform_int_distribution<int> card(cfg.min_card, cfg.max_card);
  for (std::size_t i = 0; i < cfg.num_nodes; ++i) net.cards.push_back(card(rng));
  std::gamma_distribution<double> gamma(1.0, 1.0);
  auto dirichlet_row = [&](int k) {
    Eigen::RowVectorXd r(k);
    for (int c = 0; c < k; ++c) r(c) = gamma(rng) + 1e-3;
    return Eigen::RowVectorXd(r / r.sum());
  };
  for (std::size_t i = 0; i < cfg.num_nodes; ++i) {
    const auto rows = static_cast<Eigen::Index>(net.parent_configs(i));
    Matrix t(rows, net.cards[i]);
    if (cfg.vacuous) {
      auto r = dirichlet_row(net.cards[i]);
      for (Eigen::Index k = 0; k < rows; ++k) t.row(k) = r;
    } else {
      for (Eigen::Index k = 0; k < rows; ++k) t.row(k) = dirichlet_row(net.cards[i]);
    }
    // Renormalize so each row sums to 1 within machine precision.
    for (Eigen::Index k = 0; k < rows; ++k) t.row(k) /= t.row(k).sum();
    net.cpts.push_back(std::move(t));
  }
  net.check();
  return net;
}

// ---- net specification file ------------------------------------------------
//
//   # comment
//   node <id> card <k> [parents <p> <p> ...]
//   row <id> <p_0> <p_1> ... <p_{k-1}>
//
// Node ids are 0..n-1 and every node is declared before its rows. A node
// with parents P_1 < ... < P_m needs card(P_1) * ... * card(P_m) rows, the
// last parent varying fastest. Optional line `knows_dag 0` treats the
// symbols as independent.

inline DiscreteBayesNet parse_net(const std::string& text, const std::string& file = "<net>") {
  struct Decl {
    int card = 0;
    std::vector<std::size_t> parents;
    std::vector<std::vector<double>> rows;
    std::size_t line = 0;
  };
  std::vector<Decl> decls;
  bool knows = true;
  auto ls = io::lines(text);
  for (std::size_t ln = 0; ln < ls.size(); ++ln) {
    auto line = io::trim(ls[ln]);
    if (line.empty() || line.front() == '#') continue;
    auto toks = io::split_ws(line);
    const std::size_t lno = ln + 1;
    if (toks[0] == "node") {
      if (toks.size() < 4 || toks[2] != "card")
        throw ParseError(file, lno, "expected 'node <id> card <k> [parents ...]'");
      auto id = io::parse_int(toks[1], file, lno);
      if (id != static_cast<long long>(decls.size()))
        throw ParseError(file, lno, "node ids must be declared in order 0, 1, 2, ...");
      Decl d;
      d.line = lno;
      d.card = static_cast<int>(io::parse_int(toks[3], file, lno));
      if (d.card < 1 || d.card > kMaxCardinality)
        throw ParseError(file, lno, "cardinality must be in [1, 8]");
      if (toks.size() > 4) {
        if (toks[4] != "parents") throw ParseError(file, lno, "expected 'parents'");
        for (std::size_t k = 5; k < toks.size(); ++k) {
          auto p = io::parse_int(toks[k], file, lno);
          if (p < 0) throw ParseError(file, lno, "negative parent id");
          d.parents.push_back(static_cast<std::size_t>(p));
        }
        std::sort(d.parents.begin(), d.parents.end());
        if (std::adjacent_find(d.parents.begin(), d.parents.end()) != d.parents.end())
          throw ParseError(file, lno, "duplicate parent");
      }
      decls.push_back(std::move(d));
    } else if (toks[0] == "row") {
      if (toks.size() < 3) throw ParseError(file, lno, "expected 'row <id> <probabilities>'");
      auto id = io::parse_int(toks[1], file, lno);
      if (id < 0 || id >= static_cast<long long>(decls.size()))
        throw ParseError(file, lno, "row for undeclared node");
      auto& d = decls[static_cast<std::size_t>(id)];
      if (toks.size() - 2 != static_cast<std::size_t>(d.card))
        throw ParseError(file, lno, "row needs " + std::to_string(d.card) + " probabilities");
      std::vector<double> row;
      double s = 0.0;
      for (std::size_t k = 2; k < toks.size(); ++k) {
        double v = io::parse_double(toks[k], file, lno);
        if (v < 0.0) throw ParseError(file, lno, "negative probability");
        row.push_back(v);
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw ParseError(file, lno, "row does not sum to 1");
      d.rows.push_back(std::move(row));
    } else if (toks[0] == "knows_dag") {
      if (toks.size() != 2) throw ParseError(file, lno, "expected 'knows_dag 0|1'");
      knows = io::parse_int(toks[1], file, lno) != 0;
    } else {
      throw ParseError(file, lno, "unknown directive '" + std::string(toks[0]) + "'");
    }
  }
  if (decls.empty()) throw ParseError(file, ls.size(), "net declares no nodes");

  const auto n = static_cast<Eigen::Index>(decls.size());
  Matrix adj = Matrix::Zero(n, n);
  for (std::size_t i = 0; i < decls.size(); ++i)
    for (auto p : decls[i].parents) {
      if (p >= decls.size())
        throw ParseError(file, decls[i].line, "parent " + std::to_string(p) + " is not a node");
      adj(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) = 1.0;
    }
  DiscreteBayesNet net;
  try {
    net.dag = validate_dag(adj);
  } catch (const CycleError& e) {
    throw ParseError(file, decls[e.node()].line, e.what());
  }
  net.knows_dag = knows;
  for (auto& d : decls) net.cards.push_back(d.card);
  for (std::size_t i = 0; i < decls.size(); ++i) {
    const auto& d = decls[i];
    const std::size_t want = net.parent_configs(i);
    if (d.rows.size() != want)
      throw ParseError(file, d.line,
                       "node " + std::to_string(i) + " has " + std::to_string(d.rows.size()) +
                           " rows, expected " + std::to_string(want));
    Matrix t(static_cast<Eigen::Index>(want), d.card);
    for (std::size_t r = 0; r < want; ++r)
      for (int c = 0; c < d.card; ++c)
        t(static_cast<Eigen::Index>(r), c) = d.rows[r][static_cast<std::size_t>(c)];
    net.cpts.push_back(std::move(t));
  }
  try {
    net.check();
  } catch (const Error& e) {
    throw ParseError(file, 1, e.what());
  }
  return net;
}

inline DiscreteBayesNet read_net_file(const std::string& path) {
  return parse_net(io::read_file(path), path);
}

}  // namespace dagsurv
