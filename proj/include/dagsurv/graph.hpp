#pragma once

// Weighted DAG over covariates plus the time-to-event node, and the linear
// structural-equation transforms (I - A^T) and (I - A^T)^{-1}.
//
// Layout conventions:
//   * adjacency(i, j) is the weight of edge i -> j; zero means no edge.
//   * "node-major" matrices have one row per node (the (L+1) x K layout).
//   * "sample-major" matrices have one column per node (B x (L+1)), which is
//     what the model works with.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dagsurv/errors.hpp"
#include "dagsurv/io.hpp"

namespace dagsurv {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct Edge {
  std::size_t from;
  std::size_t to;
  double weight;
};

class Dag {
 public:
  // Builds a DAG, checking acyclicity. The topological order is Kahn's
  // algorithm with the smallest ready index taken first.
  static Dag validate(const Matrix& adjacency);

  // Builds a DAG with a caller-supplied order; throws if the order is not a
  // permutation or some edge points backwards in it.
  static Dag with_order(const Matrix& adjacency, std::vector<std::size_t> order);

  static Dag empty(std::size_t num_nodes) {
    return validate(Matrix::Zero(static_cast<Eigen::Index>(num_nodes),
                                 static_cast<Eigen::Index>(num_nodes)));
  }

  std::size_t num_nodes() const { return order_.size(); }
  const Matrix& adjacency() const { return adjacency_; }
  const std::vector<std::size_t>& topo_order() const { return order_; }
  std::size_t position(std::size_t node) const { return position_[node]; }

  // Incoming edges of `node`, sorted by source index.
  const std::vector<Edge>& in_edges(std::size_t node) const { return in_[node]; }
  const std::vector<Edge>& out_edges(std::size_t node) const { return out_[node]; }
  std::size_t num_edges() const {
    std::size_t n = 0;
    for (const auto& e : in_) n += e.size();
    return n;
  }
  bool is_sink(std::size_t node) const { return out_[node].empty(); }

  // Same nodes and order, every weight zeroed. Used by the A = 0 ablation.
  Dag zeroed() const {
    return with_order(Matrix::Zero(adjacency_.rows(), adjacency_.cols()), order_);
  }

 private:
  Dag(Matrix adjacency, std::vector<std::size_t> order)
      : adjacency_(std::move(adjacency)), order_(std::move(order)) {
    const std::size_t n = order_.size();
    position_.assign(n, 0);
    for (std::size_t k = 0; k < n; ++k) position_[order_[k]] = k;
    in_.assign(n, {});
    out_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        double w = adjacency_(static_cast<Eigen::Index>(i),
                              static_cast<Eigen::Index>(j));
        if (w != 0.0) {
          in_[j].push_back({i, j, w});
          out_[i].push_back({i, j, w});
        }
      }
  }

  Matrix adjacency_;
  std::vector<std::size_t> order_;
  std::vector<std::size_t> position_;
  std::vector<std::vector<Edge>> in_;
  std::vector<std::vector<Edge>> out_;
};

namespace detail {

inline void check_adjacency_entries(const Matrix& a) {
  if (a.rows() != a.cols())
    throw NonSquareError("adjacency matrix is " + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + ", expected square");
  if (a.rows() == 0) throw DimensionError("adjacency matrix is empty");
  if (!a.allFinite()) throw DimensionError("adjacency matrix has non-finite entries");
}

}  // namespace detail

inline Dag Dag::validate(const Matrix& adjacency) {
  detail::check_adjacency_entries(adjacency);
  const auto n = static_cast<std::size_t>(adjacency.rows());
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0)
        ++indegree[j];

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < n; ++i)
    if (indegree[i] == 0) ready.push(i);

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    std::size_t u = ready.top();
    ready.pop();
    order.push_back(u);
    for (std::size_t v = 0; v < n; ++v)
      if (adjacency(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) != 0.0 &&
          --indegree[v] == 0)
        ready.push(v);
  }

  if (order.size() != n) {
    // Every leftover node has a leftover parent; walking parents must revisit
    // a node, and that node is on a cycle.
    std::vector<char> left(n, 0);
    for (std::size_t i = 0; i < n; ++i) left[i] = indegree[i] > 0;
    std::size_t cur = 0;
    while (!left[cur]) ++cur;
    std::vector<char> seen(n, 0);
    while (!seen[cur]) {
      seen[cur] = 1;
      for (std::size_t p = 0; p < n; ++p)
        if (left[p] && adjacency(static_cast<Eigen::Index>(p),
                                 static_cast<Eigen::Index>(cur)) != 0.0) {
          cur = p;
          break;
        }
    }
    throw CycleError("adjacency matrix has a directed cycle through node " +
                         std::to_string(cur),
                     cur);
  }
  return Dag(adjacency, std::move(order));
}

inline Dag Dag::with_order(const Matrix& adjacency, std::vector<std::size_t> order) {
  detail::check_adjacency_entries(adjacency);
  const auto n = static_cast<std::size_t>(adjacency.rows());
  if (order.size() != n) throw DimensionError("topological order has wrong length");
  std::vector<std::size_t> pos(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    if (order[k] >= n || pos[order[k]] != n)
      throw DimensionError("topological order is not a permutation");
    pos[order[k]] = k;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (adjacency(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0 &&
          pos[i] >= pos[j])
        throw CycleError("edge " + std::to_string(i) + "->" + std::to_string(j) +
                             " violates the supplied order",
                         j);
  return Dag(adjacency, std::move(order));
}

inline Dag validate_dag(const Matrix& adjacency) { return Dag::validate(adjacency); }

struct DagSampleConfig {
  std::size_t num_nodes = 10;
  double expected_degree = 3.0;
  double weight_low = 0.5;
  double weight_high = 2.0;
  std::uint64_t seed = 0;

  void check() const {
    if (num_nodes == 0) throw ConfigError("num_nodes must be positive");
    if (!(weight_low > 0.0) || !(weight_low <= weight_high))
      throw ConfigError("need 0 < weight_low <= weight_high");
    if (num_nodes > 1 && !(expected_degree > 0.0 &&
                           expected_degree < static_cast<double>(num_nodes)))
      throw ConfigError("need 0 < expected_degree < num_nodes");
  }
};

// Erdos-Renyi DAG: a random permutation fixes the order, each forward pair is
// an edge with probability expected_degree / (num_nodes - 1), weights uniform.
inline Dag sample_erdos_renyi_dag(const DagSampleConfig& cfg) {
  cfg.check();
  const std::size_t n = cfg.num_nodes;
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  Matrix a = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  if (n > 1) {
    const double p =
        std::min(1.0, cfg.expected_degree / static_cast<double>(n - 1));
    std::bernoulli_distribution edge(p);
    std::uniform_real_distribution<double> weight(cfg.weight_low, cfg.weight_high);
    for (std::size_t a_pos = 0; a_pos < n; ++a_pos)
      for (std::size_t b_pos = a_pos + 1; b_pos < n; ++b_pos)
        if (edge(rng))
          a(static_cast<Eigen::Index>(order[a_pos]),
            static_cast<Eigen::Index>(order[b_pos])) = weight(rng);
  }
  return Dag::with_order(a, std::move(order));
}

namespace detail {

inline void check_rows(const Dag& dag, Eigen::Index rows) {
  if (static_cast<std::size_t>(rows) != dag.num_nodes())
    throw DimensionError("matrix has " + std::to_string(rows) +
                         " node rows, DAG has " + std::to_string(dag.num_nodes()));
}

}  // namespace detail

// r = (I - A^T)^{-1} m, by forward substitution in topological order:
// r_j = m_j + sum_{i -> j} A_ij r_i.
inline Matrix sem_forward(const Dag& dag, const Matrix& m) {
  detail::check_rows(dag, m.rows());
  Matrix r = m;
  for (std::size_t j : dag.topo_order())
    for (const Edge& e : dag.in_edges(j))
      r.row(static_cast<Eigen::Index>(j)) +=
          e.weight * r.row(static_cast<Eigen::Index>(e.from));
  return r;
}

// (I - A^T) m.
inline Matrix sem_backward(const Dag& dag, const Matrix& m) {
  detail::check_rows(dag, m.rows());
  Matrix r = m;
  for (std::size_t j = 0; j < dag.num_nodes(); ++j)
    for (const Edge& e : dag.in_edges(j))
      r.row(static_cast<Eigen::Index>(j)) -=
          e.weight * m.row(static_cast<Eigen::Index>(e.from));
  return r;
}

// r = (I - A)^{-1} m, the adjoint of sem_forward. Back substitution in
// reverse topological order: r_i = m_i + sum_{i -> j} A_ij r_j.
inline Matrix sem_forward_adjoint(const Dag& dag, const Matrix& m) {
  detail::check_rows(dag, m.rows());
  Matrix r = m;
  const auto& order = dag.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    for (const Edge& e : dag.out_edges(*it))
      r.row(static_cast<Eigen::Index>(*it)) +=
          e.weight * r.row(static_cast<Eigen::Index>(e.to));
  return r;
}

// (I - A) m, the adjoint of sem_backward.
inline Matrix sem_backward_adjoint(const Dag& dag, const Matrix& m) {
  detail::check_rows(dag, m.rows());
  Matrix r = m;
  for (std::size_t i = 0; i < dag.num_nodes(); ++i)
    for (const Edge& e : dag.out_edges(i))
      r.row(static_cast<Eigen::Index>(i)) -=
          e.weight * m.row(static_cast<Eigen::Index>(e.to));
  return r;
}

// ---- adjacency CSV -------------------------------------------------------

inline Matrix parse_adjacency_csv(const std::string& text,
                                  const std::string& file = "<adjacency>") {
  std::vector<std::vector<double>> rows;
  auto ls = io::lines(text);
  for (std::size_t ln = 0; ln < ls.size(); ++ln) {
    auto line = io::trim(ls[ln]);
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    for (auto tok : io::split(line, ',')) row.push_back(io::parse_double(tok, file, ln + 1));
    if (!rows.empty() && row.size() != rows.front().size())
      throw ParseError(file, ln + 1,
                       "row has " + std::to_string(row.size()) +
                           " entries, expected " + std::to_string(rows.front().size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(file, 1, "adjacency file has no rows");
  if (rows.size() != rows.front().size())
    throw NonSquareError(file + ": adjacency has " + std::to_string(rows.size()) +
                         " rows and " + std::to_string(rows.front().size()) +
                         " columns, expected square");
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      a(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return a;
}

inline std::string format_adjacency_csv(const Matrix& a) {
  std::string out;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) out += ',';
      out += io::format_double(a(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Dag read_adjacency_file(const std::string& path) {
  return validate_dag(parse_adjacency_csv(io::read_file(path), path));
}

inline void write_adjacency_file(const std::string& path, const Dag& dag) {
  io::write_file(path, format_adjacency_csv(dag.adjacency()));
}

}  // namespace dagsurv
