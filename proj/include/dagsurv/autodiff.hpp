#pragma once

// Define-by-run reverse-mode differentiation over dense double matrices.
//
// A Tape records every operation as a node; node ids are assigned in creation
// order, which is therefore a topological order of the graph. backward()
// sweeps ids in reverse. Parameters live outside the tape so a fresh tape can
// be built for every minibatch.
//
// Gradient accumulation: each backward() call adds into Parameter::grad and
// into the grad of leaves created with Tape::variable(). Intermediate grads are
// recomputed from scratch on every call.

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "dagsurv/errors.hpp"

namespace dagsurv::ad {

using Matrix = Eigen::MatrixXd;

inline constexpr double kSeluLambda = 1.0507009873554805;
inline constexpr double kSeluAlpha = 1.6732632423543772;

struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

// Lightweight handle to a node on a Tape.
class Value {
 public:
  Value() = default;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& data() const;
  // Gradient of the last backward() sweep; zero-size when unreached.
  const Matrix& grad() const;
  Eigen::Index rows() const { return data().rows(); }
  Eigen::Index cols() const { return data().cols(); }
  double scalar() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(Matrix m) { return push(std::move(m), "const", {}, nullptr, false); }
  Value constant(double x) { return constant(Matrix::Constant(1, 1, x)); }

  // Leaf whose gradient is kept on the tape.
  Value variable(Matrix m) {
    auto v = push(std::move(m), "var", {}, nullptr, true);
    nodes_[v.id()].leaf = true;
    return v;
  }

  // Leaf bound to an external parameter; backward() adds into p.grad.
  Value param(Parameter& p) {
    auto v = push(p.value, "param", {}, nullptr, true);
    nodes_[v.id()].leaf = true;
    nodes_[v.id()].param = &p;
    return v;
  }

  // Records a new node. `backward` receives this tape and the new node's id;
  // it should read grad(self) and call accumulate() on the parents that
  // needs_grad().
  Value record(Matrix data, std::string op, std::vector<std::size_t> parents,
               BackwardFn backward) {
    bool needs = false;
    for (auto p : parents) needs = needs || nodes_[p].requires_grad;
    return push(std::move(data), std::move(op), std::move(parents), std::move(backward), needs);
  }

  const Matrix& data(std::size_t id) const { return nodes_[id].data; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  bool needs_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
  const std::string& op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  void accumulate(std::size_t id, const Matrix& g) {
    auto& n = nodes_[id];
    if (n.grad.size() == 0)
      n.grad = g;
    else
      n.grad += g;
  }

  void backward(const Value& loss) {
    if (loss.tape() != this) throw Error("loss belongs to a different tape");
    const auto& l = nodes_[loss.id()].data;
    if (l.rows() != 1 || l.cols() != 1)
      throw NonScalarLossError("backward needs a 1x1 loss, got " + std::to_string(l.rows()) +
                               "x" + std::to_string(l.cols()));
    for (auto& n : nodes_)
      if (!n.leaf || n.param) n.grad.resize(0, 0);
    accumulate(loss.id(), Matrix::Ones(1, 1));
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
      auto& n = nodes_[k];
      if (n.grad.size() == 0 || !n.requires_grad) continue;
      if (n.backward) n.backward(*this, k);
      if (n.param) n.param->grad += n.grad;
    }
  }

 private:
  struct Node {
    Matrix data;
    Matrix grad;
    std::string op;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
    bool leaf = false;
  };

  Value push(Matrix data, std::string op, std::vector<std::size_t> parents, BackwardFn fn,
             bool requires_grad) {
    nodes_.push_back(Node{std::move(data), Matrix(), std::move(op), std::move(parents),
                          std::move(fn), nullptr, requires_grad, false});
    return Value(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;  // deque: data() references survive later pushes
};

inline const Matrix& Value::data() const { return tape_->data(id_); }
inline const Matrix& Value::grad() const { return tape_->grad(id_); }
inline double Value::scalar() const {
  const auto& d = data();
  if (d.size() != 1) throw ShapeError("value is not a scalar");
  return d(0, 0);
}

inline void backward(const Value& loss) { loss.tape()->backward(loss); }

namespace detail {

inline std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void same_shape(const Value& a, const Value& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape(a.data()) + " and " +
                     shape(b.data()) + " differ");
}

inline void same_tape(const Value& a, const Value& b) {
  if (a.tape() != b.tape()) throw Error("operands live on different tapes");
}

// Unary elementwise op with local derivative computed from (input, output).
template <typename Fwd, typename Deriv>
Value unary(const Value& a, const char* op, Fwd fwd, Deriv deriv) {
  Tape& t = *a.tape();
  Matrix out = a.data().unaryExpr(fwd);
  std::size_t ia = a.id();
  return t.record(std::move(out), op, {ia}, [ia, deriv](Tape& tp, std::size_t self) {
    if (!tp.needs_grad(ia)) return;
    const Matrix& x = tp.data(ia);
    const Matrix& y = tp.data(self);
    Matrix local = x.binaryExpr(y, deriv);
    tp.accumulate(ia, tp.grad(self).cwiseProduct(local));
  });
}

}  // namespace detail

inline Value matmul(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + detail::shape(a.data()) + " * " + detail::shape(b.data()));
  Tape& t = *a.tape();
  std::size_t ia = a.id(), ib = b.id();
  return t.record(a.data() * b.data(), "matmul", {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g * tp.data(ib).transpose());
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.data(ia).transpose() * g);
  });
}

inline Value add(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "add");
  Tape& t = *a.tape();
  std::size_t ia = a.id(), ib = b.id();
  return t.record(a.data() + b.data(), "add", {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self));
    if (tp.needs_grad(ib)) tp.accumulate(ib, tp.grad(self));
  });
}

inline Value sub(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "sub");
  Tape& t = *a.tape();
  std::size_t ia = a.id(), ib = b.id();
  return t.record(a.data() - b.data(), "sub", {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self));
    if (tp.needs_grad(ib)) tp.accumulate(ib, -tp.grad(self));
  });
}

// Elementwise product.
inline Value mul(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "mul");
  Tape& t = *a.tape();
  std::size_t ia = a.id(), ib = b.id();
  return t.record(a.data().cwiseProduct(b.data()), "mul", {ia, ib},
                  [ia, ib](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g.cwiseProduct(tp.data(ib)));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.cwiseProduct(tp.data(ia)));
                  });
}

// a (B x n) plus a row vector b (1 x n) broadcast over rows.
inline Value add_row(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  if (b.rows() != 1 || b.cols() != a.cols())
    throw ShapeError("add_row: " + detail::shape(a.data()) + " + " + detail::shape(b.data()));
  Tape& t = *a.tape();
  std::size_t ia = a.id(), ib = b.id();
  Matrix out = a.data().rowwise() + b.data().row(0);
  return t.record(std::move(out), "add_row", {ia, ib}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    if (tp.needs_grad(ia)) tp.accumulate(ia, g);
    if (tp.needs_grad(ib)) tp.accumulate(ib, g.colwise().sum());
  });
}

inline Value scale(const Value& a, double s) {
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  return t.record(a.data() * s, "scale", {ia}, [ia, s](Tape& tp, std::size_t self) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self) * s);
  });
}

inline Value add_scalar(const Value& a, double s) {
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  Matrix out = a.data().array() + s;
  return t.record(std::move(out), "add_scalar", {ia}, [ia](Tape& tp, std::size_t self) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self));
  });
}

// Elementwise product with a constant matrix of the same shape.
inline Value mul_const(const Value& a, const Matrix& c) {
  if (a.rows() != c.rows() || a.cols() != c.cols())
    throw ShapeError("mul_const: " + detail::shape(a.data()) + " vs " + detail::shape(c));
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  return t.record(a.data().cwiseProduct(c), "mul_const", {ia},
                  [ia, c](Tape& tp, std::size_t self) {
                    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self).cwiseProduct(c));
                  });
}

// [a, b] side by side (same row count).
inline Value concat_cols(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  if (a.rows() != b.rows())
    throw ShapeError("concat_cols: " + detail::shape(a.data()) + " | " + detail::shape(b.data()));
  Tape& t = *a.tape();
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.data(), b.data();
  std::size_t ia = a.id(), ib = b.id();
  const Eigen::Index ca = a.cols(), cb = b.cols();
  return t.record(std::move(out), "concat_cols", {ia, ib},
                  [ia, ib, ca, cb](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g.leftCols(ca));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.rightCols(cb));
                  });
}

// [a; b] stacked (same column count).
inline Value concat_rows(const Value& a, const Value& b) {
  detail::same_tape(a, b);
  if (a.cols() != b.cols())
    throw ShapeError("concat_rows: " + detail::shape(a.data()) + " / " + detail::shape(b.data()));
  Tape& t = *a.tape();
  Matrix out(a.rows() + b.rows(), a.cols());
  out << a.data(), b.data();
  std::size_t ia = a.id(), ib = b.id();
  const Eigen::Index ra = a.rows(), rb = b.rows();
  return t.record(std::move(out), "concat_rows", {ia, ib},
                  [ia, ib, ra, rb](Tape& tp, std::size_t self) {
                    const Matrix& g = tp.grad(self);
                    if (tp.needs_grad(ia)) tp.accumulate(ia, g.topRows(ra));
                    if (tp.needs_grad(ib)) tp.accumulate(ib, g.bottomRows(rb));
                  });
}

inline Value cos(const Value& a) {
  return detail::unary(
      a, "cos", [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

inline Value exp(const Value& a) {
  return detail::unary(
      a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

inline Value log(const Value& a) {
  return detail::unary(
      a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

// max(0, x); the subgradient at 0 is 0.
inline Value relu(const Value& a) {
  return detail::unary(
      a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Value max0(const Value& a) { return relu(a); }

inline Value selu(const Value& a) {
  return detail::unary(
      a, "selu",
      [](double x) { return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x); },
      [](double x, double) {
        return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
      });
}

// Row-wise softmax, stabilized by subtracting each row's max.
inline Value softmax_rows(const Value& a) {
  Tape& t = *a.tape();
  const Matrix& x = a.data();
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    double mx = x.row(r).maxCoeff();
    y.row(r) = (x.row(r).array() - mx).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  std::size_t ia = a.id();
  return t.record(std::move(y), "softmax_rows", {ia}, [ia](Tape& tp, std::size_t self) {
    if (!tp.needs_grad(ia)) return;
    const Matrix& y = tp.data(self);
    const Matrix& g = tp.grad(self);
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix gx = y.cwiseProduct(g.colwise() - dot);
    tp.accumulate(ia, gx);
  });
}

// Sum of all entries, 1x1.
inline Value sum(const Value& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  const Eigen::Index r = a.rows(), c = a.cols();
  return t.record(Matrix::Constant(1, 1, a.data().sum()), "sum", {ia},
                  [ia, r, c](Tape& tp, std::size_t self) {
                    if (tp.needs_grad(ia))
                      tp.accumulate(ia, Matrix::Constant(r, c, tp.grad(self)(0, 0)));
                  });
}

inline Value mean(const Value& a) {
  return scale(sum(a), 1.0 / static_cast<double>(a.data().size()));
}

// B x n -> B x 1.
inline Value row_sum(const Value& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  const Eigen::Index c = a.cols();
  Matrix out = a.data().rowwise().sum();
  return t.record(std::move(out), "row_sum", {ia}, [ia, c](Tape& tp, std::size_t self) {
    if (tp.needs_grad(ia)) tp.accumulate(ia, tp.grad(self).replicate(1, c));
  });
}

// Sum of squares of all entries, 1x1.
inline Value sum_squares(const Value& a) {
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  return t.record(Matrix::Constant(1, 1, a.data().squaredNorm()), "sum_squares", {ia},
                  [ia](Tape& tp, std::size_t self) {
                    if (tp.needs_grad(ia))
                      tp.accumulate(ia, 2.0 * tp.grad(self)(0, 0) * tp.data(ia));
                  });
}

inline Value trace(const Value& a) {
  if (a.rows() != a.cols()) throw ShapeError("trace of non-square " + detail::shape(a.data()));
  Tape& t = *a.tape();
  std::size_t ia = a.id();
  const Eigen::Index n = a.rows();
  return t.record(Matrix::Constant(1, 1, a.data().trace()), "trace", {ia},
                  [ia, n](Tape& tp, std::size_t self) {
                    if (tp.needs_grad(ia))
                      tp.accumulate(ia, tp.grad(self)(0, 0) * Matrix::Identity(n, n));
                  });
}

inline Value operator+(const Value& a, const Value& b) { return add(a, b); }
inline Value operator-(const Value& a, const Value& b) { return sub(a, b); }

// ---- Adam ----------------------------------------------------------------

struct AdamState {
  long step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update using each parameter's accumulated grad.
inline void adam_step(const std::vector<Parameter*>& params, AdamState& state,
                      const AdamOptions& opt) {
  if (state.m.size() != params.size()) {
    state.m.clear();
    state.v.clear();
    for (auto* p : params) {
      state.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols())
      throw ShapeError("parameter '" + p.name + "' has a gradient of the wrong shape");
    Matrix& m = state.m[k];
    Matrix& v = state.v[k];
    m = opt.beta1 * m + (1.0 - opt.beta1) * p.grad;
    v = opt.beta2 * v + (1.0 - opt.beta2) * p.grad.cwiseAbs2();
    p.value.array() -=
        opt.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + opt.eps);
  }
}

class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamOptions opt)
      : params_(std::move(params)), opt_(opt) {}

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  void step() { adam_step(params_, state_, opt_); }

  const AdamState& state() const { return state_; }
  AdamOptions& options() { return opt_; }

 private:
  std::vector<Parameter*> params_;
  AdamOptions opt_;
  AdamState state_;
};

}  // namespace dagsurv::ad
