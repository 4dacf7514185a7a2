#include <gtest/gtest.h>

#include <random>

#include "dagsurv/autodiff.hpp"
#include "support/finite_difference.hpp"

namespace dagsurv::ad {
namespace {

using testing::max_relative_error;
using testing::numeric_gradient;

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -2.0,
                     double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

// Checks d/dx sum(W .* op(x)) against central differences.
using UnaryOp = std::function<Value(const Value&)>;

double unary_check(const UnaryOp& op, const Matrix& x, std::mt19937_64& rng) {
  Matrix w;
  {
    Tape probe;
    w = random_matrix(op(probe.constant(x)).rows(), op(probe.constant(x)).cols(), rng);
  }
  auto f = [&](const Matrix& xv) {
    Tape t;
    return sum(mul_const(op(t.constant(xv)), w)).scalar();
  };
  Tape t;
  Value xv = t.variable(x);
  t.backward(sum(mul_const(op(xv), w)));
  return max_relative_error(xv.grad(), numeric_gradient(f, x));
}

using BinaryOp = std::function<Value(const Value&, const Value&)>;

double binary_check(const BinaryOp& op, const Matrix& a, const Matrix& b, std::mt19937_64& rng) {
  Matrix w;
  {
    Tape probe;
    auto out = op(probe.constant(a), probe.constant(b));
    w = random_matrix(out.rows(), out.cols(), rng);
  }
  Tape t;
  Value av = t.variable(a), bv = t.variable(b);
  t.backward(sum(mul_const(op(av, bv), w)));
  auto fa = [&](const Matrix& x) {
    Tape s;
    return sum(mul_const(op(s.constant(x), s.constant(b)), w)).scalar();
  };
  auto fb = [&](const Matrix& x) {
    Tape s;
    return sum(mul_const(op(s.constant(a), s.constant(x)), w)).scalar();
  };
  return std::max(max_relative_error(av.grad(), numeric_gradient(fa, a)),
                  max_relative_error(bv.grad(), numeric_gradient(fb, b)));
}

// Moves entries away from the kink at 0.
Matrix avoid_kink(Matrix m) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (std::abs(m(i)) < 1e-3) m(i) = 0.5;
  return m;
}

TEST(Ops, MatmulIdentity) {
  std::mt19937_64 rng(1);
  Tape t;
  Matrix m = random_matrix(3, 4, rng);
  EXPECT_TRUE(matmul(t.constant(Matrix::Identity(3, 3)), t.constant(m)).data() == m);
}

TEST(Ops, TraceOfProductGradient) {
  std::mt19937_64 rng(2);
  Matrix b = random_matrix(3, 3, rng);
  Tape t;
  Value a = t.variable(random_matrix(3, 3, rng));
  t.backward(trace(matmul(a, t.constant(b))));
  EXPECT_LT((a.grad() - b.transpose()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Ops, CosDerivativeAtZero) {
  Tape t;
  Value x = t.variable(Matrix::Zero(1, 1));
  t.backward(sum(cos(x)));
  EXPECT_EQ(x.grad()(0, 0), 0.0);
}

TEST(Ops, ShapeErrors) {
  Tape t;
  EXPECT_THROW(matmul(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 3))), ShapeError);
  EXPECT_THROW(add(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(3, 2))), ShapeError);
  EXPECT_THROW(concat_rows(t.constant(Matrix::Zero(2, 3)), t.constant(Matrix::Zero(2, 2))),
               ShapeError);
}

TEST(Ops, ReluValuesAndSubgradient) {
  Tape t;
  Matrix x(1, 3);
  x << -1.0, 2.0, 0.0;
  Value v = t.variable(x);
  Value y = relu(v);
  EXPECT_EQ(y.data()(0, 0), 0.0);
  EXPECT_EQ(y.data()(0, 1), 2.0);
  EXPECT_EQ(y.data()(0, 2), 0.0);
  t.backward(sum(y));
  EXPECT_EQ(v.grad()(0, 0), 0.0);
  EXPECT_EQ(v.grad()(0, 1), 1.0);
  EXPECT_EQ(v.grad()(0, 2), 0.0);
}

TEST(Ops, SeluValues) {
  Tape t;
  Matrix x(1, 3);
  x << 0.0, -1.0, 2.0;
  Value y = selu(t.constant(x));
  EXPECT_EQ(y.data()(0, 0), 0.0);
  const double oracle = 1.0507009873554805 * 1.6732632423543772 * (std::exp(-1.0) - 1.0);
  EXPECT_NEAR(y.data()(0, 1), oracle, 1e-15);
  EXPECT_NEAR(y.data()(0, 1), -1.1113, 1e-4);
  EXPECT_DOUBLE_EQ(y.data()(0, 2), 1.0507009873554805 * 2.0);
}

TEST(Ops, SoftmaxSymmetricAndStable) {
  Tape t;
  Matrix x(2, 2);
  x << 0.0, 0.0, 1000.0, 0.0;
  Value y = softmax_rows(t.constant(x));
  EXPECT_DOUBLE_EQ(y.data()(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(y.data()(0, 1), 0.5);
  EXPECT_NEAR(y.data()(1, 0), 1.0, 1e-15);
  EXPECT_TRUE(std::isfinite(y.data()(1, 1)));
  EXPECT_LT(y.data()(1, 1), 1e-300);
}

TEST(Ops, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    Tape t;
    Value y = softmax_rows(t.constant(random_matrix(4, 7, rng, -30.0, 30.0)));
    for (Eigen::Index r = 0; r < 4; ++r) {
      EXPECT_NEAR(y.data().row(r).sum(), 1.0, 1e-9);
      EXPECT_GT(y.data().row(r).minCoeff(), 0.0);
    }
  }
}

TEST(Ops, SoftmaxJacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    Matrix x = random_matrix(1, 5, rng);
    // Full Jacobian: one backward per output coordinate.
    for (Eigen::Index k = 0; k < 5; ++k) {
      Matrix sel = Matrix::Zero(1, 5);
      sel(0, k) = 1.0;
      Tape t;
      Value v = t.variable(x);
      t.backward(sum(mul_const(softmax_rows(v), sel)));
      auto f = [&](const Matrix& xv) {
        Tape s;
        return softmax_rows(s.constant(xv)).data()(0, k);
      };
      ASSERT_LT(max_relative_error(v.grad(), numeric_gradient(f, x)), 1e-4);
    }
  }
}

// Randomized finite-difference sweep across every differentiable primitive.
TEST(Gradients, AllPrimitivesMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  const double tol = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    Matrix a43 = random_matrix(4, 3, rng);
    Matrix b32 = random_matrix(3, 2, rng);
    Matrix c43 = random_matrix(4, 3, rng);
    Matrix row = random_matrix(1, 3, rng);
    Matrix pos = random_matrix(4, 3, rng, 0.2, 3.0);
    EXPECT_LT(binary_check(matmul, a43, b32, rng), tol) << "matmul";
    EXPECT_LT(binary_check(add, a43, c43, rng), tol) << "add";
    EXPECT_LT(binary_check(sub, a43, c43, rng), tol) << "sub";
    EXPECT_LT(binary_check(mul, a43, c43, rng), tol) << "mul";
    EXPECT_LT(binary_check(add_row, a43, row, rng), tol) << "add_row";
    EXPECT_LT(binary_check(concat_cols, a43, c43, rng), tol) << "concat_cols";
    EXPECT_LT(binary_check(concat_rows, a43, row, rng), tol) << "concat_rows";
    EXPECT_LT(unary_check([](const Value& v) { return cos(v); }, a43, rng), tol) << "cos";
    EXPECT_LT(unary_check([](const Value& v) { return exp(v); }, a43, rng), tol) << "exp";
    EXPECT_LT(unary_check([](const Value& v) { return log(v); }, pos, rng), tol) << "log";
    EXPECT_LT(unary_check([](const Value& v) { return relu(v); }, avoid_kink(a43), rng), tol)
        << "relu";
    EXPECT_LT(unary_check([](const Value& v) { return selu(v); }, avoid_kink(a43), rng), tol)
        << "selu";
    EXPECT_LT(unary_check([](const Value& v) { return softmax_rows(v); }, a43, rng), tol)
        << "softmax_rows";
    EXPECT_LT(unary_check([](const Value& v) { return scale(v, -1.7); }, a43, rng), tol);
    EXPECT_LT(unary_check([](const Value& v) { return add_scalar(v, 0.3); }, a43, rng), tol);
    EXPECT_LT(unary_check([](const Value& v) { return mean(v); }, a43, rng), tol) << "mean";
    EXPECT_LT(unary_check([](const Value& v) { return row_sum(v); }, a43, rng), tol) << "row_sum";
    EXPECT_LT(unary_check([](const Value& v) { return sum_squares(v); }, a43, rng), tol);
    EXPECT_LT(unary_check([](const Value& v) { return trace(v); }, a43.topRows(3), rng), tol);
  }
}

TEST(Backward, SquareAtThree) {
  Tape t;
  Value x = t.variable(Matrix::Constant(1, 1, 3.0));
  t.backward(mul(x, x));
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
}

TEST(Backward, FanOutAccumulates) {
  Tape t;
  Value x = t.variable(Matrix::Constant(1, 1, 0.7));
  t.backward(x + x);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Backward, SecondSweepDoublesLeafGradients) {
  std::mt19937_64 rng(6);
  Parameter p("w", random_matrix(3, 2, rng));
  Tape t;
  Value x = t.variable(random_matrix(4, 3, rng));
  Value w = t.param(p);
  Value loss = sum(cos(matmul(x, w)));
  t.backward(loss);
  const Matrix gx = x.grad();
  const Matrix gw = p.grad;
  t.backward(loss);
  EXPECT_TRUE(x.grad() == 2.0 * gx);
  EXPECT_TRUE(p.grad == 2.0 * gw);
}

TEST(Backward, NonScalarLossRejected) {
  Tape t;
  Value x = t.variable(Matrix::Zero(2, 2));
  EXPECT_THROW(t.backward(cos(x)), NonScalarLossError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Tape t;
  Value c = t.constant(Matrix::Constant(1, 1, 2.0));
  Value x = t.variable(Matrix::Constant(1, 1, 1.0));
  t.backward(mul(c, x));
  EXPECT_EQ(c.grad().size(), 0);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 2.0);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::mt19937_64 rng(7);
  Parameter p("w", random_matrix(2, 3, rng));
  const Matrix before = p.value;
  Adam opt({&p}, AdamOptions{});
  for (int i = 0; i < 10; ++i) opt.step();
  EXPECT_TRUE(p.value == before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Parameter p("w", Matrix::Zero(1, 4));
  p.grad << 3.0, -0.2, 1e-3, -50.0;
  AdamOptions o;
  o.lr = 0.01;
  Adam opt({&p}, o);
  opt.step();
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(std::signbit(p.value(0, i)), !std::signbit(p.grad(0, i)));
    EXPECT_NEAR(std::abs(p.value(0, i)), 0.01, 1e-6);
  }
}

TEST(Adam, QuadraticBowlDecreases) {
  Parameter p("w", Matrix::Constant(1, 2, 5.0));
  AdamOptions o;
  o.lr = 1e-2;
  Adam opt({&p}, o);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    Tape t;
    Value loss = sum_squares(t.param(p));
    t.backward(loss);
    ASSERT_LT(loss.scalar(), prev) << "step " << step;
    prev = loss.scalar();
    opt.step();
  }
  EXPECT_LT(prev, 50.0);
}

}  // namespace
}  // namespace dagsurv::ad
