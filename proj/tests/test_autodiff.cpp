#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "icl/autodiff.hpp"
#include "icl/rng.hpp"

using namespace icl;
using ad::Tape;
using ad::Var;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.storage()) v = rng.uniform(lo, hi);
  return t;
}

// Reverse-mode gradient of f at the inputs against central differences.
void expect_gradients(const std::function<Var(Tape&, const std::vector<Var>&)>& f, std::vector<Tensor> inputs,
                      double tol = 1e-7) {
  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& t : inputs) vars.push_back(tape.variable(t));
  const Var out = f(tape, vars);
  tape.backward(out);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Tensor g = tape.grad(vars[i]);
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      const double h = 1e-6;
      const auto eval = [&](double delta) {
        std::vector<Tensor> shifted = inputs;
        shifted[i][j] += delta;
        Tape t2;
        std::vector<Var> v2;
        for (const Tensor& t : shifted) v2.push_back(t2.variable(t));
        return f(t2, v2).value().item();
      };
      const double fd = (eval(h) - eval(-h)) / (2 * h);
      EXPECT_NEAR(g[j], fd, tol * std::max(1.0, std::abs(fd))) << "input " << i << " coord " << j;
    }
  }
}

}  // namespace

TEST(Autodiff, SquareGivesTwoW) {
  Tape tape;
  const Var w = tape.variable(Tensor::scalar(1.7));
  tape.backward(ad::square(w));
  EXPECT_DOUBLE_EQ(tape.grad(w).item(), 3.4);
}

TEST(Autodiff, ReluBlocksNegativePreactivation) {
  Tape tape;
  const Var w = tape.variable(Tensor::matrix(1, 2, {-0.5, 0.5}));
  tape.backward(ad::sum(ad::relu(w)));
  EXPECT_EQ(tape.grad(w)[0], 0.0);
  EXPECT_EQ(tape.grad(w)[1], 1.0);
}

TEST(Autodiff, ClipIsStraightThroughInsideOnly) {
  Tape tape;
  const Var w = tape.variable(Tensor::matrix(1, 3, {-2.0, 0.3, 2.0}));
  const Var c = ad::clip(w, 1.0);
  EXPECT_EQ(c.value()[0], -1.0);
  EXPECT_EQ(c.value()[2], 1.0);
  tape.backward(ad::sum(ad::scale(c, 3.0)));
  EXPECT_EQ(tape.grad(w)[0], 0.0);
  EXPECT_EQ(tape.grad(w)[1], 3.0);
  EXPECT_EQ(tape.grad(w)[2], 0.0);
}

TEST(Autodiff, MatmulTransposeAdd) {
  expect_gradients(
      [](Tape&, const std::vector<Var>& v) {
        return ad::sum(ad::square(ad::add(ad::matmul(v[0], ad::transpose(v[1])), v[2])));
      },
      {random_tensor({3, 4}, 1), random_tensor({2, 4}, 2), random_tensor({3, 2}, 3)});
}

TEST(Autodiff, SubMulScaleMean) {
  expect_gradients(
      [](Tape&, const std::vector<Var>& v) { return ad::mean(ad::mul(ad::sub(v[0], v[1]), ad::scale(v[0], 2.5))); },
      {random_tensor({2, 3}, 4), random_tensor({2, 3}, 5)});
}

TEST(Autodiff, RowBiasAndRelu) {
  expect_gradients(
      [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::square(ad::relu(ad::add_row_bias(v[0], v[1])))); },
      {random_tensor({4, 3}, 6), random_tensor({3}, 7)});
}

TEST(Autodiff, SoftmaxRows) {
  expect_gradients(
      [](Tape& t, const std::vector<Var>& v) {
        const Var w = t.constant(random_tensor({3, 4}, 9));
        return ad::sum(ad::mul(ad::softmax_rows(v[0]), w));
      },
      {random_tensor({3, 4}, 8, -3.0, 3.0)});
  Tape tape;
  const Var s = ad::softmax_rows(tape.constant(Tensor::matrix(1, 3, {1000.0, 1000.0, 1000.0})));
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.value()[static_cast<std::size_t>(i)], 1.0 / 3.0, 1e-15);
}

TEST(Autodiff, RadialProjectionActiveAndInactive) {
  // Rows of norm above and below the radius.
  Tensor x = Tensor::matrix(2, 3, {3.0, -1.0, 2.0, 0.1, 0.2, -0.1});
  expect_gradients(
      [](Tape& t, const std::vector<Var>& v) {
        const Var w = t.constant(random_tensor({2, 3}, 10));
        return ad::sum(ad::mul(ad::radial_project_rows(v[0], 1.0), w));
      },
      {x});
  Tape tape;
  const Var p = ad::radial_project_rows(tape.constant(x), 1.0);
  EXPECT_NEAR(p.value().mat().row(0).norm(), 1.0, 1e-15);
  EXPECT_EQ(p.value().at(1, 1), 0.2);
}

TEST(Autodiff, RowsAndElement) {
  expect_gradients(
      [](Tape&, const std::vector<Var>& v) {
        const Var r = ad::rows(v[0], 1, 2);
        return ad::add(ad::element(ad::square(r), 1, 2), ad::sum(r));
      },
      {random_tensor({4, 3}, 11)});
}

TEST(Autodiff, SharedSubexpressionAccumulates) {
  Tape tape;
  const Var w = tape.variable(Tensor::scalar(0.5));
  const Var y = ad::mul(ad::add(w, w), w);  // 2 w^2
  tape.backward(y);
  EXPECT_DOUBLE_EQ(tape.grad(w).item(), 2.0);
  tape.backward(y);  // gradients are reset, not accumulated across calls
  EXPECT_DOUBLE_EQ(tape.grad(w).item(), 2.0);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  Tape tape;
  const Var c = tape.constant(Tensor::scalar(2.0));
  const Var w = tape.variable(Tensor::scalar(3.0));
  tape.backward(ad::mul(c, w));
  EXPECT_EQ(tape.grad(c).item(), 0.0);
  EXPECT_EQ(tape.grad(w).item(), 2.0);
}

TEST(Autodiff, RejectsNonFiniteAndShapeErrors) {
  Tape tape;
  EXPECT_THROW(tape.variable(Tensor::scalar(std::nan(""))), NonFiniteError);
  const Var a = tape.variable(Tensor({2, 3}));
  const Var b = tape.variable(Tensor({2, 2}));
  EXPECT_THROW(ad::matmul(a, a), std::invalid_argument);
  EXPECT_THROW(ad::add(a, b), std::invalid_argument);
  EXPECT_THROW(tape.backward(a), std::invalid_argument);
  const Var big = tape.variable(Tensor::scalar(1e200));
  EXPECT_THROW(ad::mul(big, big), NonFiniteError);
}
