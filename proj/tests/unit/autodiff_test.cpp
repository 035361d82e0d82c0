#include <cmath>
#include <functional>
#include <map>
#include <string>

#include <gtest/gtest.h>

#include "seje/autodiff.hpp"
#include "seje/error.hpp"
#include "support.hpp"

namespace seje {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using testing::random_tensor;

TEST(Autodiff, SoftplusAtZero) {
  Tape tape;
  Var x = tape.variable(Tensor::scalar(0.0));
  Var y = ad::softplus(x);
  tape.backward(y);
  EXPECT_NEAR(y.value().item(), std::log(2.0), 1e-15);
  EXPECT_NEAR(x.grad().item(), 0.5, 1e-15);
}

TEST(Autodiff, NormalizeThreeFourFive) {
  Tape tape;
  Var y = ad::l2_normalize(tape.constant(Tensor(1, 2, {3.0, 4.0})));
  EXPECT_NEAR(y.value()(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(y.value()(0, 1), 0.8, 1e-15);
}

TEST(Autodiff, NormalizeRejectsZeroRow) {
  Tape tape;
  EXPECT_THROW(ad::l2_normalize(tape.constant(Tensor(1, 3))), NormalizationDegenerate);
}

TEST(Autodiff, SquaredEuclideanOfIdenticalRows) {
  Tape tape;
  Rng rng(3);
  Var x = tape.variable(random_tensor(rng, 1, 5));
  Var y = ad::reduce_sum(ad::squared_euclidean(x, x));
  tape.backward(y);
  EXPECT_EQ(y.value().item(), 0.0);
  for (double g : x.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, L2NormSubgradientAtZeroIsZero) {
  Tape tape;
  Var x = tape.variable(Tensor(1, 4));
  Var y = ad::reduce_sum(ad::l2_norm(x));
  tape.backward(y);
  EXPECT_EQ(y.value().item(), 0.0);
  for (double g : x.grad().data()) EXPECT_EQ(g, 0.0);
}

TEST(Autodiff, GradCheckOfTanhSum) {
  Rng rng(11);
  const auto f = [](Tape&, Var x) { return ad::reduce_sum(ad::tanh(x)); };
  EXPECT_LT(ad::grad_check(f, random_tensor(rng, 3, 4), 1e-5), 1e-6);
}

TEST(Autodiff, GradCheckOfConstantIsZero) {
  Rng rng(12);
  const auto f = [](Tape& tape, Var) { return tape.constant(Tensor::scalar(2.5)); };
  EXPECT_EQ(ad::grad_check(f, random_tensor(rng, 2, 2), 1e-5), 0.0);
}

TEST(Autodiff, ParentsPrecedeChildren) {
  Tape tape;
  Var a = tape.variable(Tensor::scalar(1.0));
  Var b = ad::exp(a);
  Var c = ad::add(b, a);
  EXPECT_LT(a.id(), b.id());
  EXPECT_LT(b.id(), c.id());
  tape.backward(c);
  EXPECT_NEAR(a.grad().item(), std::exp(1.0) + 1.0, 1e-15);
}

TEST(Autodiff, ConstantsReceiveNoGradient) {
  Tape tape;
  Var a = tape.constant(Tensor::scalar(2.0));
  Var b = tape.variable(Tensor::scalar(3.0));
  tape.backward(ad::elementwise_mul(a, b));
  EXPECT_FALSE(a.requires_grad());
  EXPECT_EQ(a.grad().item(), 0.0);
  EXPECT_EQ(b.grad().item(), 2.0);
}

TEST(Autodiff, BroadcastRowOperand) {
  Tape tape;
  Var m = tape.variable(Tensor(3, 2, {1, 2, 3, 4, 5, 6}));
  Var r = tape.variable(Tensor(1, 2, {10, 20}));
  Var y = ad::add(m, r);
  EXPECT_EQ(y.value()(2, 1), 26.0);
  tape.backward(ad::reduce_sum(y));
  EXPECT_EQ(r.grad()(0, 0), 3.0);
  EXPECT_EQ(r.grad()(0, 1), 3.0);
}

TEST(Autodiff, ShapeErrors) {
  Tape tape;
  EXPECT_THROW(ad::matmul(tape.constant(Tensor(2, 3)), tape.constant(Tensor(2, 3))), ShapeMismatch);
  EXPECT_THROW(ad::add(tape.constant(Tensor(2, 3)), tape.constant(Tensor(3, 2))), ShapeMismatch);
  EXPECT_THROW(tape.backward(tape.variable(Tensor(2, 2))), ShapeMismatch);
}

TEST(Autodiff, SoftmaxCrossEntropyHandValues) {
  Tape tape;
  const std::vector<std::size_t> label{0};
  Var uniform = ad::softmax_cross_entropy(tape.constant(Tensor(1, 4)), label);
  EXPECT_NEAR(uniform.value().item(), std::log(4.0), 1e-12);
  Var peaked = ad::softmax_cross_entropy(tape.constant(Tensor(1, 4, {10, 0, 0, 0})), label);
  EXPECT_NEAR(peaked.value().item(), std::log(1.0 + 3.0 * std::exp(-10.0)), 1e-15);
  EXPECT_NEAR(peaked.value().item(), 1.36e-4, 5e-7);
}

// Every op, reduced to a scalar through fixed random weights, must agree
// with central differences on 100 random inputs.
struct OpCase {
  std::size_t rows, cols;
  std::function<Var(Tape&, Var, Rng&)> apply;
  // Inputs closer than this to a kink are redrawn.
  std::function<bool(const Tensor&)> admissible = [](const Tensor&) { return true; };
  // Central differences are exact on quadratics, so those take the largest
  // step to keep rounding error small next to tiny gradient entries.
  double eps = 1e-5;
};

Var weighted_sum(Tape& tape, Var y, Rng& rng) {
  return ad::reduce_sum(ad::elementwise_mul(y, tape.constant(random_tensor(rng, y.rows(), y.cols()))));
}

bool away_from_zero(const Tensor& x) {
  for (double v : x.data()) {
    if (std::abs(v) < 1e-2) return false;
  }
  return true;
}

std::map<std::string, OpCase> op_cases() {
  std::map<std::string, OpCase> c;
  c["matmul"] = {3, 4, [](Tape& t, Var x, Rng& r) { return ad::matmul(x, t.constant(random_tensor(r, 4, 2))); }};
  c["matmul_right"] = {4, 2, [](Tape& t, Var x, Rng& r) { return ad::matmul(t.constant(random_tensor(r, 3, 4)), x); }};
  c["transpose"] = {3, 2, [](Tape&, Var x, Rng&) { return ad::transpose(x); }};
  c["add"] = {3, 2, [](Tape& t, Var x, Rng& r) { return ad::add(x, t.constant(random_tensor(r, 3, 2))); }};
  c["add_broadcast"] = {1, 3, [](Tape& t, Var x, Rng& r) { return ad::add(t.constant(random_tensor(r, 4, 3)), x); }};
  c["sub"] = {3, 2, [](Tape& t, Var x, Rng& r) { return ad::sub(t.constant(random_tensor(r, 3, 2)), x); }};
  c["sub_broadcast"] = {1, 3, [](Tape& t, Var x, Rng& r) { return ad::sub(t.constant(random_tensor(r, 4, 3)), x); }};
  c["add_scalar"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::add_scalar(x, 0.7); }};
  c["scalar_mul"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::scalar_mul(x, -1.3); }};
  c["elementwise_mul"] = {2, 3, [](Tape& t, Var x, Rng& r) { return ad::elementwise_mul(x, t.constant(random_tensor(r, 2, 3))); }};
  c["elementwise_square"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::elementwise_mul(x, x); },
                            [](const Tensor&) { return true; }, 1e-3};
  c["tanh"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::tanh(x); }};
  c["sigmoid"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::sigmoid(x); }};
  c["softplus"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::softplus(x); }};
  c["log"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::log(ad::sigmoid(x)); }};
  c["exp"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::exp(x); }};
  c["leaky_relu"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::leaky_relu(x, 0.2); }, away_from_zero};
  c["clamp_min"] = {2, 3, [](Tape&, Var x, Rng&) { return ad::clamp_min(x, 0.0); }, away_from_zero};
  c["concat"] = {2, 3, [](Tape& t, Var x, Rng& r) { return ad::concat({t.constant(random_tensor(r, 2, 1)), x, x}); }};
  c["slice"] = {2, 5, [](Tape&, Var x, Rng&) { return ad::slice(x, 1, 4); }};
  c["slice_rows"] = {5, 2, [](Tape&, Var x, Rng&) { return ad::slice_rows(x, 2, 5); }};
  c["reduce_mean"] = {3, 3, [](Tape&, Var x, Rng&) { return ad::reduce_mean(x); }};
  c["row_sum"] = {3, 4, [](Tape&, Var x, Rng&) { return ad::row_sum(x); }};
  c["l2_norm"] = {3, 4, [](Tape&, Var x, Rng&) { return ad::l2_norm(x); }};
  c["l2_normalize"] = {3, 4, [](Tape&, Var x, Rng&) { return ad::l2_normalize(x); }};
  c["squared_euclidean"] = {3, 4, [](Tape& t, Var x, Rng& r) {
                              return ad::squared_euclidean(x, t.constant(random_tensor(r, 3, 4)));
                            }};
  c["pairwise_squared_euclidean"] = {3, 4, [](Tape& t, Var x, Rng& r) {
                                       return ad::pairwise_squared_euclidean(x, t.constant(random_tensor(r, 5, 4)));
                                     }};
  c["pairwise_squared_euclidean_right"] = {5, 4, [](Tape& t, Var x, Rng& r) {
                                             return ad::pairwise_squared_euclidean(t.constant(random_tensor(r, 3, 4)), x);
                                           }};
  c["gather_cols"] = {3, 4, [](Tape&, Var x, Rng&) {
                        static const std::vector<std::size_t> cols{2, 0, 3};
                        return ad::gather_cols(x, cols);
                      }};
  c["softmax_cross_entropy"] = {3, 4, [](Tape&, Var x, Rng&) {
                                  static const std::vector<std::size_t> labels{1, 3, 0};
                                  return ad::softmax_cross_entropy(x, labels);
                                }};
  return c;
}

class OpGradient : public ::testing::TestWithParam<std::string> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  const OpCase op = op_cases().at(GetParam());
  Rng rng(std::hash<std::string>{}(GetParam()));
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor x;
    do {
      x = random_tensor(rng, op.rows, op.cols);
    } while (!op.admissible(x));
    const std::uint64_t weights_seed = rng.next_u64();
    const auto f = [&](Tape& tape, Var v) {
      Rng local(weights_seed);
      Var y = op.apply(tape, v, local);
      return y.rows() == 1 && y.cols() == 1 ? y : weighted_sum(tape, y, local);
    };
    worst = std::max(worst, ad::grad_check(f, x, op.eps));
  }
  EXPECT_LT(worst, 1e-6);
}

std::vector<std::string> op_names() {
  std::vector<std::string> names;
  for (const auto& [name, c] : op_cases()) names.push_back(name);
  return names;
}

INSTANTIATE_TEST_SUITE_P(AllOps, OpGradient, ::testing::ValuesIn(op_names()),
                         [](const auto& info) { return info.param; });

}  // namespace
}  // namespace seje
