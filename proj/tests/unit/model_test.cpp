#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "seje/error.hpp"
#include "seje/model.hpp"
#include "support.hpp"

namespace seje {
namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;

EmbedConfig small_config() {
  EmbedConfig c;
  c.d = 8;
  c.h = 12;
  c.h_D = 8;
  c.D_w = 6;
  c.D_px = 5;
  c.n_categories = 4;
  return c;
}

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double norm(std::span<const double> v) { return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0)); }

TEST(Encoders, UnitNorm) {
  Rng rng(1);
  const ModelParams p = ModelParams::init(small_config(), rng);
  for (int t = 0; t < 20; ++t) {
    const auto er = encode_recipe(p, random_vec(rng, 6), {random_vec(rng, 6), random_vec(rng, 6)});
    const auto ev = encode_image(p, random_vec(rng, 5), random_vec(rng, 6));
    EXPECT_NEAR(norm(er), 1.0, 1e-9);
    EXPECT_NEAR(norm(ev), 1.0, 1e-9);
  }
}

TEST(Encoders, SentenceOrderDoesNotMatter) {
  Rng rng(2);
  const ModelParams p = ModelParams::init(small_config(), rng);
  const auto ft = random_vec(rng, 6);
  std::vector<std::vector<double>> s{random_vec(rng, 6), random_vec(rng, 6), random_vec(rng, 6)};
  const auto base = encode_recipe(p, ft, s);
  std::reverse(s.begin(), s.end());
  EXPECT_EQ(encode_recipe(p, ft, s), base);
  std::swap(s[0], s[1]);
  EXPECT_EQ(encode_recipe(p, ft, s), base);
}

TEST(Encoders, ZeroInputsAndBiasesAreDegenerate) {
  const ModelParams p = ModelParams::zeros(small_config());
  EXPECT_THROW(encode_recipe(p, std::vector<double>(6, 0.0), {}), NormalizationDegenerate);
  EXPECT_THROW(encode_image(p, std::vector<double>(5, 0.0), std::vector<double>(6, 0.0)), NormalizationDegenerate);
}

TEST(Encoders, NotScaleInvariant) {
  Rng rng(3);
  const ModelParams p = ModelParams::init(small_config(), rng);
  auto px = random_vec(rng, 5);
  const auto fc = random_vec(rng, 6);
  const auto a = encode_image(p, px, fc);
  EXPECT_EQ(encode_image(p, px, fc), a);
  for (double& x : px) x *= 2.0;
  const auto b = encode_image(p, px, fc);
  double diff = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) diff += std::abs(a[k] - b[k]);
  EXPECT_GT(diff, 1e-6);
}

TEST(Encoders, WrongWidthRejected) {
  Rng rng(4);
  const ModelParams p = ModelParams::init(small_config(), rng);
  EXPECT_THROW(encode_image(p, random_vec(rng, 4), random_vec(rng, 6)), ShapeMismatch);
}

TEST(Encoders, BatchMatchesSingle) {
  Rng rng(5);
  const ModelParams p = ModelParams::init(small_config(), rng);
  const auto ft = random_vec(rng, 6), sm = random_vec(rng, 6);
  Tape tape;
  const BoundParams b = bind(tape, p, false, false);
  Var er = encode_recipe_batch(b, tape.constant(Tensor::row(ft)), tape.constant(Tensor::row(sm)));
  const auto single = encode_recipe(p, ft, {sm});
  for (std::size_t k = 0; k < single.size(); ++k) EXPECT_NEAR(er.value()(0, k), single[k], 1e-15);
}

TEST(Classifier, ZeroWeightsGiveUniform) {
  Rng rng(6);
  const ModelParams p = ModelParams::zeros(small_config());
  const auto logits = classify(p, random_vec(rng, 8));
  ASSERT_EQ(logits.size(), 4u);
  for (double l : logits) EXPECT_EQ(l, 0.0);
  Tape tape;
  const std::vector<std::size_t> label{2};
  EXPECT_NEAR(ad::softmax_cross_entropy(tape.constant(Tensor::row(logits)), label).value().item(), std::log(4.0),
              1e-12);
}

TEST(Discriminator, ZeroParameters) {
  Rng rng(7);
  const Discrimination d = discriminate(ModelParams::zeros(small_config()), random_vec(rng, 8));
  EXPECT_EQ(d.confidence, 0.5);
  for (double g : d.input_gradient) EXPECT_EQ(g, 0.0);
}

TEST(Discriminator, ClosedFormGradientMatchesDifferences) {
  Rng rng(8);
  const ModelParams p = ModelParams::init(small_config(), rng);
  for (int t = 0; t < 20; ++t) {
    const auto e = random_vec(rng, 8);
    const Discrimination d = discriminate(p, e);
    const double h = 1e-6;
    for (std::size_t k = 0; k < e.size(); ++k) {
      auto up = e, down = e;
      up[k] += h;
      down[k] -= h;
      const double numeric = (discriminate(p, up).score - discriminate(p, down).score) / (2 * h);
      const double rel = std::abs(numeric - d.input_gradient[k]) /
                         std::max({std::abs(numeric), std::abs(d.input_gradient[k]), 1e-8});
      EXPECT_LT(rel, 1e-6) << "coordinate " << k;
    }
  }
}

TEST(Discriminator, LinearConfigurationGradientIsW3) {
  EmbedConfig cfg = small_config();
  cfg.leaky_slope = 1.0;
  ModelParams p = ModelParams::zeros(cfg);
  for (std::size_t i = 0; i < cfg.d; ++i) {
    p[Param::W1](i, i) = 1.0;
    p[Param::W2](i, i) = 1.0;
  }
  Rng rng(9);
  for (double& w : p[Param::w3].data()) w = rng.normal();
  const auto e = random_vec(rng, cfg.d);
  const Discrimination d = discriminate(p, e);
  double s = 0.0;
  for (std::size_t k = 0; k < cfg.d; ++k) {
    EXPECT_NEAR(d.input_gradient[k], p[Param::w3](k, 0), 1e-15);
    s += p[Param::w3](k, 0) * e[k];
  }
  EXPECT_NEAR(d.score, s, 1e-12);
}

TEST(Discriminator, InputGradientIsDifferentiableInWeights) {
  Rng rng(10);
  const ModelParams p = ModelParams::init(small_config(), rng);
  const Tensor x = testing::random_tensor(rng, 3, 8);
  for (Param which : {Param::W1, Param::W2, Param::w3}) {
    const auto f = [&](Tape& tape, Var v) {
      BoundParams b = bind(tape, p, false, false);
      b.vars[static_cast<std::size_t>(which)] = v;
      Var g = discriminator_input_gradient(b, tape.constant(x));
      return ad::reduce_sum(ad::elementwise_mul(g, g));
    };
    EXPECT_LT(ad::grad_check(f, p[which], 1e-5), 1e-6) << param_name(which);
  }
}

TEST(ModelFile, RoundTripBitExact) {
  testing::TempDir dir("model");
  Rng rng(11);
  const ModelParams p = ModelParams::init(small_config(), rng);
  save_model(dir / "m.bin", p);
  EXPECT_EQ(load_model(dir / "m.bin"), p);
}

TEST(ModelFile, RejectsOtherFiles) {
  testing::TempDir dir("model_bad");
  testing::spit(dir / "m.bin", "SEJEMAT2 not a checkpoint");
  EXPECT_THROW(load_model(dir / "m.bin"), ValidationError);
}

TEST(MeanOf, OrderIndependentBitForBit) {
  Rng rng(12);
  std::vector<std::vector<double>> v;
  for (int i = 0; i < 6; ++i) v.push_back(random_vec(rng, 4));
  const auto base = mean_of(v, 4);
  std::reverse(v.begin(), v.end());
  EXPECT_EQ(mean_of(v, 4), base);
  EXPECT_EQ(mean_of({}, 3), (std::vector<double>{0, 0, 0}));
}

}  // namespace
}  // namespace seje
