#include <set>

#include <gtest/gtest.h>

#include "seje/error.hpp"
#include "seje/pipeline.hpp"
#include "seje/trainer.hpp"
#include "support.hpp"

namespace seje {
namespace {

using ad::Tensor;

TEST(MakeBatches, DropsRemainder) {
  std::vector<std::size_t> cats(100);
  for (std::size_t i = 0; i < 100; ++i) cats[i] = i % 7;
  const auto b = make_batches(cats, 32, 1, 0);
  ASSERT_EQ(b.size(), 3u);
  std::set<std::size_t> seen;
  for (const auto& batch : b) {
    EXPECT_EQ(batch.size(), 32u);
    seen.insert(batch.begin(), batch.end());
  }
  EXPECT_EQ(seen.size(), 96u);
}

TEST(MakeBatches, DeterministicPerSeedAndEpoch) {
  std::vector<std::size_t> cats(50);
  for (std::size_t i = 0; i < 50; ++i) cats[i] = i % 3;
  EXPECT_EQ(make_batches(cats, 8, 4, 2), make_batches(cats, 8, 4, 2));
  EXPECT_NE(make_batches(cats, 8, 4, 2), make_batches(cats, 8, 4, 3));
  EXPECT_NE(make_batches(cats, 8, 4, 2), make_batches(cats, 8, 5, 2));
}

TEST(MakeBatches, EveryBatchMixesCategories) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 4 + rng.below(120);
    const std::size_t batch = 2 + rng.below(std::min<std::size_t>(n - 1, 32));
    std::vector<std::size_t> cats(n, 0);
    // Mostly one category, so uniform shuffles often produce pure batches.
    const std::size_t minority = 1 + rng.below(std::max<std::size_t>(1, n / 4));
    for (std::size_t k = 0; k < minority; ++k) cats[rng.below(n)] = 1 + rng.below(3);
    if (std::set<std::size_t>(cats.begin(), cats.end()).size() < 2) cats[0] = 1;
    const auto batches = make_batches(cats, batch, trial, 0);
    // Mixing every batch needs at least one minority item per batch.
    std::size_t others = 0;
    for (std::size_t c : cats) others += c != 0;
    if (others < batches.size()) continue;
    for (const auto& b : batches) {
      std::set<std::size_t> in;
      for (std::size_t i : b) in.insert(cats[i]);
      EXPECT_GE(in.size(), 2u) << "trial " << trial;
    }
  }
}

TEST(MakeBatches, Errors) {
  const std::vector<std::size_t> cats{0, 1, 0};
  EXPECT_THROW(make_batches(cats, 4, 1, 0), DatasetTooSmall);
  EXPECT_THROW(make_batches(cats, 1, 1, 0), BatchTooSmall);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p(2, 2, {1, 2, 3, 4});
  const Tensor before = p;
  std::vector<Tensor*> params{&p};
  AdamState s;
  const std::vector<Tensor> g{Tensor(2, 2)};
  adam_step(params, g, s, 1e-3);
  EXPECT_EQ(p, before);
  EXPECT_EQ(s.t, 1u);
}

TEST(Adam, FirstStepIsLearningRate) {
  Tensor p = Tensor::scalar(0.0);
  std::vector<Tensor*> params{&p};
  AdamState s;
  const std::vector<Tensor> g{Tensor::scalar(1.0)};
  adam_step(params, g, s, 1e-3);
  // Bias correction cancels the moment decay, leaving lr / (1 + eps).
  EXPECT_NEAR(p.item(), -1e-3 / (1.0 + kAdamEps), 1e-18);
}

TEST(Adam, ConstantGradientStepsStayBounded) {
  Tensor p = Tensor::scalar(0.0);
  std::vector<Tensor*> params{&p};
  AdamState s;
  const std::vector<Tensor> g{Tensor::scalar(3.7)};
  const double lr = 1e-2;
  for (int i = 0; i < 1000; ++i) {
    const double before = p.item();
    adam_step(params, g, s, lr);
    EXPECT_LE(std::abs(p.item() - before), 10 * lr);
  }
}

TEST(Adam, RejectsNonFiniteGradients) {
  Tensor p = Tensor::scalar(0.0);
  std::vector<Tensor*> params{&p};
  AdamState s;
  const std::vector<Tensor> g{Tensor::scalar(NAN)};
  EXPECT_THROW(adam_step(params, g, s, 1e-3), NonFiniteValue);
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  TrainConfig c;
  c.epochs = 7;
  c.mining = MiningMode::instance;
  c.triplet = TripletVariant::batch_all;
  c.weights.margin = 0.25;
  c.embed.d = 16;
  EXPECT_EQ(train_config_from_json(to_json(c)), c);
  EXPECT_EQ(train_config_from_json("{}"), TrainConfig{});
  EXPECT_THROW(train_config_from_json(R"({"epoch": 3})"), ValidationError);
}

class SmallTraining : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticSpec spec;
    spec.n_pairs = 200;
    spec.n_categories = 10;
    spec.n_test = 60;
    spec.seed = 1;
    PipelineConfig pc;
    pc.cbow.dim = 32;
    pc.cbow.epochs = 3;
    prepared_ = new PreparedCorpus(prepare_synthetic(generate_synthetic(spec), pc));
  }
  static void TearDownTestSuite() { delete prepared_; }

  static TrainConfig config(std::size_t epochs) {
    TrainConfig c;
    c.epochs = epochs;
    c.batch_size = 16;
    c.embed.d = 16;
    c.embed.h = 32;
    c.embed.h_D = 16;
    c.embed.D_w = prepared_->data.train.front().term_feature.size();
    c.embed.D_px = prepared_->data.train.front().pixel.size();
    c.embed.n_categories = prepared_->data.n_categories;
    return c;
  }
  static const std::vector<PairExample>& pairs() { return prepared_->data.train; }

  static PreparedCorpus* prepared_;
};

PreparedCorpus* SmallTraining::prepared_ = nullptr;

TEST_F(SmallTraining, TripletLossDecreases) {
  const Checkpoint ck = train(pairs(), config(30));
  ASSERT_EQ(ck.trace.size(), 30u);
  EXPECT_LT(ck.trace.back().tri, ck.trace.front().tri);
  EXPECT_EQ(ck.epoch, 30u);
}

TEST_F(SmallTraining, IdenticalConfigsIdenticalCheckpoints) {
  testing::TempDir dir("ckpt");
  const Checkpoint a = train(pairs(), config(3));
  const Checkpoint b = train(pairs(), config(3));
  EXPECT_EQ(a, b);
  save_checkpoint(dir / "a.bin", a);
  save_checkpoint(dir / "b.bin", b);
  EXPECT_EQ(testing::slurp(dir / "a.bin"), testing::slurp(dir / "b.bin"));
  EXPECT_EQ(load_checkpoint(dir / "a.bin"), a);
}

TEST_F(SmallTraining, ResumeEqualsUninterrupted) {
  testing::TempDir dir("resume");
  const Checkpoint full = train(pairs(), config(4));
  Checkpoint part = start_training(config(4));
  train_until(part, pairs(), 2);
  save_checkpoint(dir / "mid.bin", part);
  Checkpoint resumed = load_checkpoint(dir / "mid.bin");
  train_until(resumed, pairs(), 4);
  EXPECT_EQ(resumed, full);
}

TEST_F(SmallTraining, NoAuxiliaryLossesReducesToTripletOnly) {
  TrainConfig a = config(3);
  a.weights.lambda1 = a.weights.lambda2 = 0.0;
  a.disc_steps = 0;
  TrainConfig b = a;
  b.weights.lambda_D = 3.0;
  const Checkpoint ca = train(pairs(), a), cb = train(pairs(), b);
  for (std::size_t e = 0; e < 3; ++e) EXPECT_EQ(ca.trace[e].tri, cb.trace[e].tri);
  ModelParams pa = ca.params, pb = cb.params;
  const auto ta = encoder_tensors(pa), tb = encoder_tensors(pb);
  for (std::size_t i = 0; i < ta.size(); ++i) EXPECT_EQ(*ta[i], *tb[i]);
}

TEST_F(SmallTraining, DatasetSmallerThanBatch) {
  TrainConfig c = config(1);
  c.batch_size = pairs().size() + 1;
  EXPECT_THROW(train(pairs(), c), DatasetTooSmall);
}

TEST_F(SmallTraining, TraceCsv) {
  testing::TempDir dir("trace");
  const Checkpoint ck = train(pairs(), config(2));
  write_trace_csv(dir / "t.csv", ck.trace);
  const std::string csv = testing::slurp(dir / "t.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  EXPECT_EQ(csv.rfind("epoch,", 0), 0u);
}

}  // namespace
}  // namespace seje
