#include <benchmark/benchmark.h>

#include "seje/losses.hpp"
#include "seje/model.hpp"
#include "seje/rng.hpp"

namespace {

using seje::ad::Tape;
using seje::ad::Tensor;

Tensor random_tensor(seje::Rng& rng, std::size_t r, std::size_t c) {
  Tensor t(r, c);
  for (double& v : t.data()) v = rng.normal();
  return t;
}

void BM_MineHardNegative(benchmark::State& state) {
  seje::Rng rng(1);
  const std::size_t n = state.range(0);
  std::vector<double> row(n);
  std::vector<std::size_t> cats(n);
  for (std::size_t i = 0; i < n; ++i) {
    row[i] = rng.uniform();
    cats[i] = rng.below(10);
  }
  for (auto _ : state) {
    for (std::size_t a = 0; a < n; ++a) {
      benchmark::DoNotOptimize(seje::mine_hard_negative(a, row, cats, seje::MiningMode::double_hard));
    }
  }
}
BENCHMARK(BM_MineHardNegative)->Arg(32)->Arg(128);

// Forward and backward pass of the encoder objective on one batch.
void BM_EncoderStep(benchmark::State& state) {
  seje::EmbedConfig cfg;
  cfg.d = state.range(0);
  seje::Rng rng(2);
  const seje::ModelParams params = seje::ModelParams::init(cfg, rng);
  const std::size_t n = 32;
  const Tensor term = random_tensor(rng, n, cfg.D_w), sent = random_tensor(rng, n, cfg.D_w);
  const Tensor px = random_tensor(rng, n, cfg.D_px), cat = random_tensor(rng, n, cfg.D_w);
  std::vector<std::size_t> labels(n);
  for (auto& l : labels) l = rng.below(cfg.n_categories);
  const seje::LossWeights w;
  for (auto _ : state) {
    Tape tape;
    const seje::BoundParams b = seje::bind(tape, params, true, false);
    auto er = seje::encode_recipe_batch(b, tape.constant(term), tape.constant(sent));
    auto ev = seje::encode_image_batch(b, tape.constant(px), tape.constant(cat));
    auto tri = seje::triplet_loss_batch(er, ev, labels, w, seje::MiningMode::double_hard);
    auto ca = seje::category_alignment_loss(seje::classify_batch(b, er), seje::classify_batch(b, ev), labels);
    auto da = seje::discriminator_alignment_loss(b, er);
    auto loss = seje::total_loss(tri, ca.total, da, w);
    tape.backward(loss);
    benchmark::DoNotOptimize(loss.value().item());
  }
}
BENCHMARK(BM_EncoderStep)->Arg(16)->Arg(32)->Arg(64);

}  // namespace
