#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "seje/autodiff.hpp"
#include "seje/losses.hpp"
#include "seje/model.hpp"

namespace seje {

enum class TripletVariant { batch_hard, batch_all };
const char* to_string(TripletVariant v);
TripletVariant parse_triplet_variant(const std::string& s);  // "hard" | "all"

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::uint64_t seed = 1;
  std::size_t disc_steps = 1;  // discriminator updates per encoder update
  LossWeights weights;
  MiningMode mining = MiningMode::double_hard;
  TripletVariant triplet = TripletVariant::batch_hard;
  EmbedConfig embed;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& cfg);
std::string to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const std::string& json);

// One preprocessed recipe-image pair.
struct PairExample {
  std::string pair_id;
  std::vector<double> term_feature;     // D_w
  std::vector<double> sentence_mean;    // D_w
  std::vector<double> pixel;            // D_px
  std::vector<double> category_feature; // D_w
  std::size_t category = 0;

  bool operator==(const PairExample&) const = default;
};

// Index batches for one epoch. Throws DatasetTooSmall.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> categories, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch);

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::uint64_t t = 0;

  bool operator==(const AdamState&) const = default;
  static AdamState zeros_like(std::span<const ad::Tensor* const> params);
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor> grads, AdamState& state, double lr);

struct EpochLosses {
  std::size_t epoch = 0;
  double tri = 0.0;
  double ca_r = 0.0;
  double ca_v = 0.0;
  double da = 0.0;
  double d = 0.0;
  double penalty = 0.0;

  bool operator==(const EpochLosses&) const = default;
};

struct Checkpoint {
  TrainConfig config;
  ModelParams params;
  AdamState encoder_opt;
  AdamState discriminator_opt;
  std::size_t epoch = 0;  // completed epochs
  std::string rng_state;
  std::vector<EpochLosses> trace;

  bool operator==(const Checkpoint&) const = default;
};

std::vector<ad::Tensor*> encoder_tensors(ModelParams& p);
std::vector<ad::Tensor*> discriminator_tensors(ModelParams& p);

// Fresh parameters and optimizer state; nothing trained yet.
Checkpoint start_training(const TrainConfig& cfg);

using EpochCallback = std::function<void(const Checkpoint&)>;

// Continues training until `until_epoch` epochs are complete (capped at
// config.epochs). Per-epoch trace entries are batch means.
void train_until(Checkpoint& ckpt, std::span<const PairExample> data, std::size_t until_epoch,
                 const EpochCallback& on_epoch = {});

Checkpoint train(std::span<const PairExample> data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_trace_csv(const std::filesystem::path& path, std::span<const EpochLosses> trace);

struct EmbeddedPairs {
  std::vector<std::vector<double>> recipe;
  std::vector<std::vector<double>> image;
};
EmbeddedPairs embed_pairs(const ModelParams& p, std::span<const PairExample> data);

}  // namespace seje
