#pragma once

// Phase-II networks over engineered features.
//
// Weights are stored in x out so a batch X (N x in) maps as X * W + b with a
// 1 x out bias row.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "seje/autodiff.hpp"
#include "seje/rng.hpp"

namespace seje {

struct EmbedConfig {
  std::size_t d = 32;     // joint embedding width
  std::size_t h = 64;     // encoder hidden width
  std::size_t h_D = 32;   // discriminator hidden width
  std::size_t D_w = 64;   // word-vector width (term and sentence features)
  std::size_t D_px = 16;  // pixel feature width
  std::size_t n_categories = 10;
  double leaky_slope = 0.2;
  std::uint64_t seed = 1;

  bool operator==(const EmbedConfig&) const = default;
};

void validate(const EmbedConfig& cfg);

enum class Param : std::size_t {
  W_t, b_t, W_s, b_s, W_r, b_r,        // recipe branch
  W_p, b_p, W_c, b_c, W_v, b_v,        // image branch
  W_cls, b_cls,                        // shared classifier head
  W1, b1, W2, b2, w3, b3,              // discriminator
  count
};
inline constexpr std::size_t kParamCount = static_cast<std::size_t>(Param::count);

const char* param_name(Param p);
bool is_discriminator(Param p);

struct ModelParams {
  EmbedConfig config;
  std::array<ad::Tensor, kParamCount> tensors;

  ad::Tensor& operator[](Param p) { return tensors[static_cast<std::size_t>(p)]; }
  const ad::Tensor& operator[](Param p) const { return tensors[static_cast<std::size_t>(p)]; }

  bool operator==(const ModelParams&) const = default;

  // Glorot-uniform weights, zero biases.
  static ModelParams init(const EmbedConfig& cfg, Rng& rng);
  static ModelParams zeros(const EmbedConfig& cfg);
};

// Parameters placed on a tape. Partitions that are not trainable are
// recorded as constants so no gradient reaches them.
struct BoundParams {
  std::array<ad::Var, kParamCount> vars;
  double leaky_slope = 0.2;

  ad::Var operator[](Param p) const { return vars[static_cast<std::size_t>(p)]; }
};

BoundParams bind(ad::Tape& tape, const ModelParams& p, bool encoders_trainable, bool discriminator_trainable);

// Batch forms (one example per row).
ad::Var encode_recipe_batch(const BoundParams& p, ad::Var f_term, ad::Var sentence_mean);
ad::Var encode_image_batch(const BoundParams& p, ad::Var f_pixel, ad::Var f_cat);
ad::Var classify_batch(const BoundParams& p, ad::Var embeddings);
// Pre-sigmoid discriminator score, N x 1.
ad::Var discriminator_score(const BoundParams& p, ad::Var x);
// d score / d x per row (N x d), built from first-order ops so it stays
// differentiable with respect to the discriminator weights.
ad::Var discriminator_input_gradient(const BoundParams& p, ad::Var x);

// Mean of the sentence vectors, zero vector when there are none. Summation
// runs in sorted vector order, so the result does not depend on the order of
// the sentences.
std::vector<double> mean_of(std::vector<std::vector<double>> vectors, std::size_t dim);

// Single-example forms.
std::vector<double> encode_recipe(const ModelParams& p, std::span<const double> f_term,
                                  const std::vector<std::vector<double>>& sentence_vectors);
std::vector<double> encode_image(const ModelParams& p, std::span<const double> f_pixel, std::span<const double> f_cat);
std::vector<double> classify(const ModelParams& p, std::span<const double> embedding);

struct Discrimination {
  double score = 0.0;
  double confidence = 0.5;
  std::vector<double> input_gradient;
};
Discrimination discriminate(const ModelParams& p, std::span<const double> embedding);

// Parameter file: "SEJECKPT", u32 LE header length, JSON header, then one
// f64 matrix per tensor in the features.bin layout.
void write_tensor_file(const std::filesystem::path& path, const std::string& header_json,
                       std::span<const ad::Tensor* const> tensors);
struct TensorFile {
  std::string header_json;
  std::vector<ad::Tensor> tensors;
};
TensorFile read_tensor_file(const std::filesystem::path& path);

std::string to_json(const EmbedConfig& cfg);
EmbedConfig embed_config_from_json(const std::string& json);

void save_model(const std::filesystem::path& path, const ModelParams& p);
ModelParams load_model(const std::filesystem::path& path);

}  // namespace seje
