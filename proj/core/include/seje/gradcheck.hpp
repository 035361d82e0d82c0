#pragma once

// Finite-difference audit of the training objectives at random parameter
// points: the encoder objective L and the discriminator loss L_D (with its
// gradient penalty), each checked against every parameter tensor.

#include <cstdint>
#include <string>
#include <vector>

#include "seje/losses.hpp"
#include "seje/model.hpp"

namespace seje {

struct FidelityConfig {
  EmbedConfig embed{.d = 16, .h = 16, .h_D = 16, .D_w = 8, .D_px = 8, .n_categories = 3};
  std::size_t batch = 8;
  std::size_t points = 50;
  double eps = 1e-4;
  // Parameters are drawn N(0, param_scale^2); features N(0, 1).
  double param_scale = 0.3;
  // Points where a leaky-ReLU input, a mining decision, the log floor or the
  // penalty norm lies within this distance of its switch are redrawn.
  double kink_margin = 1e-3;
  std::uint64_t seed = 1;
  LossWeights weights;
  MiningMode mining = MiningMode::double_hard;
};

void validate(const FidelityConfig& cfg);

struct FidelityPoint {
  double total = 0.0;          // max relative error of dL/dtheta
  double discriminator = 0.0;  // max relative error of dL_D/dtheta
  std::string worst_total;     // parameter name
  std::string worst_discriminator;
};

struct FidelityReport {
  std::vector<FidelityPoint> points;
  double total_max = 0.0;
  double discriminator_max = 0.0;
  std::size_t redraws = 0;
};

FidelityReport check_objective_gradients(const FidelityConfig& cfg);

std::string fidelity_json(const FidelityReport& r);

}  // namespace seje
