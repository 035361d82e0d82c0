#pragma once

#include <span>
#include <string>
#include <vector>

#include "seje/autodiff.hpp"
#include "seje/model.hpp"

namespace seje {

struct LossWeights {
  double lambda1 = 0.005;  // category alignment
  double lambda2 = 0.005;  // discriminator alignment
  double lambda_D = 10.0;  // gradient penalty
  double gamma = 1.0;
  double margin = 0.3;

  bool operator==(const LossWeights&) const = default;
};

void validate(const LossWeights& w);

enum class MiningMode { instance, double_hard };
const char* to_string(MiningMode m);
MiningMode parse_mining_mode(const std::string& s);  // "instance" | "double"

// Index of the hardest negative for `anchor` given its distances to every
// candidate. Double mode skips candidates sharing the anchor's category and
// falls back to instance mode when none remain. Ties go to the lowest index.
std::size_t mine_hard_negative(std::size_t anchor, std::span<const double> dist_row,
                               std::span<const std::size_t> categories, MiningMode mode);

// Soft-margin batch-hard triplet loss summed over both retrieval directions,
// with squared Euclidean distances. Rows of er and ev are matched pairs.
ad::Var triplet_loss_batch(ad::Var er, ad::Var ev, std::span<const std::size_t> categories, const LossWeights& w,
                           MiningMode mode);

// Baseline without mining: per anchor, the mean soft-margin term over all
// other candidates, summed over anchors and both directions.
ad::Var triplet_loss_batch_all(ad::Var er, ad::Var ev, const LossWeights& w);

struct CategoryLosses {
  ad::Var recipe;
  ad::Var image;
  ad::Var total;
};
CategoryLosses category_alignment_loss(ad::Var logits_r, ad::Var logits_v, std::span<const std::size_t> labels);

inline constexpr double kLogFloor = 1e-12;

struct DiscriminatorLosses {
  ad::Var discriminator;  // L_D including lambda_D * penalty
  ad::Var alignment;      // L_DA
  ad::Var penalty;
};

// eps holds one interpolation weight in (0, 1) per row.
DiscriminatorLosses discriminator_losses(const BoundParams& p, ad::Var er, ad::Var ev, std::span<const double> eps,
                                         const LossWeights& w);

// L_DA alone, for the encoder step.
ad::Var discriminator_alignment_loss(const BoundParams& p, ad::Var er);

ad::Var total_loss(ad::Var tri, ad::Var ca, ad::Var da, const LossWeights& w);
double total_loss(double tri, double ca, double da, const LossWeights& w);

// Sum of log(1 - c) over recipe confidences, each argument floored at 1e-12.
double alignment_loss_from_confidences(std::span<const double> confidences);

}  // namespace seje
