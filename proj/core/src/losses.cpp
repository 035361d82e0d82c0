#include "seje/losses.hpp"

#include <cmath>
#include <limits>

#include "seje/error.hpp"

namespace seje {

using ad::Tensor;
using ad::Var;

void validate(const LossWeights& w) {
  for (double v : {w.lambda1, w.lambda2, w.lambda_D, w.gamma, w.margin}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError("loss weights must be finite and >= 0");
  }
}

const char* to_string(MiningMode m) { return m == MiningMode::instance ? "instance" : "double"; }

MiningMode parse_mining_mode(const std::string& s) {
  if (s == "instance") return MiningMode::instance;
  if (s == "double") return MiningMode::double_hard;
  throw ValidationError("unknown mining mode \"" + s + "\" (expected instance or double)");
}

std::size_t mine_hard_negative(std::size_t anchor, std::span<const double> dist_row,
                               std::span<const std::size_t> categories, MiningMode mode) {
  const std::size_t n = dist_row.size();
  if (n < 2) throw BatchTooSmall(n);
  if (categories.size() != n) throw ShapeMismatch("one category per candidate required");
  if (anchor >= n) throw ShapeMismatch("anchor index out of range");

  auto argmin = [&](bool skip_same_category) {
    std::size_t best = n;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == anchor) continue;
      if (skip_same_category && categories[j] == categories[anchor]) continue;
      if (best == n || dist_row[j] < dist_row[best]) best = j;
    }
    return best;
  };
  if (mode == MiningMode::double_hard) {
    if (const std::size_t j = argmin(true); j != n) return j;
  }
  return argmin(false);
}

namespace {

std::vector<std::size_t> diagonal(std::size_t n) {
  std::vector<std::size_t> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = i;
  return d;
}

Var soft_margin(Var pos, Var neg, const LossWeights& w) {
  return ad::softplus(ad::scalar_mul(ad::add_scalar(ad::sub(pos, neg), w.margin), w.gamma));
}

Var hard_direction(Var dist, std::span<const std::size_t> categories, const LossWeights& w, MiningMode mode) {
  const Tensor& D = dist.value();
  std::vector<std::size_t> negatives(D.rows());
  for (std::size_t i = 0; i < D.rows(); ++i) negatives[i] = mine_hard_negative(i, D.row_span(i), categories, mode);
  const auto diag = diagonal(D.rows());
  return ad::reduce_sum(soft_margin(ad::gather_cols(dist, diag), ad::gather_cols(dist, negatives), w));
}

Var all_direction(Var dist, const LossWeights& w) {
  const std::size_t n = dist.rows();
  const auto diag = diagonal(n);
  Var pos_row = ad::transpose(ad::gather_cols(dist, diag));
  // shifted(j, i) = dist(i, j) - dist(i, i)
  Var shifted = ad::sub(ad::transpose(dist), pos_row);
  Var terms = ad::softplus(ad::scalar_mul(ad::add_scalar(ad::scalar_mul(shifted, -1.0), w.margin), w.gamma));
  Tensor mask(n, n, 1.0 / static_cast<double>(n - 1));
  for (std::size_t i = 0; i < n; ++i) mask(i, i) = 0.0;
  return ad::reduce_sum(ad::elementwise_mul(terms, dist.tape()->constant(std::move(mask))));
}

void check_pair_batch(Var er, Var ev) {
  if (er.shape() != ev.shape()) throw ShapeMismatch("recipe and image batches differ in shape");
  if (er.rows() < 2) throw BatchTooSmall(er.rows());
}

}  // namespace

Var triplet_loss_batch(Var er, Var ev, std::span<const std::size_t> categories, const LossWeights& w, MiningMode mode) {
  check_pair_batch(er, ev);
  if (categories.size() != er.rows()) throw ShapeMismatch("one category per pair required");
  Var d = ad::pairwise_squared_euclidean(er, ev);
  return ad::add(hard_direction(d, categories, w, mode), hard_direction(ad::transpose(d), categories, w, mode));
}

Var triplet_loss_batch_all(Var er, Var ev, const LossWeights& w) {
  check_pair_batch(er, ev);
  Var d = ad::pairwise_squared_euclidean(er, ev);
  return ad::add(all_direction(d, w), all_direction(ad::transpose(d), w));
}

CategoryLosses category_alignment_loss(Var logits_r, Var logits_v, std::span<const std::size_t> labels) {
  CategoryLosses out;
  out.recipe = ad::softmax_cross_entropy(logits_r, labels);
  out.image = ad::softmax_cross_entropy(logits_v, labels);
  out.total = ad::add(out.recipe, out.image);
  return out;
}

namespace {

// log(sigmoid(s)) with the sigmoid floored at 1e-12.
Var log_sigmoid_floored(Var s) {
  return ad::clamp_min(ad::scalar_mul(ad::softplus(ad::scalar_mul(s, -1.0)), -1.0), std::log(kLogFloor));
}

// log(1 - sigmoid(s)) with the argument floored at 1e-12.
Var log_one_minus_sigmoid_floored(Var s) {
  return ad::clamp_min(ad::scalar_mul(ad::softplus(s), -1.0), std::log(kLogFloor));
}

}  // namespace

DiscriminatorLosses discriminator_losses(const BoundParams& p, Var er, Var ev, std::span<const double> eps,
                                         const LossWeights& w) {
  if (er.shape() != ev.shape()) throw ShapeMismatch("recipe and image batches differ in shape");
  if (eps.size() != er.rows()) throw ShapeMismatch("one interpolation weight per pair required");
  ad::Tape& tape = *er.tape();
  const std::size_t n = er.rows(), d = er.cols();
  Tensor e(n, d), one_minus_e(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) {
      e(i, k) = eps[i];
      one_minus_e(i, k) = 1.0 - eps[i];
    }
  }
  Var x = ad::add(ad::elementwise_mul(er, tape.constant(std::move(e))),
                  ad::elementwise_mul(ev, tape.constant(std::move(one_minus_e))));
  Var gap = ad::add_scalar(ad::l2_norm(discriminator_input_gradient(p, x)), -1.0);

  DiscriminatorLosses out;
  out.penalty = ad::reduce_sum(ad::elementwise_mul(gap, gap));
  Var s_r = discriminator_score(p, er);
  Var s_v = discriminator_score(p, ev);
  Var log_one_minus_r = log_one_minus_sigmoid_floored(s_r);
  Var adversarial = ad::scalar_mul(ad::add(ad::reduce_sum(log_sigmoid_floored(s_v)), ad::reduce_sum(log_one_minus_r)), -1.0);
  out.discriminator = ad::add(adversarial, ad::scalar_mul(out.penalty, w.lambda_D));
  out.alignment = ad::reduce_sum(log_one_minus_r);
  return out;
}

Var discriminator_alignment_loss(const BoundParams& p, Var er) {
  return ad::reduce_sum(log_one_minus_sigmoid_floored(discriminator_score(p, er)));
}

Var total_loss(Var tri, Var ca, Var da, const LossWeights& w) {
  return ad::add(tri, ad::add(ad::scalar_mul(ca, w.lambda1), ad::scalar_mul(da, w.lambda2)));
}

double total_loss(double tri, double ca, double da, const LossWeights& w) {
  if (!std::isfinite(tri) || !std::isfinite(ca) || !std::isfinite(da)) throw NonFiniteValue("non-finite loss component");
  const double l = tri + w.lambda1 * ca + w.lambda2 * da;
  if (!std::isfinite(l)) throw NonFiniteValue("non-finite total loss");
  return l;
}

double alignment_loss_from_confidences(std::span<const double> confidences) {
  double s = 0.0;
  for (double c : confidences) s += std::log(std::max(1.0 - c, kLogFloor));
  return s;
}

}  // namespace seje
