#include "seje/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "seje/error.hpp"

namespace seje {

using ad::Tensor;
using ad::Var;

void validate(const FidelityConfig& cfg) {
  validate(cfg.embed);
  validate(cfg.weights);
  if (cfg.batch < 2) throw BatchTooSmall(cfg.batch);
  if (cfg.points == 0) throw ValidationError("need at least one parameter point");
  if (!(cfg.eps >= 1e-6 && cfg.eps <= 1e-3)) throw ValidationError("eps must lie in [1e-6, 1e-3]");
  if (!(cfg.param_scale > 0.0)) throw ValidationError("param_scale must be positive");
  if (!(cfg.kink_margin >= 0.0)) throw ValidationError("kink_margin must be >= 0");
}

namespace {

struct Point {
  ModelParams params;
  Tensor term, sentence, pixel, catfeat;
  std::vector<std::size_t> categories;
  std::vector<double> interp;
};

Tensor normal(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

Point draw(const FidelityConfig& cfg, Rng& rng) {
  const EmbedConfig& e = cfg.embed;
  Point pt{ModelParams::zeros(e), {}, {}, {}, {}, {}, {}};
  for (auto& t : pt.params.tensors) {
    for (double& v : t.data()) v = cfg.param_scale * rng.normal();
  }
  const std::size_t n = cfg.batch;
  pt.term = normal(rng, n, e.D_w, 1.0);
  pt.sentence = normal(rng, n, e.D_w, 1.0);
  pt.pixel = normal(rng, n, e.D_px, 1.0);
  pt.catfeat = normal(rng, n, e.D_w, 1.0);
  pt.categories.resize(n);
  for (auto& c : pt.categories) c = static_cast<std::size_t>(rng.below(e.n_categories));
  pt.interp.resize(n);
  for (auto& x : pt.interp) x = rng.uniform_open();
  return pt;
}

double min_abs(const Tensor& t) {
  double m = std::numeric_limits<double>::infinity();
  for (double v : t.data()) m = std::min(m, std::abs(v));
  return m;
}

// Smallest distance between the mined negative and the next eligible
// candidate, over every anchor of one direction.
double mining_gap(const Tensor& dist, std::span<const std::size_t> cats, MiningMode mode) {
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < dist.rows(); ++i) {
    const auto row = dist.row_span(i);
    const std::size_t chosen = mine_hard_negative(i, row, cats, mode);
    const bool restricted = mode == MiningMode::double_hard && cats[chosen] != cats[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j == i || j == chosen) continue;
      if (restricted && cats[j] == cats[i]) continue;
      gap = std::min(gap, std::abs(row[j] - row[chosen]));
    }
  }
  return gap;
}

bool smooth_enough(const FidelityConfig& cfg, const Point& pt) {
  ad::Tape tape;
  const BoundParams bp = bind(tape, pt.params, false, false);
  Var er = encode_recipe_batch(bp, tape.constant(pt.term), tape.constant(pt.sentence));
  Var ev = encode_image_batch(bp, tape.constant(pt.pixel), tape.constant(pt.catfeat));

  const std::size_t n = er.rows(), d = er.cols();
  Tensor x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < d; ++k) x(i, k) = pt.interp[i] * er.value()(i, k) + (1.0 - pt.interp[i]) * ev.value()(i, k);
  }
  const double margin = cfg.kink_margin;
  for (Var in : {er, ev, tape.constant(x)}) {
    Var z1 = ad::add(ad::matmul(in, bp[Param::W1]), bp[Param::b1]);
    Var z2 = ad::add(ad::matmul(ad::leaky_relu(z1, bp.leaky_slope), bp[Param::W2]), bp[Param::b2]);
    if (min_abs(z1.value()) < margin || min_abs(z2.value()) < margin) return false;
  }
  const double floor = -std::log(kLogFloor);
  for (Var in : {er, ev}) {
    for (double s : discriminator_score(bp, in).value().data()) {
      const double tail = std::log1p(std::exp(-std::abs(s)));
      if (std::abs(std::max(s, 0.0) + tail - floor) < margin) return false;
      if (std::abs(std::max(-s, 0.0) + tail - floor) < margin) return false;
    }
  }
  if (min_abs(ad::l2_norm(discriminator_input_gradient(bp, tape.constant(x))).value()) < margin) return false;

  const Var dist = ad::pairwise_squared_euclidean(er, ev);
  if (mining_gap(dist.value(), pt.categories, cfg.mining) < margin) return false;
  if (mining_gap(ad::transpose(dist).value(), pt.categories, cfg.mining) < margin) return false;
  return true;
}

Var objective(ad::Tape& tape, const BoundParams& bp, const Point& pt, const FidelityConfig& cfg, bool discriminator) {
  Var er = encode_recipe_batch(bp, tape.constant(pt.term), tape.constant(pt.sentence));
  Var ev = encode_image_batch(bp, tape.constant(pt.pixel), tape.constant(pt.catfeat));
  const DiscriminatorLosses dl = discriminator_losses(bp, er, ev, pt.interp, cfg.weights);
  if (discriminator) return dl.discriminator;
  Var tri = triplet_loss_batch(er, ev, pt.categories, cfg.weights, cfg.mining);
  const CategoryLosses ca = category_alignment_loss(classify_batch(bp, er), classify_batch(bp, ev), pt.categories);
  return total_loss(tri, ca.total, dl.alignment, cfg.weights);
}

}  // namespace

FidelityReport check_objective_gradients(const FidelityConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  FidelityReport report;
  while (report.points.size() < cfg.points) {
    const Point pt = draw(cfg, rng);
    if (!smooth_enough(cfg, pt)) {
      ++report.redraws;
      if (report.redraws > 100 * cfg.points) throw RuntimeFailure("could not draw smooth parameter points");
      continue;
    }
    FidelityPoint fp;
    for (std::size_t pi = 0; pi < kParamCount; ++pi) {
      const auto which = static_cast<Param>(pi);
      for (const bool disc : {false, true}) {
        auto f = [&](ad::Tape& tape, Var x) {
          BoundParams bp = bind(tape, pt.params, false, false);
          bp.vars[pi] = x;
          return objective(tape, bp, pt, cfg, disc);
        };
        const double err = ad::grad_check(f, pt.params[which], cfg.eps);
        double& slot = disc ? fp.discriminator : fp.total;
        if (err >= slot) {
          slot = err;
          (disc ? fp.worst_discriminator : fp.worst_total) = param_name(which);
        }
      }
    }
    report.total_max = std::max(report.total_max, fp.total);
    report.discriminator_max = std::max(report.discriminator_max, fp.discriminator);
    report.points.push_back(std::move(fp));
  }
  return report;
}

std::string fidelity_json(const FidelityReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"total", p.total},
                   {"discriminator", p.discriminator},
                   {"worst_total", p.worst_total},
                   {"worst_discriminator", p.worst_discriminator}});
  }
  return nlohmann::json{{"total_max", r.total_max},
                        {"discriminator_max", r.discriminator_max},
                        {"redraws", r.redraws},
                        {"points", pts}}
      .dump(2);
}

}  // namespace seje
