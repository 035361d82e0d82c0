#include "seje/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "seje/error.hpp"
#include "seje/rng.hpp"

namespace seje {

using ad::Tensor;
using ad::Var;
using nlohmann::json;

const char* to_string(TripletVariant v) { return v == TripletVariant::batch_hard ? "hard" : "all"; }

TripletVariant parse_triplet_variant(const std::string& s) {
  if (s == "hard") return TripletVariant::batch_hard;
  if (s == "all") return TripletVariant::batch_all;
  throw ValidationError("unknown triplet variant \"" + s + "\" (expected hard or all)");
}

void validate(const TrainConfig& cfg) {
  if (cfg.batch_size < 2) throw ValidationError("batch_size must be at least 2");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) throw ValidationError("lr must be positive");
  validate(cfg.weights);
  validate(cfg.embed);
}

// ---- config JSON ----------------------------------------------------------

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ValidationError("unknown key \"" + key + "\" in " + where);
    }
  }
}

json config_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"lr", c.lr},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"disc_steps", c.disc_steps},
          {"mining", to_string(c.mining)},
          {"triplet", to_string(c.triplet)},
          {"weights",
           {{"lambda1", c.weights.lambda1},
            {"lambda2", c.weights.lambda2},
            {"lambda_D", c.weights.lambda_D},
            {"gamma", c.weights.gamma},
            {"margin", c.weights.margin}}},
          {"embed", json::parse(to_json(c.embed))}};
}

TrainConfig config_from(const json& j) {
  reject_unknown(j, {"batch_size", "lr", "epochs", "seed", "disc_steps", "mining", "triplet", "weights", "embed"},
                 "train config");
  TrainConfig c;
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.seed = j.value("seed", c.seed);
  c.disc_steps = j.value("disc_steps", c.disc_steps);
  if (j.contains("mining")) c.mining = parse_mining_mode(j.at("mining").get<std::string>());
  if (j.contains("triplet")) c.triplet = parse_triplet_variant(j.at("triplet").get<std::string>());
  if (j.contains("weights")) {
    const json& w = j.at("weights");
    reject_unknown(w, {"lambda1", "lambda2", "lambda_D", "gamma", "margin"}, "weights");
    c.weights.lambda1 = w.value("lambda1", c.weights.lambda1);
    c.weights.lambda2 = w.value("lambda2", c.weights.lambda2);
    c.weights.lambda_D = w.value("lambda_D", c.weights.lambda_D);
    c.weights.gamma = w.value("gamma", c.weights.gamma);
    c.weights.margin = w.value("margin", c.weights.margin);
  }
  if (j.contains("embed")) {
    reject_unknown(j.at("embed"), {"d", "h", "h_D", "D_w", "D_px", "n_categories", "leaky_slope", "seed"}, "embed");
    c.embed = embed_config_from_json(j.at("embed").dump());
  }
  c.embed.seed = c.seed;
  validate(c);
  return c;
}

}  // namespace

std::string to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2); }

TrainConfig train_config_from_json(const std::string& text) {
  try {
    return config_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad train config: ") + e.what());
  }
}

// ---- batching -------------------------------------------------------------

std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> categories, std::size_t batch_size,
                                                   std::uint64_t seed, std::size_t epoch) {
  const std::size_t n = categories.size();
  if (batch_size < 2) throw BatchTooSmall(batch_size);
  if (n < batch_size) throw DatasetTooSmall(n, batch_size);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(order);

  const std::size_t n_batches = n / batch_size;
  auto batch_of = [&](std::size_t pos) { return pos / batch_size; };
  auto single_category = [&](std::size_t b) {
    const std::size_t c0 = categories[order[b * batch_size]];
    for (std::size_t k = 1; k < batch_size; ++k) {
      if (categories[order[b * batch_size + k]] != c0) return false;
    }
    return true;
  };
  const bool varied = std::set<std::size_t>(categories.begin(), categories.end()).size() >= 2;
  for (std::size_t b = 0; varied && b < n_batches; ++b) {
    if (!single_category(b)) continue;
    const std::size_t c = categories[order[b * batch_size]];
    for (std::size_t pos = 0; pos < n; ++pos) {
      const std::size_t src = batch_of(pos);
      if (src == b || categories[order[pos]] == c) continue;
      std::swap(order[pos], order[b * batch_size]);
      if (src < n_batches && single_category(src)) {
        std::swap(order[pos], order[b * batch_size]);
        continue;
      }
      break;
    }
  }

  std::vector<std::vector<std::size_t>> batches(n_batches);
  for (std::size_t b = 0; b < n_batches; ++b) {
    batches[b].assign(order.begin() + static_cast<std::ptrdiff_t>(b * batch_size),
                      order.begin() + static_cast<std::ptrdiff_t>((b + 1) * batch_size));
  }
  return batches;
}

// ---- Adam -----------------------------------------------------------------

AdamState AdamState::zeros_like(std::span<const Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->rows(), p->cols());
    s.v.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state, double lr) {
  if (grads.size() != params.size()) throw ShapeMismatch("adam_step: one gradient per parameter required");
  if (state.m.empty()) state = AdamState::zeros_like(params);
  if (state.m.size() != params.size()) throw ShapeMismatch("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->shape() || state.m[i].shape() != params[i]->shape()) {
      throw ShapeMismatch("adam_step: gradient shape differs from parameter shape");
    }
    if (!grads[i].all_finite()) throw NonFiniteValue("adam_step: non-finite gradient");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    Tensor& m = state.m[i];
    Tensor& v = state.v[i];
    const Tensor& g = grads[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = kAdamBeta1 * m[k] + (1.0 - kAdamBeta1) * g[k];
      v[k] = kAdamBeta2 * v[k] + (1.0 - kAdamBeta2) * g[k] * g[k];
      p[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + kAdamEps);
    }
  }
}

// ---- training -------------------------------------------------------------

namespace {

std::vector<Param> partition(bool discriminator) {
  std::vector<Param> out;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (is_discriminator(static_cast<Param>(i)) == discriminator) out.push_back(static_cast<Param>(i));
  }
  return out;
}

std::vector<Tensor*> tensors_of(ModelParams& p, bool discriminator) {
  std::vector<Tensor*> out;
  for (Param q : partition(discriminator)) out.push_back(&p[q]);
  return out;
}

Tensor gather(std::span<const PairExample> data, std::span<const std::size_t> idx,
              const std::vector<double> PairExample::*field, std::size_t width) {
  Tensor t(idx.size(), width);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& v = data[idx[r]].*field;
    if (v.size() != width) throw ShapeMismatch("example " + data[idx[r]].pair_id + " has a feature of the wrong width");
    std::copy(v.begin(), v.end(), t.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return t;
}

struct BatchInputs {
  Tensor term, sent, pixel, cat;
  std::vector<std::size_t> labels;
};

BatchInputs batch_inputs(std::span<const PairExample> data, std::span<const std::size_t> idx, const EmbedConfig& e) {
  BatchInputs b{gather(data, idx, &PairExample::term_feature, e.D_w), gather(data, idx, &PairExample::sentence_mean, e.D_w),
                gather(data, idx, &PairExample::pixel, e.D_px), gather(data, idx, &PairExample::category_feature, e.D_w),
                {}};
  for (std::size_t i : idx) {
    if (data[i].category >= e.n_categories) throw LabelOutOfRange(static_cast<long>(data[i].category), e.n_categories);
    b.labels.push_back(data[i].category);
  }
  return b;
}

struct Encoded {
  Var er, ev;
};

Encoded encode(ad::Tape& tape, const BoundParams& bp, const BatchInputs& in) {
  return {encode_recipe_batch(bp, tape.constant(in.term), tape.constant(in.sent)),
          encode_image_batch(bp, tape.constant(in.pixel), tape.constant(in.cat))};
}

std::vector<Tensor> grads_of(const BoundParams& bp, const std::vector<Param>& which) {
  std::vector<Tensor> g;
  g.reserve(which.size());
  for (Param q : which) g.push_back(bp[q].grad());
  return g;
}

struct StepLosses {
  double tri = 0, ca_r = 0, ca_v = 0, da = 0, d = 0, penalty = 0;
};

}  // namespace

std::vector<Tensor*> encoder_tensors(ModelParams& p) { return tensors_of(p, false); }
std::vector<Tensor*> discriminator_tensors(ModelParams& p) { return tensors_of(p, true); }

Checkpoint start_training(const TrainConfig& cfg) {
  validate(cfg);
  Checkpoint c;
  c.config = cfg;
  Rng rng(cfg.seed);
  c.params = ModelParams::init(cfg.embed, rng);
  c.encoder_opt = AdamState::zeros_like(encoder_tensors(c.params));
  c.discriminator_opt = AdamState::zeros_like(discriminator_tensors(c.params));
  c.rng_state = rng.state();
  return c;
}

void train_until(Checkpoint& ckpt, std::span<const PairExample> data, std::size_t until_epoch,
                 const EpochCallback& on_epoch) {
  const TrainConfig& cfg = ckpt.config;
  validate(cfg);
  until_epoch = std::min(until_epoch, cfg.epochs);
  std::vector<std::size_t> categories;
  categories.reserve(data.size());
  for (const auto& ex : data) categories.push_back(ex.category);
  if (data.size() < cfg.batch_size) throw DatasetTooSmall(data.size(), cfg.batch_size);

  Rng rng;
  rng.restore(ckpt.rng_state);
  const std::vector<Param> enc_params = partition(false);
  const std::vector<Param> disc_params = partition(true);
  const std::vector<Tensor*> enc_tensors = encoder_tensors(ckpt.params);
  const std::vector<Tensor*> disc_tensors = discriminator_tensors(ckpt.params);

  while (ckpt.epoch < until_epoch) {
    const auto batches = make_batches(categories, cfg.batch_size, cfg.seed, ckpt.epoch);
    StepLosses sum;
    std::size_t disc_updates = 0;
    for (const auto& idx : batches) {
      const BatchInputs in = batch_inputs(data, idx, cfg.embed);

      if (cfg.disc_steps > 0) {
        Tensor er_value, ev_value;
        {
          ad::Tape tape;
          const BoundParams bp = bind(tape, ckpt.params, false, false);
          const Encoded e = encode(tape, bp, in);
          er_value = e.er.value();
          ev_value = e.ev.value();
        }
        for (std::size_t s = 0; s < cfg.disc_steps; ++s) {
          std::vector<double> eps(idx.size());
          for (double& x : eps) x = rng.uniform_open();
          ad::Tape tape;
          const BoundParams bp = bind(tape, ckpt.params, false, true);
          const DiscriminatorLosses dl =
              discriminator_losses(bp, tape.constant(er_value), tape.constant(ev_value), eps, cfg.weights);
          tape.backward(dl.discriminator);
          adam_step(disc_tensors, grads_of(bp, disc_params), ckpt.discriminator_opt, cfg.lr);
          sum.d += dl.discriminator.value().item();
          sum.penalty += dl.penalty.value().item();
          ++disc_updates;
        }
      }

      ad::Tape tape;
      const BoundParams bp = bind(tape, ckpt.params, true, false);
      const Encoded e = encode(tape, bp, in);
      const Var tri = cfg.triplet == TripletVariant::batch_hard
                          ? triplet_loss_batch(e.er, e.ev, in.labels, cfg.weights, cfg.mining)
                          : triplet_loss_batch_all(e.er, e.ev, cfg.weights);
      const CategoryLosses ca = category_alignment_loss(classify_batch(bp, e.er), classify_batch(bp, e.ev), in.labels);
      const Var da = discriminator_alignment_loss(bp, e.er);
      const Var total = total_loss(tri, ca.total, da, cfg.weights);
      total_loss(tri.value().item(), ca.total.value().item(), da.value().item(), cfg.weights);
      tape.backward(total);
      adam_step(enc_tensors, grads_of(bp, enc_params), ckpt.encoder_opt, cfg.lr);
      sum.tri += tri.value().item();
      sum.ca_r += ca.recipe.value().item();
      sum.ca_v += ca.image.value().item();
      sum.da += da.value().item();
    }

    const double nb = static_cast<double>(batches.size());
    const double nd = disc_updates > 0 ? static_cast<double>(disc_updates) : 1.0;
    ckpt.trace.push_back({ckpt.epoch + 1, sum.tri / nb, sum.ca_r / nb, sum.ca_v / nb, sum.da / nb, sum.d / nd,
                          sum.penalty / nd});
    ++ckpt.epoch;
    ckpt.rng_state = rng.state();
    if (on_epoch) on_epoch(ckpt);
  }
}

Checkpoint train(std::span<const PairExample> data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  Checkpoint c = start_training(cfg);
  train_until(c, data, cfg.epochs, on_epoch);
  return c;
}

// ---- files ----------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  json trace = json::array();
  for (const auto& e : c.trace) {
    trace.push_back({e.epoch, e.tri, e.ca_r, e.ca_v, e.da, e.d, e.penalty});
  }
  const json header = {{"kind", "checkpoint"},
                       {"config", config_json(c.config)},
                       {"epoch", c.epoch},
                       {"rng_state", c.rng_state},
                       {"encoder_t", c.encoder_opt.t},
                       {"discriminator_t", c.discriminator_opt.t},
                       {"trace", trace}};
  std::vector<const Tensor*> ts;
  for (const auto& t : c.params.tensors) ts.push_back(&t);
  for (const AdamState* s : {&c.encoder_opt, &c.discriminator_opt}) {
    for (const auto& t : s->m) ts.push_back(&t);
    for (const auto& t : s->v) ts.push_back(&t);
  }
  write_tensor_file(path, header.dump(), ts);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  TensorFile f = read_tensor_file(path);
  Checkpoint c;
  try {
    const json h = json::parse(f.header_json);
    if (h.value("kind", "") != "checkpoint") throw ValidationError(path.string() + ": not a training checkpoint");
    c = start_training(config_from(h.at("config")));
    c.epoch = h.at("epoch").get<std::size_t>();
    c.rng_state = h.at("rng_state").get<std::string>();
    c.encoder_opt.t = h.at("encoder_t").get<std::uint64_t>();
    c.discriminator_opt.t = h.at("discriminator_t").get<std::uint64_t>();
    for (const auto& e : h.at("trace")) {
      c.trace.push_back({e.at(0).get<std::size_t>(), e.at(1).get<double>(), e.at(2).get<double>(),
                         e.at(3).get<double>(), e.at(4).get<double>(), e.at(5).get<double>(), e.at(6).get<double>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": bad checkpoint header: " + e.what());
  }
  std::vector<Tensor*> slots;
  for (auto& t : c.params.tensors) slots.push_back(&t);
  for (AdamState* s : {&c.encoder_opt, &c.discriminator_opt}) {
    for (auto& t : s->m) slots.push_back(&t);
    for (auto& t : s->v) slots.push_back(&t);
  }
  if (f.tensors.size() != slots.size()) throw DimensionMismatch(path.string() + ": wrong number of tensors");
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (f.tensors[i].shape() != slots[i]->shape()) throw DimensionMismatch(path.string() + ": tensor shape mismatch");
    *slots[i] = std::move(f.tensors[i]);
  }
  return c;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const EpochLosses> trace) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(17);
  out << "epoch,L_TRI,L_CA_R,L_CA_V,L_DA,L_D,penalty\n";
  for (const auto& e : trace) {
    out << e.epoch << ',' << e.tri << ',' << e.ca_r << ',' << e.ca_v << ',' << e.da << ',' << e.d << ',' << e.penalty
        << '\n';
  }
}

EmbeddedPairs embed_pairs(const ModelParams& p, std::span<const PairExample> data) {
  EmbeddedPairs out;
  if (data.empty()) return out;
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  const BatchInputs in = batch_inputs(data, idx, p.config);
  ad::Tape tape;
  const BoundParams bp = bind(tape, p, false, false);
  const Encoded e = encode(tape, bp, in);
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.recipe.push_back(e.er.value().row_vector(i));
    out.image.push_back(e.ev.value().row_vector(i));
  }
  return out;
}

}  // namespace seje
