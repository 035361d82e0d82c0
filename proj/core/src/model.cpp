#include "seje/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "seje/error.hpp"
#include "seje/matrix_io.hpp"

namespace seje {

using ad::Tensor;
using ad::Var;

void validate(const EmbedConfig& cfg) {
  if (cfg.d < 2) throw ValidationError("embedding width d must be at least 2");
  if (cfg.h == 0 || cfg.h_D == 0 || cfg.D_w == 0 || cfg.D_px == 0) {
    throw ValidationError("layer widths must be positive");
  }
  if (cfg.n_categories < 1) throw ValidationError("need at least one category");
  if (!(cfg.leaky_slope >= 0.0) || !std::isfinite(cfg.leaky_slope)) throw ValidationError("leaky slope must be >= 0");
}

const char* param_name(Param p) {
  static constexpr std::array<const char*, kParamCount> names = {
      "W_t", "b_t", "W_s", "b_s", "W_r", "b_r", "W_p", "b_p", "W_c", "b_c",
      "W_v", "b_v", "W_cls", "b_cls", "W1", "b1", "W2", "b2", "w3", "b3"};
  return names[static_cast<std::size_t>(p)];
}

bool is_discriminator(Param p) { return p >= Param::W1; }

namespace {

struct Layout {
  Param weight;
  std::size_t in;
  std::size_t out;
};

std::vector<Layout> layouts(const EmbedConfig& c) {
  return {{Param::W_t, c.D_w, c.h},   {Param::W_s, c.D_w, c.h},  {Param::W_r, 2 * c.h, c.d},
          {Param::W_p, c.D_px, c.h},  {Param::W_c, c.D_w, c.h},  {Param::W_v, 2 * c.h, c.d},
          {Param::W_cls, c.d, c.n_categories},
          {Param::W1, c.d, c.h_D},    {Param::W2, c.h_D, c.h_D}, {Param::w3, c.h_D, 1}};
}

Param bias_of(Param w) { return static_cast<Param>(static_cast<std::size_t>(w) + 1); }

}  // namespace

ModelParams ModelParams::zeros(const EmbedConfig& cfg) {
  validate(cfg);
  ModelParams p;
  p.config = cfg;
  for (const auto& l : layouts(cfg)) {
    p[l.weight] = Tensor(l.in, l.out);
    p[bias_of(l.weight)] = Tensor(1, l.out);
  }
  return p;
}

ModelParams ModelParams::init(const EmbedConfig& cfg, Rng& rng) {
  ModelParams p = zeros(cfg);
  for (const auto& l : layouts(cfg)) {
    const double a = std::sqrt(6.0 / static_cast<double>(l.in + l.out));
    for (double& v : p[l.weight].data()) v = rng.uniform(-a, a);
  }
  return p;
}

BoundParams bind(ad::Tape& tape, const ModelParams& p, bool encoders_trainable, bool discriminator_trainable) {
  BoundParams b;
  b.leaky_slope = p.config.leaky_slope;
  for (std::size_t i = 0; i < kParamCount; ++i) {
    const bool trainable = is_discriminator(static_cast<Param>(i)) ? discriminator_trainable : encoders_trainable;
    b.vars[i] = trainable ? tape.variable(p.tensors[i]) : tape.constant(p.tensors[i]);
  }
  return b;
}

namespace {

Var dense(Var x, Var w, Var b) { return ad::add(ad::matmul(x, w), b); }

Var two_branch(const BoundParams& p, Var a, Var b, Param wa, Param wb, Param wout) {
  Var ha = ad::tanh(dense(a, p[wa], p[bias_of(wa)]));
  Var hb = ad::tanh(dense(b, p[wb], p[bias_of(wb)]));
  return ad::l2_normalize(dense(ad::concat({ha, hb}), p[wout], p[bias_of(wout)]));
}

}  // namespace

Var encode_recipe_batch(const BoundParams& p, Var f_term, Var sentence_mean) {
  return two_branch(p, f_term, sentence_mean, Param::W_t, Param::W_s, Param::W_r);
}

Var encode_image_batch(const BoundParams& p, Var f_pixel, Var f_cat) {
  return two_branch(p, f_pixel, f_cat, Param::W_p, Param::W_c, Param::W_v);
}

Var classify_batch(const BoundParams& p, Var embeddings) { return dense(embeddings, p[Param::W_cls], p[Param::b_cls]); }

Var discriminator_score(const BoundParams& p, Var x) {
  Var a1 = ad::leaky_relu(dense(x, p[Param::W1], p[Param::b1]), p.leaky_slope);
  Var a2 = ad::leaky_relu(dense(a1, p[Param::W2], p[Param::b2]), p.leaky_slope);
  return dense(a2, p[Param::w3], p[Param::b3]);
}

Var discriminator_input_gradient(const BoundParams& p, Var x) {
  Var z1 = dense(x, p[Param::W1], p[Param::b1]);
  Var z2 = dense(ad::leaky_relu(z1, p.leaky_slope), p[Param::W2], p[Param::b2]);
  Var g2 = ad::elementwise_mul(ad::leaky_relu_slope_mask(z2, p.leaky_slope), ad::transpose(p[Param::w3]));
  Var g1 = ad::elementwise_mul(ad::matmul(g2, ad::transpose(p[Param::W2])), ad::leaky_relu_slope_mask(z1, p.leaky_slope));
  return ad::matmul(g1, ad::transpose(p[Param::W1]));
}

std::vector<double> mean_of(std::vector<std::vector<double>> vectors, std::size_t dim) {
  std::vector<double> out(dim, 0.0);
  if (vectors.empty()) return out;
  std::sort(vectors.begin(), vectors.end());
  for (const auto& v : vectors) {
    if (v.size() != dim) throw ShapeMismatch("vector of width " + std::to_string(v.size()) + ", expected " + std::to_string(dim));
    for (std::size_t k = 0; k < dim; ++k) out[k] += v[k];
  }
  for (double& x : out) x /= static_cast<double>(vectors.size());
  return out;
}

namespace {

void check_width(std::span<const double> v, std::size_t want, const char* what) {
  if (v.size() != want) {
    throw ShapeMismatch(std::string(what) + " has width " + std::to_string(v.size()) + ", expected " +
                        std::to_string(want));
  }
}

}  // namespace

std::vector<double> encode_recipe(const ModelParams& p, std::span<const double> f_term,
                                  const std::vector<std::vector<double>>& sentence_vectors) {
  check_width(f_term, p.config.D_w, "term feature");
  const std::vector<double> mean = mean_of(sentence_vectors, p.config.D_w);
  ad::Tape tape;
  const BoundParams b = bind(tape, p, false, false);
  return encode_recipe_batch(b, tape.constant(Tensor::row(f_term)), tape.constant(Tensor::row(mean))).value().row_vector(0);
}

std::vector<double> encode_image(const ModelParams& p, std::span<const double> f_pixel, std::span<const double> f_cat) {
  check_width(f_pixel, p.config.D_px, "pixel feature");
  check_width(f_cat, p.config.D_w, "category feature");
  ad::Tape tape;
  const BoundParams b = bind(tape, p, false, false);
  return encode_image_batch(b, tape.constant(Tensor::row(f_pixel)), tape.constant(Tensor::row(f_cat))).value().row_vector(0);
}

std::vector<double> classify(const ModelParams& p, std::span<const double> embedding) {
  check_width(embedding, p.config.d, "embedding");
  ad::Tape tape;
  const BoundParams b = bind(tape, p, false, false);
  return classify_batch(b, tape.constant(Tensor::row(embedding))).value().row_vector(0);
}

Discrimination discriminate(const ModelParams& p, std::span<const double> embedding) {
  check_width(embedding, p.config.d, "embedding");
  ad::Tape tape;
  const BoundParams b = bind(tape, p, false, false);
  Var x = tape.constant(Tensor::row(embedding));
  Discrimination out;
  out.score = discriminator_score(b, x).value().item();
  out.confidence = ad::sigmoid(discriminator_score(b, x)).value().item();
  out.input_gradient = discriminator_input_gradient(b, x).value().row_vector(0);
  return out;
}

// ---- files ----------------------------------------------------------------

namespace {

constexpr char kTensorFileMagic[8] = {'S', 'E', 'J', 'E', 'C', 'K', 'P', 'T'};

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const std::string& header_json,
                       std::span<const Tensor* const> tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.write(kTensorFileMagic, sizeof kTensorFileMagic);
  const std::uint32_t n = static_cast<std::uint32_t>(header_json.size());
  unsigned char len[4];
  for (int i = 0; i < 4; ++i) len[i] = static_cast<unsigned char>((n >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(len), 4);
  out.write(header_json.data(), static_cast<std::streamsize>(header_json.size()));
  for (const Tensor* t : tensors) {
    write_matrix_f64(out, static_cast<std::uint32_t>(t->rows()), static_cast<std::uint32_t>(t->cols()), t->data());
  }
  if (!out) throw RuntimeFailure("failed writing " + path.string());
}

TensorFile read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  char magic[8];
  unsigned char len[4];
  if (!in.read(magic, 8) || std::memcmp(magic, kTensorFileMagic, 8) != 0) {
    throw ValidationError(path.string() + ": not a seje parameter file");
  }
  if (!in.read(reinterpret_cast<char*>(len), 4)) throw DimensionMismatch(path.string() + ": truncated header");
  const std::uint32_t n = len[0] | (len[1] << 8) | (len[2] << 16) | (static_cast<std::uint32_t>(len[3]) << 24);
  TensorFile f;
  f.header_json.resize(n);
  if (!in.read(f.header_json.data(), n)) throw DimensionMismatch(path.string() + ": truncated header");
  while (in.peek() != std::char_traits<char>::eof()) {
    DoubleMatrix m = read_matrix_f64(in, path.string());
    f.tensors.emplace_back(m.rows, m.cols, std::move(m.data));
  }
  return f;
}

namespace {

nlohmann::json embed_json(const EmbedConfig& c) {
  return {{"d", c.d},       {"h", c.h},       {"h_D", c.h_D},
          {"D_w", c.D_w},   {"D_px", c.D_px}, {"n_categories", c.n_categories},
          {"leaky_slope", c.leaky_slope},     {"seed", c.seed}};
}

}  // namespace

std::string to_json(const EmbedConfig& cfg) { return embed_json(cfg).dump(); }

EmbedConfig embed_config_from_json(const std::string& text) {
  EmbedConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.d = j.value("d", c.d);
    c.h = j.value("h", c.h);
    c.h_D = j.value("h_D", c.h_D);
    c.D_w = j.value("D_w", c.D_w);
    c.D_px = j.value("D_px", c.D_px);
    c.n_categories = j.value("n_categories", c.n_categories);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad embed config: ") + e.what());
  }
  validate(c);
  return c;
}

void save_model(const std::filesystem::path& path, const ModelParams& p) {
  std::vector<const Tensor*> ts;
  for (const auto& t : p.tensors) ts.push_back(&t);
  write_tensor_file(path, nlohmann::json{{"kind", "model"}, {"embed", embed_json(p.config)}}.dump(), ts);
}

ModelParams load_model(const std::filesystem::path& path) {
  TensorFile f = read_tensor_file(path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(f.header_json);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": bad header: " + e.what());
  }
  ModelParams p = ModelParams::zeros(embed_config_from_json(header.at("embed").dump()));
  if (f.tensors.size() < kParamCount) throw DimensionMismatch(path.string() + ": missing parameter tensors");
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (f.tensors[i].shape() != p.tensors[i].shape()) {
      throw DimensionMismatch(path.string() + ": tensor " + param_name(static_cast<Param>(i)) + " has the wrong shape");
    }
    p.tensors[i] = std::move(f.tensors[i]);
  }
  return p;
}

}  // namespace seje
