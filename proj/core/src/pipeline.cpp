#include "seje/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "seje/error.hpp"
#include "seje/matrix_io.hpp"
#include "seje/model.hpp"

namespace seje {

const char* to_string(Rater r) {
  switch (r) {
    case Rater::tfidf:
      return "tfidf";
    case Rater::textrank:
      return "textrank";
    case Rater::external:
      return "external";
  }
  return "?";
}

Rater parse_rater(const std::string& s) {
  if (s == "tfidf") return Rater::tfidf;
  if (s == "textrank") return Rater::textrank;
  if (s == "external") return Rater::external;
  throw ValidationError("unknown rater \"" + s + "\" (expected tfidf, textrank or external)");
}

std::vector<Tokens> token_streams(const Corpus& corpus, const Lexicons& lex) {
  std::vector<Tokens> out;
  for (const auto& r : corpus.recipes) {
    Tokens stream;
    auto add = [&](const std::string& text) {
      for (auto& t : join_entities(tokenize(text), lex)) stream.push_back(std::move(t));
    };
    add(r.title);
    for (const auto& l : r.ingredient_lines) add(l);
    for (const auto& s : r.instruction_sentences) add(s);
    if (!stream.empty()) out.push_back(std::move(stream));
  }
  return out;
}

RecipeTerms extract_all_terms(const Corpus& corpus, const Lexicons& lex) {
  const Verifier verifier = accept_all_verifier();
  const EntitySet global = collect_accepted_entities(corpus.recipes, lex, verifier);
  RecipeTerms out;
  for (const auto& r : corpus.recipes) {
    auto terms = extract_key_terms(r, lex, verifier, global);
    std::vector<std::string> surfaces;
    for (const auto& t : terms) surfaces.push_back(t.surface);
    out.terms.push_back(std::move(terms));
    out.lists.push_back(std::move(surfaces));
  }
  return out;
}

std::vector<TermWeights> rate_terms(const TermLists& lists, Rater rater, const TextRankParams& params) {
  if (rater == Rater::tfidf) return tfidf_weights(lists);
  if (rater == Rater::external) throw ValidationError("external term scores need a score file");
  return per_recipe_weights(lists, textrank_scores(lists, params));
}

std::vector<std::vector<double>> sentence_vectors(const Recipe& recipe, const Lexicons& lex, const WordVectors& wv) {
  std::vector<std::vector<double>> out;
  for (const auto& s : recipe.instruction_sentences) {
    const Tokens toks = join_entities(tokenize(s), lex);
    SentenceVector v = sentence_vector(toks, wv);
    if (!v.empty) out.push_back(std::move(v.value));
  }
  return out;
}

Dataset build_dataset(const Corpus& corpus, const Lexicons& lex, const WordVectors& wv, const RecipeTerms& terms,
                      const std::vector<TermWeights>& weights, const CategoryResult& categories) {
  if (terms.terms.size() != corpus.recipes.size() || weights.size() != corpus.recipes.size()) {
    throw ShapeMismatch("term data is not parallel to the recipes");
  }
  std::unordered_map<std::string, std::size_t> recipe_index;
  for (std::size_t i = 0; i < corpus.recipes.size(); ++i) recipe_index.emplace(corpus.recipes[i].id, i);

  Dataset out;
  out.n_categories = categories.space.size();
  for (const auto& pair : corpus.manifest.pairs) {
    const auto it = recipe_index.find(pair.recipe_id);
    if (it == recipe_index.end()) throw DanglingReference(pair.recipe_id);
    const std::size_t ri = it->second;
    const Recipe& recipe = corpus.recipes[ri];
    const ImageFeatures& image = corpus.image(pair.image_id);

    PairExample ex;
    ex.pair_id = pair.pair_id();
    TermFeature tf = weighted_term_feature(terms.terms[ri], weights[ri], wv);
    if (tf.empty) ++out.empty_term_features;
    ex.term_feature = std::move(tf.value);
    ex.sentence_mean = mean_of(sentence_vectors(recipe, lex, wv), wv.dim());
    ex.pixel = image.pixel_feature;
    ex.category_feature = category_embedding(corpus.image_top_category(image), wv).value;
    ex.category = categories.space.index_of(categories.assignment.at(ex.pair_id).label);

    switch (pair.split) {
      case Split::train:
        out.train.push_back(std::move(ex));
        break;
      case Split::val:
        out.val.push_back(std::move(ex));
        break;
      case Split::test:
        out.test.push_back(std::move(ex));
        break;
    }
  }
  return out;
}

namespace {

using Field = std::vector<double> PairExample::*;

FeatureScaler::Block fit_block(const std::vector<PairExample>& xs, Field f, double eps) {
  FeatureScaler::Block b;
  if (xs.empty()) return b;
  const std::size_t dim = (xs.front().*f).size();
  b.mean.assign(dim, 0.0);
  b.scale.assign(dim, 0.0);
  const double n = static_cast<double>(xs.size());
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < dim; ++k) b.mean[k] += (x.*f)[k];
  }
  for (double& m : b.mean) m /= n;
  for (const auto& x : xs) {
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = (x.*f)[k] - b.mean[k];
      b.scale[k] += d * d;
    }
  }
  for (double& s : b.scale) {
    const double sd = std::sqrt(s / n);
    s = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  if (eps < 0.0) return b;

  Eigen::MatrixXd z(xs.size(), dim);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    for (std::size_t k = 0; k < dim; ++k) z(i, k) = ((xs[i].*f)[k] - b.mean[k]) * b.scale[k];
  }
  const Eigen::MatrixXd cov = (z.transpose() * z) / n;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  const Eigen::VectorXd inv_sqrt = (es.eigenvalues().array().max(0.0) + eps).rsqrt();
  const Eigen::MatrixXd w = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  b.whiten.resize(dim * dim);
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < dim; ++c) b.whiten[r * dim + c] = w(r, c);
  }
  return b;
}

void apply_block(const FeatureScaler::Block& b, std::vector<double>& v) {
  if (b.mean.empty()) return;
  if (v.size() != b.mean.size()) throw ShapeMismatch("feature width differs from the fitted scaler");
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = (v[k] - b.mean[k]) * b.scale[k];
  if (b.whiten.empty()) return;
  const std::size_t dim = v.size();
  std::vector<double> out(dim, 0.0);
  for (std::size_t r = 0; r < dim; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < dim; ++c) acc += b.whiten[r * dim + c] * v[c];
    out[r] = acc;
  }
  v = std::move(out);
}

}  // namespace

void FeatureScaler::apply(PairExample& ex) const {
  apply_block(term, ex.term_feature);
  apply_block(sentence, ex.sentence_mean);
  apply_block(pixel, ex.pixel);
  apply_block(category, ex.category_feature);
}

void FeatureScaler::apply(std::vector<PairExample>& xs) const {
  for (auto& x : xs) apply(x);
}

FeatureScaler fit_scaler(const std::vector<PairExample>& train, double whiten_eps) {
  return {fit_block(train, &PairExample::term_feature, whiten_eps),
          fit_block(train, &PairExample::sentence_mean, whiten_eps), fit_block(train, &PairExample::pixel, whiten_eps),
          fit_block(train, &PairExample::category_feature, whiten_eps)};
}

std::string scaler_json(const FeatureScaler& s) {
  auto block = [](const FeatureScaler::Block& b) {
    return nlohmann::json{{"mean", b.mean}, {"scale", b.scale}, {"whiten", b.whiten}};
  };
  const nlohmann::json j{{"term", block(s.term)},
                         {"sentence", block(s.sentence)},
                         {"pixel", block(s.pixel)},
                         {"category", block(s.category)}};
  return j.dump();
}

namespace {

struct SplitFiles {
  const char* name;
  std::vector<PairExample> Dataset::*member;
};
constexpr SplitFiles kSplits[] = {{"train", &Dataset::train}, {"val", &Dataset::val}, {"test", &Dataset::test}};

struct BlockFile {
  const char* suffix;
  Field field;
};
const BlockFile kBlocks[] = {{".term.bin", &PairExample::term_feature},
                             {".sentence.bin", &PairExample::sentence_mean},
                             {".pixel.bin", &PairExample::pixel},
                             {".catfeat.bin", &PairExample::category_feature}};

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open " + path.string());
  return is;
}

}  // namespace

void save_dataset(const Dataset& d, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    auto os = open_out(dir / "dataset.json");
    os << nlohmann::json{{"n_categories", d.n_categories}, {"empty_term_features", d.empty_term_features}}.dump(2)
       << "\n";
  }
  for (const auto& split : kSplits) {
    const auto& xs = d.*split.member;
    auto meta = open_out(dir / (std::string(split.name) + ".jsonl"));
    for (const auto& x : xs) meta << nlohmann::json{{"pair_id", x.pair_id}, {"category", x.category}}.dump() << "\n";
    for (const auto& b : kBlocks) {
      const std::size_t cols = xs.empty() ? 0 : (xs.front().*b.field).size();
      std::vector<double> flat;
      flat.reserve(xs.size() * cols);
      for (const auto& x : xs) {
        if ((x.*b.field).size() != cols) throw ShapeMismatch("ragged feature block in split " + std::string(split.name));
        flat.insert(flat.end(), (x.*b.field).begin(), (x.*b.field).end());
      }
      auto os = open_out(dir / (std::string(split.name) + b.suffix));
      write_matrix_f64(os, static_cast<std::uint32_t>(xs.size()), static_cast<std::uint32_t>(cols), flat);
    }
  }
}

Dataset load_dataset(const std::filesystem::path& dir) {
  Dataset d;
  {
    auto is = open_in(dir / "dataset.json");
    const auto j = nlohmann::json::parse(is, nullptr, false);
    if (j.is_discarded() || !j.contains("n_categories")) throw ValidationError("bad dataset.json in " + dir.string());
    d.n_categories = j.at("n_categories").get<std::size_t>();
    d.empty_term_features = j.value("empty_term_features", std::size_t{0});
  }
  for (const auto& split : kSplits) {
    auto& xs = d.*split.member;
    const auto meta_path = dir / (std::string(split.name) + ".jsonl");
    auto meta = open_in(meta_path);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(meta, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded() || !j.contains("pair_id") || !j.contains("category")) {
        throw MalformedRecord(meta_path.string(), lineno, "expected pair_id and category");
      }
      PairExample x;
      x.pair_id = j.at("pair_id").get<std::string>();
      x.category = j.at("category").get<std::size_t>();
      if (x.category >= d.n_categories) throw LabelOutOfRange(static_cast<long>(x.category), d.n_categories);
      xs.push_back(std::move(x));
    }
    for (const auto& b : kBlocks) {
      const auto path = dir / (std::string(split.name) + b.suffix);
      auto is = open_in(path);
      const DoubleMatrix m = read_matrix_f64(is, path.string());
      if (m.rows != xs.size()) throw DimensionMismatch(path.string() + ": row count differs from " + meta_path.string());
      for (std::size_t r = 0; r < xs.size(); ++r) {
        xs[r].*b.field = std::vector<double>(m.data.begin() + r * m.cols, m.data.begin() + (r + 1) * m.cols);
      }
    }
  }
  return d;
}

PreparedCorpus prepare(const Corpus& corpus, const Lexicons& lex, const std::vector<std::string>& curated_labels,
                       const PipelineConfig& cfg) {
  validate_corpus(corpus);
  return prepare(corpus, lex, curated_labels, cfg, train_cbow(token_streams(corpus, lex), cfg.cbow).vectors);
}

PreparedCorpus prepare(const Corpus& corpus, const Lexicons& lex, const std::vector<std::string>& curated_labels,
                       const PipelineConfig& cfg, WordVectors wv) {
  validate_corpus(corpus);
  PreparedCorpus p;
  p.wv = std::move(wv);
  p.categories = assign_categories(corpus, curated_labels, cfg.bigram_min_freq, image_top_categories(corpus));
  p.terms = extract_all_terms(corpus, lex);
  if (cfg.rater == Rater::external) {
    std::vector<std::string> ids;
    for (const auto& r : corpus.recipes) ids.push_back(r.id);
    p.weights = external_term_scores(cfg.external_scores, ids);
  } else {
    p.weights = rate_terms(p.terms.lists, cfg.rater, cfg.textrank);
  }
  for (auto& w : p.weights) {
    const bool all_below = !w.weights.empty() && std::all_of(w.weights.begin(), w.weights.end(), [&](const auto& kv) {
      return kv.second < cfg.term_threshold;
    });
    if (all_below) ++p.filter_fallbacks;
    w = filter_terms(w, cfg.term_threshold);
  }
  p.data = build_dataset(corpus, lex, p.wv, p.terms, p.weights, p.categories);
  p.scaler = fit_scaler(p.data.train, cfg.whiten_eps);
  p.scaler.apply(p.data.train);
  p.scaler.apply(p.data.val);
  p.scaler.apply(p.data.test);
  return p;
}

PreparedCorpus prepare_synthetic(const SyntheticCorpus& synth, const PipelineConfig& cfg) {
  const Lexicons lex = Lexicons::from_lists(synth.ingredient_entities, synth.utensils, synth.actions);
  return prepare(synth.corpus, lex, synth.category_labels, cfg);
}

}  // namespace seje
