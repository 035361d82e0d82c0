#include "seje/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "seje/error.hpp"
#include "seje/matrix_io.hpp"
#include "seje/rng.hpp"
#include "seje/text.hpp"

namespace seje {

using nlohmann::json;

const char* to_string(Split s) {
  switch (s) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split \"" + s + "\"");
}

const Recipe& Corpus::recipe(const std::string& id) const {
  for (const auto& r : recipes) {
    if (r.id == id) return r;
  }
  throw DanglingReference(id);
}

const ImageFeatures& Corpus::image(const std::string& id) const {
  for (const auto& im : images) {
    if (im.id == id) return im;
  }
  throw DanglingReference(id);
}

const std::string& Corpus::image_top_category(const ImageFeatures& img) const {
  if (img.category_probs.empty() || img.category_probs.size() != image_category_labels.size()) {
    throw DimensionMismatch("image " + img.id + ": category_probs do not match the category label list");
  }
  const auto it = std::max_element(img.category_probs.begin(), img.category_probs.end());
  return image_category_labels[static_cast<std::size_t>(it - img.category_probs.begin())];
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> recipe_ids;
  for (std::size_t i = 0; i < corpus.recipes.size(); ++i) {
    const Recipe& r = corpus.recipes[i];
    if (r.id.empty()) throw MalformedRecord("recipes", i + 1, "empty id");
    if (!recipe_ids.insert(r.id).second) throw MalformedRecord("recipes", i + 1, "duplicate id " + r.id);
    if (trim(r.title).empty()) throw MalformedRecord("recipes", i + 1, "empty title");
    if (r.ingredient_lines.empty()) throw MalformedRecord("recipes", i + 1, "no ingredient lines");
  }

  std::unordered_set<std::string> image_ids;
  const std::size_t n_labels = corpus.image_category_labels.size();
  std::size_t width = 0;
  for (std::size_t i = 0; i < corpus.images.size(); ++i) {
    const ImageFeatures& im = corpus.images[i];
    if (!image_ids.insert(im.id).second) throw MalformedRecord("images", i + 1, "duplicate id " + im.id);
    if (i == 0) width = im.pixel_feature.size();
    if (im.pixel_feature.size() != width) {
      throw DimensionMismatch("image " + im.id + ": pixel_feature has " + std::to_string(im.pixel_feature.size()) +
                              " values, expected " + std::to_string(width));
    }
    for (double v : im.pixel_feature) {
      if (!std::isfinite(v)) throw ValidationError("image " + im.id + ": non-finite pixel feature");
    }
    if (im.category_probs.size() != n_labels) {
      throw DimensionMismatch("image " + im.id + ": " + std::to_string(im.category_probs.size()) +
                              " category probabilities for " + std::to_string(n_labels) + " labels");
    }
    double sum = 0.0;
    for (double p : im.category_probs) {
      if (!(p >= 0.0)) throw ValidationError("image " + im.id + ": negative category probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("image " + im.id + ": category probabilities do not sum to 1");
  }

  std::set<std::pair<std::string, std::string>> seen;
  std::unordered_map<std::string, Split> split_of;
  for (const Pair& p : corpus.manifest.pairs) {
    if (!recipe_ids.contains(p.recipe_id)) throw DanglingReference(p.recipe_id);
    if (!image_ids.contains(p.image_id)) throw DanglingReference(p.image_id);
    if (!seen.insert({p.recipe_id, p.image_id}).second) {
      throw ValidationError("duplicate pair (" + p.recipe_id + ", " + p.image_id + ")");
    }
    const auto [it, fresh] = split_of.emplace(p.pair_id(), p.split);
    if (!fresh) {
      throw ValidationError("pair id " + p.pair_id() + " appears more than once (" + to_string(it->second) + ", " +
                            to_string(p.split) + ")");
    }
  }
}

ImageFilePaths image_file_paths(const std::filesystem::path& pixels_path) {
  auto stem = pixels_path;
  stem.replace_extension();
  auto with = [&](const char* suffix) { return std::filesystem::path(stem.string() + suffix); };
  return {pixels_path, with(".ids"), with(".catprobs.bin"), with(".catlabels")};
}

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> string_array(const json& j, const char* key, const std::string& file, std::size_t line) {
  if (!j.contains(key) || !j[key].is_array()) throw MalformedRecord(file, line, std::string("missing array ") + key);
  std::vector<std::string> out;
  for (const auto& v : j[key]) {
    if (!v.is_string()) throw MalformedRecord(file, line, std::string("non-string entry in ") + key);
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string string_field(const json& j, const char* key, const std::string& file, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) throw MalformedRecord(file, line, std::string("missing string ") + key);
  return j[key].get<std::string>();
}

json parse_line(const std::string& text, const std::string& file, std::size_t line) {
  try {
    json j = json::parse(text);
    if (!j.is_object()) throw MalformedRecord(file, line, "not a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw MalformedRecord(file, line, e.what());
  }
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << content;
}

}  // namespace

std::vector<Recipe> load_recipes(const std::filesystem::path& recipes_path) {
  const std::string file = recipes_path.string();
  std::vector<Recipe> recipes;
  const auto lines = read_lines(recipes_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const json j = parse_line(lines[i], file, i + 1);
    Recipe r;
    r.id = string_field(j, "id", file, i + 1);
    r.title = string_field(j, "title", file, i + 1);
    r.ingredient_lines = string_array(j, "ingredients", file, i + 1);
    r.instruction_sentences = j.contains("instructions") ? string_array(j, "instructions", file, i + 1)
                                                         : std::vector<std::string>{};
    if (r.id.empty()) throw MalformedRecord(file, i + 1, "empty id");
    if (trim(r.title).empty()) throw MalformedRecord(file, i + 1, "empty title");
    if (r.ingredient_lines.empty()) throw MalformedRecord(file, i + 1, "no ingredient lines");
    recipes.push_back(std::move(r));
  }
  return recipes;
}

Corpus load_corpus(const std::filesystem::path& recipes_path, const std::filesystem::path& images_path,
                   const std::filesystem::path& manifest_path) {
  Corpus corpus;
  corpus.recipes = load_recipes(recipes_path);

  const ImageFilePaths paths = image_file_paths(images_path);
  const FloatMatrix pixels = load_matrix_f32(paths.pixels);
  std::vector<std::string> ids;
  for (auto& l : read_lines(paths.ids)) {
    if (!trim(l).empty()) ids.push_back(trim(l));
  }
  if (ids.size() != pixels.rows) {
    throw DimensionMismatch(paths.ids.string() + ": " + std::to_string(ids.size()) + " ids for " +
                            std::to_string(pixels.rows) + " feature rows");
  }
  const FloatMatrix probs = load_matrix_f32(paths.category_probs);
  if (probs.rows != pixels.rows) {
    throw DimensionMismatch(paths.category_probs.string() + ": row count differs from " + paths.pixels.string());
  }
  for (auto& l : read_lines(paths.category_labels)) {
    if (!trim(l).empty()) corpus.image_category_labels.push_back(trim(l));
  }
  if (corpus.image_category_labels.size() != probs.cols) {
    throw DimensionMismatch(paths.category_labels.string() + ": label count differs from probability columns");
  }
  corpus.images.resize(pixels.rows);
  for (std::size_t r = 0; r < pixels.rows; ++r) {
    auto& im = corpus.images[r];
    im.id = ids[r];
    const auto px = pixels.row(r);
    im.pixel_feature.assign(px.begin(), px.end());
    const auto pr = probs.row(r);
    im.category_probs.assign(pr.begin(), pr.end());
  }

  const std::string mfile = manifest_path.string();
  const auto lines = read_lines(manifest_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const json j = parse_line(lines[i], mfile, i + 1);
    Pair p;
    p.recipe_id = string_field(j, "recipe_id", mfile, i + 1);
    p.image_id = string_field(j, "image_id", mfile, i + 1);
    try {
      p.split = parse_split(string_field(j, "split", mfile, i + 1));
    } catch (const MalformedRecord&) {
      throw;
    } catch (const ValidationError& e) {
      throw MalformedRecord(mfile, i + 1, e.what());
    }
    corpus.manifest.pairs.push_back(std::move(p));
  }

  validate_corpus(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  validate_corpus(corpus);
  std::filesystem::create_directories(dir);

  std::string recipes;
  for (const Recipe& r : corpus.recipes) {
    json j = {{"id", r.id},
              {"title", r.title},
              {"ingredients", r.ingredient_lines},
              {"instructions", r.instruction_sentences}};
    recipes += j.dump() + "\n";
  }
  write_text(dir / "recipes.jsonl", recipes);

  const ImageFilePaths paths = image_file_paths(dir / "images.bin");
  FloatMatrix pixels;
  FloatMatrix probs;
  pixels.rows = probs.rows = static_cast<std::uint32_t>(corpus.images.size());
  pixels.cols = corpus.images.empty() ? 0 : static_cast<std::uint32_t>(corpus.images.front().pixel_feature.size());
  probs.cols = static_cast<std::uint32_t>(corpus.image_category_labels.size());
  std::string ids;
  for (const auto& im : corpus.images) {
    ids += im.id + "\n";
    for (double v : im.pixel_feature) pixels.data.push_back(static_cast<float>(v));
    for (double v : im.category_probs) probs.data.push_back(static_cast<float>(v));
  }
  save_matrix_f32(paths.pixels, pixels);
  save_matrix_f32(paths.category_probs, probs);
  write_text(paths.ids, ids);
  std::string labels;
  for (const auto& l : corpus.image_category_labels) labels += l + "\n";
  write_text(paths.category_labels, labels);

  std::string manifest;
  for (const Pair& p : corpus.manifest.pairs) {
    json j = {{"recipe_id", p.recipe_id}, {"image_id", p.image_id}, {"split", to_string(p.split)}};
    manifest += j.dump() + "\n";
  }
  write_text(dir / "manifest.jsonl", manifest);
}

// ---------------------------------------------------------------------------
// Synthetic generation

void validate(const SyntheticSpec& spec) {
  if (spec.n_categories < 2) throw InvalidSpec("n_categories must be at least 2");
  if (spec.n_pairs < spec.n_categories) throw InvalidSpec("n_pairs must be at least n_categories");
  if (spec.latent_dim < 1) throw InvalidSpec("latent_dim must be positive");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) throw InvalidSpec("noise_sigma must be >= 0");
  if (spec.n_test + spec.n_val > spec.n_pairs) throw InvalidSpec("n_test + n_val exceeds n_pairs");
}

namespace {

constexpr const char* kDishLabels[] = {
    "apple_pie",      "beef_stew",     "chicken_curry",   "lemon_tart",    "mushroom_risotto", "shrimp_scampi",
    "pumpkin_soup",   "carrot_cake",   "fish_tacos",      "lamb_kebab",    "pad_thai",         "french_toast",
    "caesar_salad",   "clam_chowder",  "peach_cobbler",   "banana_bread",  "spinach_lasagna",  "tuna_poke",
    "duck_confit",    "veal_piccata",  "tofu_burger",     "pork_ramen",    "cheese_souffle",   "bean_chili",
};

constexpr const char* kCommonIngredients[] = {
    "salt", "black pepper", "olive oil", "water", "sugar", "butter",
    "flour", "garlic", "milk", "eggs", "vanilla extract", "baking soda",
};

constexpr const char* kSignatureSuffixes[] = {"paste", "leaves", "sauce", "root", "seeds"};

constexpr const char* kActions[] = {"bake", "blend", "boil", "chop", "dice", "fry", "mix", "roast",
                                    "simmer", "stir", "whisk", "knead", "saute", "drain", "slice", "pour"};

constexpr const char* kUtensils[] = {"oven", "pan", "pot", "skillet", "bowl", "blender", "saucepan", "tray",
                                     "grill", "spatula", "colander", "ladle", "wok"};

constexpr const char* kTitleAdjectives[] = {"classic", "easy",  "homemade", "quick",  "rustic",
                                            "spicy",   "simple", "golden",  "hearty", "weeknight"};

constexpr const char* kQuantities[] = {"1", "2", "3", "half"};
constexpr const char* kUnits[] = {"cup", "tbsp", "tsp", "pinch", "handful"};

// Number of modifier terms that carry a pair's instance code.
constexpr std::size_t kModifiersPerRecipe = 8;

class WordMaker {
 public:
  explicit WordMaker(Rng& rng) : rng_(rng) {
    for (const auto* l : kDishLabels) {
      for (auto& t : split_underscore(l)) taken_.insert(t);
    }
    for (const auto* w : kCommonIngredients) {
      for (auto& t : tokenize(w)) taken_.insert(t);
    }
    for (const auto* w : kActions) taken_.insert(w);
    for (const auto* w : kUtensils) taken_.insert(w);
    for (const auto* w : kTitleAdjectives) taken_.insert(w);
    for (const auto* w : kSignatureSuffixes) taken_.insert(w);
  }

  std::string make(std::size_t syllables) {
    static constexpr char kCons[] = "bdfgklmnprstvz";
    static constexpr char kVow[] = "aeiou";
    for (;;) {
      std::string w;
      for (std::size_t s = 0; s < syllables; ++s) {
        w.push_back(kCons[rng_.below(sizeof(kCons) - 1)]);
        w.push_back(kVow[rng_.below(sizeof(kVow) - 1)]);
      }
      if (taken_.insert(w).second) return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> taken_;
};

std::string letters(std::size_t n) {
  std::string s;
  do {
    s.push_back(static_cast<char>('a' + n % 26));
    n /= 26;
  } while (n > 0);
  return s;
}

std::string spaced(const std::string& label) { return join(split_underscore(label), " "); }

template <typename T, std::size_t N>
const T& pick(Rng& rng, const T (&arr)[N]) {
  return arr[rng.below(N)];
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[rng.below(v.size())];
}

// k distinct indices from [0, n), in draw order.
std::vector<std::size_t> sample_indices(Rng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + rng.below(n - i)]);
  idx.resize(k);
  return idx;
}

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  WordMaker words(rng);
  const std::size_t C = spec.n_categories;
  const std::size_t L = spec.latent_dim;

  SyntheticCorpus out;
  for (std::size_t c = 0; c < C; ++c) {
    if (c < std::size(kDishLabels)) {
      out.category_labels.emplace_back(kDishLabels[c]);
    } else {
      out.category_labels.push_back(words.make(2) + "_" + words.make(3));
    }
  }

  // Five exclusive signature ingredients per category; the first one is a
  // two-word entity.
  std::vector<std::vector<std::string>> signature(C);
  for (std::size_t c = 0; c < C; ++c) {
    signature[c].push_back(words.make(3) + " " + kSignatureSuffixes[c % std::size(kSignatureSuffixes)]);
    for (int k = 0; k < 4; ++k) signature[c].push_back(words.make(3));
  }
  // One modifier word per (latent coordinate, sign).
  std::vector<std::array<std::string, 2>> modifier(L);
  for (std::size_t k = 0; k < L; ++k) modifier[k] = {words.make(2), words.make(2)};

  std::vector<std::vector<double>> prototype(C, std::vector<double>(L));
  const double proto_scale = 1.0 / std::sqrt(static_cast<double>(L));
  for (auto& p : prototype) {
    for (auto& v : p) v = rng.normal() * proto_scale;
  }

  std::vector<std::size_t> cat(spec.n_pairs);
  for (std::size_t i = 0; i < spec.n_pairs; ++i) cat[i] = i % C;
  rng.shuffle(cat);

  std::vector<std::string> utensils(std::begin(kUtensils), std::end(kUtensils));
  std::vector<std::string> actions(std::begin(kActions), std::end(kActions));
  out.corpus.image_category_labels = out.category_labels;

  const std::size_t n_mod = std::min(kModifiersPerRecipe, L);
  for (std::size_t i = 0; i < spec.n_pairs; ++i) {
    const std::size_t c = cat[i];
    char rid[24];
    char vid[24];
    std::snprintf(rid, sizeof rid, "r%05zu", i);
    std::snprintf(vid, sizeof vid, "v%05zu", i);

    ImageFeatures im;
    im.id = vid;
    std::vector<double> noise(L);
    for (std::size_t k = 0; k < L; ++k) noise[k] = rng.normal() * spec.noise_sigma;
    im.pixel_feature.resize(L);
    for (std::size_t k = 0; k < L; ++k) im.pixel_feature[k] = round_f32(prototype[c][k] + noise[k]);

    std::vector<double> logits(C);
    for (std::size_t k = 0; k < C; ++k) logits[k] = (k == c ? 4.0 : 0.0) + 0.5 * rng.normal();
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (auto& v : logits) z += (v = std::exp(v - mx));
    im.category_probs.resize(C);
    for (std::size_t k = 0; k < C; ++k) im.category_probs[k] = round_f32(logits[k] / z);

    // Instance code: strongest noise coordinates with their signs.
    std::vector<std::size_t> order(L);
    for (std::size_t k = 0; k < L; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(noise[a]) > std::abs(noise[b]); });
    std::vector<std::string> mods;
    for (std::size_t k = 0; k < n_mod; ++k) mods.push_back(modifier[order[k]][noise[order[k]] < 0.0 ? 1 : 0]);

    std::vector<std::string> ingredients;
    for (std::size_t k : sample_indices(rng, 5, 3)) ingredients.push_back(signature[c][k]);
    for (std::size_t k : sample_indices(rng, std::size(kCommonIngredients), 3)) {
      ingredients.emplace_back(kCommonIngredients[k]);
    }
    for (const auto& m : mods) ingredients.push_back(m);
    rng.shuffle(ingredients);

    Recipe r;
    r.id = rid;
    for (const auto& ing : ingredients) {
      r.ingredient_lines.push_back(std::string(pick(rng, kQuantities)) + " " + pick(rng, kUnits) + " " + ing);
    }

    const std::size_t n_sent = 3 + rng.below(2);
    for (std::size_t s = 0; s < n_sent; ++s) {
      const auto& act = pick(rng, actions);
      switch (rng.below(3)) {
        case 0:
          r.instruction_sentences.push_back(act + " the " + pick(rng, ingredients) + " in the " + pick(rng, utensils));
          break;
        case 1:
          r.instruction_sentences.push_back(act + " the " + pick(rng, mods) + " with the " + pick(rng, ingredients));
          break;
        default:
          r.instruction_sentences.push_back(act + " in a " + pick(rng, utensils) + " until golden");
          break;
      }
    }

    const double u = rng.uniform();
    if (u < 0.8) {
      r.title = std::string(pick(rng, kTitleAdjectives)) + " " + spaced(out.category_labels[c]);
    } else {
      // Titles without a category mention: one token, so they carry no bigram.
      r.title = "dish" + letters(i);
      if (u < 0.9) r.instruction_sentences.push_back("serve the " + spaced(out.category_labels[c]) + " warm");
    }

    out.corpus.recipes.push_back(std::move(r));
    out.corpus.images.push_back(std::move(im));
    out.true_category.push_back(c);
  }

  const std::size_t n_train = spec.n_pairs - spec.n_test - spec.n_val;
  for (std::size_t i = 0; i < spec.n_pairs; ++i) {
    const Split split = i < n_train ? Split::train : (i < n_train + spec.n_val ? Split::val : Split::test);
    out.corpus.manifest.pairs.push_back({out.corpus.recipes[i].id, out.corpus.images[i].id, split});
  }

  std::set<std::string> entities;
  for (const auto& sig : signature) entities.insert(sig.begin(), sig.end());
  for (const auto* w : kCommonIngredients) entities.insert(w);
  for (const auto& m : modifier) entities.insert(m.begin(), m.end());
  out.ingredient_entities.assign(entities.begin(), entities.end());
  out.utensils = utensils;
  out.actions = actions;
  return out;
}

}  // namespace seje
