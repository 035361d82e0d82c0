#include "seje/catassign.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <unordered_map>

#include "seje/error.hpp"
#include "seje/text.hpp"

namespace seje {

std::size_t CategorySpace::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw ValidationError("unknown category label \"" + label + "\"");
  return static_cast<std::size_t>(it - labels.begin());
}

const CategoryLabel& CategoryAssignment::at(const std::string& pair_id) const {
  for (const auto& [id, label] : entries) {
    if (id == pair_id) return label;
  }
  throw DanglingReference(pair_id);
}

namespace {

struct Label {
  std::string name;
  Tokens tokens;
};

// Curated labels sorted by match preference: longest first, then lexicographic.
std::vector<Label> curated_by_preference(const std::vector<std::string>& curated) {
  std::vector<Label> out;
  std::set<std::string> seen;
  for (const auto& c : curated) {
    const std::string name = to_lower(c);
    if (!seen.insert(name).second) continue;
    Tokens toks = split_underscore(name);
    if (!toks.empty()) out.push_back({name, std::move(toks)});
  }
  std::stable_sort(out.begin(), out.end(), [](const Label& a, const Label& b) {
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() > b.tokens.size();
    return a.name < b.name;
  });
  return out;
}

std::optional<std::string> first_contained(const std::vector<Label>& ranked, std::span<const std::string> tokens) {
  for (const auto& l : ranked) {
    if (contains_sequence(tokens, l.tokens)) return l.name;
  }
  return std::nullopt;
}

std::optional<std::string> first_contained_in_any(const std::vector<Label>& ranked,
                                                  const std::vector<std::string>& texts) {
  std::vector<Tokens> toks;
  toks.reserve(texts.size());
  for (const auto& t : texts) toks.push_back(tokenize(t));
  for (const auto& l : ranked) {
    for (const auto& t : toks) {
      if (contains_sequence(t, l.tokens)) return l.name;
    }
  }
  return std::nullopt;
}

}  // namespace

std::map<std::string, std::size_t> title_bigram_counts(const Corpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus.recipes) {
    const Tokens t = tokenize(r.title);
    for (std::size_t i = 0; i + 1 < t.size(); ++i) ++counts[t[i] + "_" + t[i + 1]];
  }
  return counts;
}

std::map<std::string, std::string> image_top_categories(const Corpus& corpus) {
  std::unordered_map<std::string, const ImageFeatures*> images;
  for (const auto& im : corpus.images) images.emplace(im.id, &im);
  std::map<std::string, std::string> out;
  for (const auto& p : corpus.manifest.pairs) {
    const auto it = images.find(p.image_id);
    if (it == images.end()) throw DanglingReference(p.image_id);
    out[p.pair_id()] = corpus.image_top_category(*it->second);
  }
  return out;
}

CategoryResult assign_categories(const Corpus& corpus, const std::vector<std::string>& curated_labels,
                                 std::size_t bigram_min_freq,
                                 const std::map<std::string, std::string>& image_topcats) {
  const std::vector<Label> curated = curated_by_preference(curated_labels);

  std::vector<std::pair<std::string, std::size_t>> ranked_counts;
  for (const auto& [bg, n] : title_bigram_counts(corpus)) {
    if (n >= bigram_min_freq) ranked_counts.emplace_back(bg, n);
  }
  std::stable_sort(ranked_counts.begin(), ranked_counts.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<Label> bigrams;
  for (const auto& [bg, n] : ranked_counts) bigrams.push_back({bg, split_underscore(bg)});

  std::unordered_map<std::string, const Recipe*> recipes;
  for (const auto& r : corpus.recipes) recipes.emplace(r.id, &r);

  const auto& pairs = corpus.manifest.pairs;
  std::vector<std::optional<CategoryLabel>> label(pairs.size());
  std::vector<Tokens> titles(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto it = recipes.find(pairs[i].recipe_id);
    if (it == recipes.end()) throw DanglingReference(pairs[i].recipe_id);
    titles[i] = tokenize(it->second->title);
  }

  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (auto l = first_contained(curated, titles[i])) label[i] = CategoryLabel{*l, 1};
  }
  // Bigrams in frequency order; each claims the unlabeled titles containing it.
  for (const auto& bg : bigrams) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!label[i] && contains_sequence(titles[i], bg.tokens)) label[i] = CategoryLabel{bg.name, 2};
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (label[i]) continue;
    const Recipe& r = *recipes.at(pairs[i].recipe_id);
    std::optional<std::string> l = first_contained_in_any(curated, r.ingredient_lines);
    if (!l) l = first_contained_in_any(curated, r.instruction_sentences);
    if (!l) l = first_contained_in_any(bigrams, r.ingredient_lines);
    if (!l) l = first_contained_in_any(bigrams, r.instruction_sentences);
    if (l) label[i] = CategoryLabel{*l, 3};
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (label[i]) continue;
    const auto it = image_topcats.find(pairs[i].pair_id());
    if (it == image_topcats.end()) throw MissingImageCategory(pairs[i].pair_id());
    label[i] = CategoryLabel{to_lower(it->second), 4};
  }

  CategoryResult res;
  std::set<std::string> known;
  std::set<std::string> curated_names;
  for (const auto& c : curated_labels) {
    const std::string name = to_lower(c);
    curated_names.insert(name);
    if (known.insert(name).second) {
      res.space.labels.push_back(name);
      res.space.source.push_back(LabelSource::curated);
    }
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const CategoryLabel& l = *label[i];
    if (known.insert(l.label).second) {
      res.space.labels.push_back(l.label);
      const bool from_bigram = (l.step == 2 || l.step == 3) && !curated_names.contains(l.label);
      res.space.source.push_back(from_bigram ? LabelSource::bigram : LabelSource::curated);
    }
    res.assignment.entries.emplace_back(pairs[i].pair_id(), l);
  }
  return res;
}

void save_assignment(const CategoryResult& result, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  for (const auto& [id, l] : result.assignment.entries) {
    out << nlohmann::json{{"pair_id", id}, {"label", l.label}, {"step", l.step}}.dump() << '\n';
  }
}

CategoryResult load_assignment(const std::filesystem::path& path, const std::vector<std::string>& curated_labels) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CategoryResult res;
  std::set<std::string> known;
  std::set<std::string> curated_names;
  for (const auto& c : curated_labels) {
    const std::string name = to_lower(c);
    curated_names.insert(name);
    if (known.insert(name).second) {
      res.space.labels.push_back(name);
      res.space.source.push_back(LabelSource::curated);
    }
  }
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      CategoryLabel l{j.at("label").get<std::string>(), j.at("step").get<int>()};
      if (l.step < 1 || l.step > 4) throw MalformedRecord(path.string(), line_no, "step outside 1..4");
      if (known.insert(l.label).second) {
        res.space.labels.push_back(l.label);
        const bool from_bigram = (l.step == 2 || l.step == 3) && !curated_names.contains(l.label);
        res.space.source.push_back(from_bigram ? LabelSource::bigram : LabelSource::curated);
      }
      res.assignment.entries.emplace_back(j.at("pair_id").get<std::string>(), std::move(l));
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecord(path.string(), line_no, e.what());
    }
  }
  return res;
}

CategoryEmbedding category_embedding(const std::string& label, const WordVectors& wv) {
  CategoryEmbedding out;
  out.value.assign(wv.dim(), 0.0);
  if (const auto v = wv.lookup(label); !v.empty()) {
    out.value.assign(v.begin(), v.end());
    return out;
  }
  std::size_t n = 0;
  for (const auto& tok : split_underscore(label)) {
    const auto v = wv.lookup(tok);
    if (v.empty()) continue;
    for (std::size_t k = 0; k < wv.dim(); ++k) out.value[k] += v[k];
    ++n;
  }
  if (n == 0) {
    out.empty = true;
    return out;
  }
  for (auto& x : out.value) x /= static_cast<double>(n);
  return out;
}

}  // namespace seje
