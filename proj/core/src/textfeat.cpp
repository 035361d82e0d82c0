#include "seje/textfeat.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_map>

#include "seje/error.hpp"

namespace seje {

namespace {

Tokens entry_tokens(const std::string& entry) {
  std::string spaced = entry;
  std::replace(spaced.begin(), spaced.end(), '_', ' ');
  return tokenize(spaced);
}

}  // namespace

std::vector<std::string> read_word_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    out.push_back(t);
  }
  return out;
}

Lexicons Lexicons::from_lists(const std::vector<std::string>& ingredients, const std::vector<std::string>& utensils,
                              const std::vector<std::string>& actions) {
  Lexicons lex;
  for (const auto& e : ingredients) {
    Tokens t = entry_tokens(e);
    if (!t.empty()) lex.ingredient_entities.insert(std::move(t));
  }
  for (const auto& u : utensils) {
    for (auto& t : entry_tokens(u)) lex.utensil_nouns.insert(t);
  }
  for (const auto& a : actions) {
    for (auto& t : entry_tokens(a)) lex.action_verbs.insert(t);
  }
  return lex;
}

Lexicons Lexicons::load(const std::filesystem::path& ingredients, const std::filesystem::path& utensils,
                        const std::filesystem::path& actions) {
  return from_lists(read_word_list(ingredients), read_word_list(utensils), read_word_list(actions));
}

std::size_t Lexicons::longest_entity() const {
  std::size_t m = 0;
  for (const auto& e : ingredient_entities) m = std::max(m, e.size());
  return m;
}

const char* to_string(TermKind k) {
  switch (k) {
    case TermKind::ingredient:
      return "ingredient";
    case TermKind::utensil:
      return "utensil";
    case TermKind::action:
      return "action";
  }
  return "ingredient";
}

Verifier accept_all_verifier() {
  return [](std::span<const std::string>) { return true; };
}

std::vector<std::pair<std::size_t, std::size_t>> match_entities(std::span<const std::string> tokens,
                                                               const EntitySet& entities, std::size_t max_len) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t best = 0;
    const std::size_t limit = std::min(max_len, tokens.size() - i);
    for (std::size_t len = limit; len >= 1; --len) {
      if (entities.contains(Tokens(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + len)))) {
        best = len;
        break;
      }
    }
    if (best == 0) {
      ++i;
      continue;
    }
    out.emplace_back(i, best);
    i += best;
  }
  return out;
}

Tokens join_entities(std::span<const std::string> tokens, const Lexicons& lex) {
  Tokens out;
  std::size_t pos = 0;
  for (auto [start, len] : match_entities(tokens, lex.ingredient_entities, lex.longest_entity())) {
    for (; pos < start; ++pos) out.push_back(tokens[pos]);
    out.push_back(join(tokens.subspan(start, len), "_"));
    pos = start + len;
  }
  for (; pos < tokens.size(); ++pos) out.push_back(tokens[pos]);
  return out;
}

EntitySet collect_accepted_entities(std::span<const Recipe> recipes, const Lexicons& lex, const Verifier& verifier) {
  EntitySet out;
  const std::size_t max_len = lex.longest_entity();
  for (const auto& r : recipes) {
    for (const auto& line : r.ingredient_lines) {
      const Tokens toks = tokenize(line);
      for (auto [start, len] : match_entities(toks, lex.ingredient_entities, max_len)) {
        const std::span<const std::string> span(toks.data() + start, len);
        if (verifier(span)) out.insert(Tokens(span.begin(), span.end()));
      }
    }
  }
  return out;
}

namespace {

// Longest contiguous sub-span of `span` found in `entities`; leftmost on ties.
std::optional<Tokens> recover_entity(std::span<const std::string> span, const EntitySet& entities) {
  for (std::size_t len = span.size(); len >= 1; --len) {
    for (std::size_t start = 0; start + len <= span.size(); ++start) {
      Tokens candidate(span.begin() + static_cast<std::ptrdiff_t>(start),
                       span.begin() + static_cast<std::ptrdiff_t>(start + len));
      if (entities.contains(candidate)) return candidate;
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<KeyTerm> extract_key_terms(const Recipe& recipe, const Lexicons& lex, const Verifier& verifier,
                                       const EntitySet& global_entities) {
  std::vector<KeyTerm> out;
  std::set<std::string> seen;
  auto emit = [&](std::string surface, TermKind kind, bool recovered) {
    if (seen.insert(surface).second) out.push_back({std::move(surface), kind, recovered});
  };

  EntitySet own;
  const std::size_t max_len = lex.longest_entity();
  for (const auto& line : recipe.ingredient_lines) {
    const Tokens toks = tokenize(line);
    for (auto [start, len] : match_entities(toks, lex.ingredient_entities, max_len)) {
      const std::span<const std::string> span(toks.data() + start, len);
      if (verifier(span)) {
        own.insert(Tokens(span.begin(), span.end()));
        emit(join(span, "_"), TermKind::ingredient, false);
      } else if (auto rec = recover_entity(span, global_entities)) {
        emit(join(*rec, "_"), TermKind::ingredient, true);
        own.insert(std::move(*rec));
      }
    }
  }

  std::size_t own_max = 0;
  for (const auto& e : own) own_max = std::max(own_max, e.size());
  auto scan = [&](const std::string& text) {
    const Tokens toks = tokenize(text);
    std::vector<bool> removed(toks.size(), false);
    for (auto [start, len] : match_entities(toks, own, own_max)) {
      for (std::size_t k = start; k < start + len; ++k) removed[k] = true;
    }
    for (std::size_t k = 0; k < toks.size(); ++k) {
      if (removed[k]) continue;
      if (lex.utensil_nouns.contains(toks[k])) {
        emit(toks[k], TermKind::utensil, false);
      } else if (lex.action_verbs.contains(toks[k])) {
        emit(toks[k], TermKind::action, false);
      }
    }
  };
  scan(recipe.title);
  for (const auto& s : recipe.instruction_sentences) scan(s);
  return out;
}

double TermWeights::sum() const {
  double s = 0.0;
  for (const auto& [t, w] : weights) s += w;
  return s;
}

TermWeights normalize(std::map<std::string, double> raw) {
  TermWeights tw;
  double total = 0.0;
  for (const auto& [t, w] : raw) total += w;
  for (auto& [t, w] : raw) {
    w = total > 0.0 ? w / total : 1.0 / static_cast<double>(raw.size());
  }
  tw.weights = std::move(raw);
  return tw;
}

std::vector<std::map<std::string, double>> tfidf_raw(const TermLists& all_recipe_terms) {
  const double N = static_cast<double>(all_recipe_terms.size());
  std::map<std::string, std::size_t> df;
  for (std::size_t i = 0; i < all_recipe_terms.size(); ++i) {
    const auto& terms = all_recipe_terms[i];
    if (terms.empty()) throw EmptyRecipeTerms(i);
    const std::set<std::string> distinct(terms.begin(), terms.end());
    for (const auto& t : distinct) ++df[t];
  }
  std::vector<std::map<std::string, double>> out;
  out.reserve(all_recipe_terms.size());
  for (const auto& terms : all_recipe_terms) {
    std::map<std::string, std::size_t> count;
    for (const auto& t : terms) ++count[t];
    const double len = static_cast<double>(terms.size());
    std::map<std::string, double> w;
    for (const auto& [t, c] : count) {
      w[t] = (static_cast<double>(c) / len) * std::log(N / static_cast<double>(df.at(t)));
    }
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<TermWeights> tfidf_weights(const TermLists& all_recipe_terms) {
  std::vector<TermWeights> out;
  for (auto& raw : tfidf_raw(all_recipe_terms)) out.push_back(normalize(std::move(raw)));
  return out;
}

TextRankResult textrank(const TermLists& all_recipe_terms, const TextRankParams& params) {
  if (params.window < 2) throw ValidationError("textrank window must be >= 2");
  if (!(params.damping > 0.0 && params.damping < 1.0)) throw ValidationError("textrank damping must be in (0, 1)");

  std::map<std::string, std::size_t> node;
  for (const auto& terms : all_recipe_terms) {
    for (const auto& t : terms) node.emplace(t, 0);
  }
  if (node.empty()) throw NoTerms();
  std::vector<std::string> names;
  for (auto& [t, id] : node) {
    id = names.size();
    names.push_back(t);
  }
  const std::size_t n = names.size();

  // Sparse symmetric adjacency; std::map keeps neighbor order fixed.
  std::vector<std::map<std::size_t, double>> adj(n);
  for (const auto& terms : all_recipe_terms) {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      for (std::size_t j = i + 1; j < terms.size() && j - i < params.window; ++j) {
        const std::size_t a = node.at(terms[i]);
        const std::size_t b = node.at(terms[j]);
        if (a == b) continue;
        adj[a][b] += 1.0;
        adj[b][a] += 1.0;
      }
    }
  }
  std::vector<double> out_weight(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    for (const auto& [k, w] : adj[j]) out_weight[j] += w;
  }

  TextRankResult res;
  std::vector<double> score(n, 1.0);
  std::vector<double> next(n);
  const double d = params.damping;
  for (std::size_t it = 0; it < params.max_iters; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double acc = 0.0;
      for (const auto& [j, w] : adj[i]) acc += w / out_weight[j] * score[j];
      next[i] = (1.0 - d) + d * acc;
    }
    double change = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      change += std::abs(next[i] - score[i]);
      total += next[i];
    }
    score.swap(next);
    res.iterations = it + 1;
    res.totals.push_back(total);
    if (change < params.tol) break;
  }
  for (std::size_t i = 0; i < n; ++i) res.scores.emplace(names[i], score[i]);
  return res;
}

std::map<std::string, double> textrank_scores(const TermLists& all_recipe_terms, const TextRankParams& params) {
  return textrank(all_recipe_terms, params).scores;
}

std::vector<TermWeights> per_recipe_weights(const TermLists& all_recipe_terms,
                                            const std::map<std::string, double>& scores) {
  std::vector<TermWeights> out;
  for (std::size_t i = 0; i < all_recipe_terms.size(); ++i) {
    if (all_recipe_terms[i].empty()) throw EmptyRecipeTerms(i);
    std::map<std::string, double> raw;
    for (const auto& t : all_recipe_terms[i]) {
      const auto it = scores.find(t);
      raw[t] = it == scores.end() ? 0.0 : it->second;
    }
    out.push_back(normalize(std::move(raw)));
  }
  return out;
}

std::vector<TermWeights> parse_external_term_scores(std::istream& in, std::span<const std::string> recipe_ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < recipe_ids.size(); ++i) index.emplace(recipe_ids[i], i);
  std::vector<std::map<std::string, double>> raw(recipe_ids.size());

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string id, term, score_text;
    if (!(fields >> id)) continue;
    if (!(fields >> term >> score_text)) throw ValidationError("line " + std::to_string(line_no) + ": expected 3 fields");
    const auto it = index.find(id);
    if (it == index.end()) throw UnknownRecipe(id);
    double score = 0.0;
    const char* b = score_text.data();
    const char* e = b + score_text.size();
    if (b != e && *b == '+') ++b;
    const auto res = std::from_chars(b, e, score);
    if (res.ec != std::errc() || res.ptr != e || !std::isfinite(score)) throw NonNumericScore(line_no, score_text);
    raw[it->second][to_lower(term)] = std::max(score, 0.0);
  }
  std::vector<TermWeights> out;
  for (auto& r : raw) out.push_back(r.empty() ? TermWeights{} : normalize(std::move(r)));
  return out;
}

std::vector<TermWeights> external_term_scores(const std::filesystem::path& path,
                                              std::span<const std::string> recipe_ids) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_external_term_scores(in, recipe_ids);
}

TermWeights filter_terms(const TermWeights& tw, double threshold) {
  if (!(threshold >= 0.0)) throw ValidationError("filter threshold must be >= 0");
  std::map<std::string, double> kept;
  for (const auto& [t, w] : tw.weights) {
    if (w >= threshold) kept.emplace(t, w);
  }
  if (kept.empty()) return tw;
  if (kept.size() == tw.weights.size()) return tw;
  return normalize(std::move(kept));
}

TermFeature weighted_term_feature(std::span<const KeyTerm> terms, const TermWeights& tw, const WordVectors& wv) {
  TermFeature out;
  out.value.assign(wv.dim(), 0.0);
  std::vector<std::pair<std::span<const double>, double>> parts;
  double total = 0.0;
  for (const auto& term : terms) {
    const auto w = tw.weights.find(term.surface);
    if (w == tw.weights.end()) continue;
    const auto v = wv.lookup(term.surface);
    if (v.empty()) continue;
    parts.emplace_back(v, w->second);
    total += w->second;
  }
  if (parts.empty()) {
    out.empty = true;
    return out;
  }
  for (const auto& [v, w] : parts) {
    const double scale = total > 0.0 ? w / total : 1.0 / static_cast<double>(parts.size());
    for (std::size_t k = 0; k < wv.dim(); ++k) out.value[k] += scale * v[k];
  }
  return out;
}

std::string term_weights_json(const std::string& recipe_id, std::span<const KeyTerm> terms, const TermWeights& tw) {
  nlohmann::json j;
  j["recipe_id"] = recipe_id;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : terms) {
    const auto w = tw.weights.find(t.surface);
    j["terms"].push_back({{"surface", t.surface},
                          {"kind", to_string(t.kind)},
                          {"recovered", t.recovered},
                          {"weight", w == tw.weights.end() ? 0.0 : w->second}});
  }
  return j.dump();
}

}  // namespace seje
