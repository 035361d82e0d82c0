#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "seje/corpus.hpp"
#include "seje/text.hpp"
#include "seje/wordvec.hpp"

namespace seje {

using EntitySet = std::set<Tokens>;

struct Lexicons {
  EntitySet ingredient_entities;
  std::set<std::string> utensil_nouns;
  std::set<std::string> action_verbs;

  // Entries may be written with spaces or underscores; they are lowercased
  // and stored as token sequences.
  static Lexicons from_lists(const std::vector<std::string>& ingredients, const std::vector<std::string>& utensils,
                             const std::vector<std::string>& actions);
  static Lexicons load(const std::filesystem::path& ingredients, const std::filesystem::path& utensils,
                       const std::filesystem::path& actions);

  std::size_t longest_entity() const;
};

// One entry per line, blank lines and '#' comments skipped.
std::vector<std::string> read_word_list(const std::filesystem::path& path);

enum class TermKind { ingredient, utensil, action };
const char* to_string(TermKind k);

struct KeyTerm {
  std::string surface;  // underscore-joined
  TermKind kind = TermKind::ingredient;
  bool recovered = false;

  bool operator==(const KeyTerm&) const = default;
};

// Decides whether a lexicon match is a real ingredient entity.
using Verifier = std::function<bool(std::span<const std::string>)>;
Verifier accept_all_verifier();

// Greedy longest match of `entities` at every position of `tokens`.
// Returns (start, length) of each match, left to right, non-overlapping.
std::vector<std::pair<std::size_t, std::size_t>> match_entities(std::span<const std::string> tokens,
                                                               const EntitySet& entities, std::size_t max_len);

// Replaces every ingredient-entity match with its underscore-joined form.
Tokens join_entities(std::span<const std::string> tokens, const Lexicons& lex);

// Every lexicon span in the corpus' ingredient lines that passes `verifier`.
EntitySet collect_accepted_entities(std::span<const Recipe> recipes, const Lexicons& lex, const Verifier& verifier);

// Ingredients come from the ingredient lines (verified lexicon matches, plus
// spans recovered from rejected matches via `global_entities`); utensils and
// actions come from the title and instructions after the recipe's own
// ingredient entities are removed. First occurrence wins on duplicates.
std::vector<KeyTerm> extract_key_terms(const Recipe& recipe, const Lexicons& lex, const Verifier& verifier,
                                       const EntitySet& global_entities);

struct TermWeights {
  std::map<std::string, double> weights;

  bool operator==(const TermWeights&) const = default;
  double sum() const;
};

// Normalizes to sum 1; all-zero input becomes uniform.
TermWeights normalize(std::map<std::string, double> raw);

using TermLists = std::vector<std::vector<std::string>>;

// tf(t, d) * ln(N / df(t)) with tf = count / |d|. Unnormalized.
std::vector<std::map<std::string, double>> tfidf_raw(const TermLists& all_recipe_terms);
std::vector<TermWeights> tfidf_weights(const TermLists& all_recipe_terms);

struct TextRankParams {
  std::size_t window = 4;
  double damping = 0.85;
  double tol = 1e-6;
  std::size_t max_iters = 100;
};

struct TextRankResult {
  std::map<std::string, double> scores;
  std::size_t iterations = 0;
  // Sum of scores after each iteration.
  std::vector<double> totals;
};

// Weighted PageRank over one co-occurrence graph spanning all recipes.
// Terms closer than `window` positions within a recipe share an edge whose
// weight counts the co-occurrences.
TextRankResult textrank(const TermLists& all_recipe_terms, const TextRankParams& params);
std::map<std::string, double> textrank_scores(const TermLists& all_recipe_terms, const TextRankParams& params);

// Restricts global scores to each recipe's terms and normalizes.
std::vector<TermWeights> per_recipe_weights(const TermLists& all_recipe_terms,
                                            const std::map<std::string, double>& scores);

// Lines "recipe_id term score". Negative scores clamp to 0. The result is
// parallel to `recipe_ids`; recipes without lines get empty weights.
std::vector<TermWeights> external_term_scores(const std::filesystem::path& path,
                                              std::span<const std::string> recipe_ids);
std::vector<TermWeights> parse_external_term_scores(std::istream& in, std::span<const std::string> recipe_ids);

// Drops normalized weights below `threshold` and renormalizes. If nothing
// survives, `tw` is returned unchanged.
TermWeights filter_terms(const TermWeights& tw, double threshold);

struct TermFeature {
  std::vector<double> value;
  bool empty = false;  // no term was in vocabulary
};

TermFeature weighted_term_feature(std::span<const KeyTerm> terms, const TermWeights& tw, const WordVectors& wv);

// {"recipe_id": ..., "terms": [{"surface", "kind", "recovered", "weight"}...]}
std::string term_weights_json(const std::string& recipe_id, std::span<const KeyTerm> terms, const TermWeights& tw);

}  // namespace seje
