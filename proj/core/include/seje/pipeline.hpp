#pragma once

// Glue that turns a corpus into training examples: token streams for word
// vectors, key terms and their weights, category labels, and the per-pair
// feature vectors consumed by the trainer.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seje/catassign.hpp"
#include "seje/corpus.hpp"
#include "seje/textfeat.hpp"
#include "seje/trainer.hpp"
#include "seje/wordvec.hpp"

namespace seje {

enum class Rater { tfidf, textrank, external };
const char* to_string(Rater r);
Rater parse_rater(const std::string& s);

// One token stream per recipe (title, ingredient lines, then instruction
// sentences), with ingredient entities joined into single tokens.
std::vector<Tokens> token_streams(const Corpus& corpus, const Lexicons& lex);

struct RecipeTerms {
  std::vector<std::vector<KeyTerm>> terms;  // parallel to corpus.recipes
  TermLists lists;                          // surfaces only
};
RecipeTerms extract_all_terms(const Corpus& corpus, const Lexicons& lex);

// Rater::external is handled by prepare(), which reads scores from a file.
std::vector<TermWeights> rate_terms(const TermLists& lists, Rater rater, const TextRankParams& params = {});

// Instruction sentences mapped to word vectors, in recipe order.
std::vector<std::vector<double>> sentence_vectors(const Recipe& recipe, const Lexicons& lex, const WordVectors& wv);

struct Dataset {
  std::vector<PairExample> train;
  std::vector<PairExample> val;
  std::vector<PairExample> test;
  std::size_t n_categories = 0;
  std::size_t empty_term_features = 0;  // pairs whose key terms were all out of vocabulary
};

// `weights` is parallel to corpus.recipes and already filtered.
Dataset build_dataset(const Corpus& corpus, const Lexicons& lex, const WordVectors& wv, const RecipeTerms& terms,
                      const std::vector<TermWeights>& weights, const CategoryResult& categories);

// Each feature block is standardized per dimension and then ZCA-whitened:
// x -> W ((x - mean) * scale) with W = V (L + eps)^-1/2 V^T from the train
// covariance of the standardized block.
struct FeatureScaler {
  struct Block {
    std::vector<double> mean;
    std::vector<double> scale;   // 1 / std, or 1 for constant dimensions
    std::vector<double> whiten;  // dim x dim, row-major; empty means identity
  };
  Block term, sentence, pixel, category;

  void apply(PairExample& ex) const;
  void apply(std::vector<PairExample>& xs) const;
};

FeatureScaler fit_scaler(const std::vector<PairExample>& train, double whiten_eps = 1e-3);
std::string scaler_json(const FeatureScaler& s);

// One directory per dataset: dataset.json, then for each split
// <split>.jsonl (pair_id, category) and f64 matrices <split>.term.bin,
// <split>.sentence.bin, <split>.pixel.bin, <split>.catfeat.bin.
void save_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

struct PipelineConfig {
  CbowConfig cbow;
  Rater rater = Rater::tfidf;
  double term_threshold = 0.0;
  TextRankParams textrank;
  std::filesystem::path external_scores;  // "recipe_id term score" lines, for Rater::external
  std::size_t bigram_min_freq = 2;
  double whiten_eps = 1e-3;  // < 0 disables whitening
};

struct PreparedCorpus {
  WordVectors wv;
  CategoryResult categories;
  RecipeTerms terms;
  std::vector<TermWeights> weights;  // after filtering
  Dataset data;  // standardized with `scaler`
  FeatureScaler scaler;
  std::size_t filter_fallbacks = 0;  // recipes where the threshold removed every term
};

PreparedCorpus prepare(const Corpus& corpus, const Lexicons& lex, const std::vector<std::string>& curated_labels,
                       const PipelineConfig& cfg);
// Same, with word vectors supplied instead of trained.
PreparedCorpus prepare(const Corpus& corpus, const Lexicons& lex, const std::vector<std::string>& curated_labels,
                       const PipelineConfig& cfg, WordVectors wv);

// The synthetic corpus with its own lexicons and its dish labels as the
// curated label list.
PreparedCorpus prepare_synthetic(const SyntheticCorpus& synth, const PipelineConfig& cfg);

}  // namespace seje
