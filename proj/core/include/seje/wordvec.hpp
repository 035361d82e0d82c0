#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "seje/text.hpp"

namespace seje {

class WordVectors {
 public:
  WordVectors() = default;
  WordVectors(std::vector<std::string> tokens, std::vector<double> matrix, std::size_t dim);

  std::size_t size() const { return tokens_.size(); }
  std::size_t dim() const { return dim_; }

  bool contains(const std::string& token) const { return index_.contains(token); }
  std::optional<std::size_t> index_of(const std::string& token) const;

  // Row for `token`; empty span when out of vocabulary.
  std::span<const double> lookup(const std::string& token) const;
  std::span<const double> row(std::size_t i) const { return {matrix_.data() + i * dim_, dim_}; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<double>& matrix() const { return matrix_; }

  double cosine(const std::string& a, const std::string& b) const;

  // word2vec text format: "count dim" header, then "token v1 ... vD" lines.
  void save_text(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> tokens_;
  std::vector<double> matrix_;
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

struct CbowConfig {
  std::size_t dim = 64;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr_start = 0.025;
  std::size_t min_count = 1;
  std::uint64_t seed = 1;
};

void validate(const CbowConfig& cfg);

struct CbowResult {
  WordVectors vectors;
  // Mean negative-sampling log loss per epoch.
  std::vector<double> epoch_loss;
};

// CBOW with negative sampling. The context vector is the mean of the window
// vectors; negatives are drawn from the unigram distribution raised to 0.75;
// the learning rate decays linearly from lr_start to lr_start/100.
CbowResult train_cbow(const std::vector<Tokens>& token_streams, const CbowConfig& cfg);

struct Word2VecLoad {
  WordVectors vectors;
  // Number of duplicate tokens that were overwritten (last one wins).
  std::size_t duplicates = 0;
};

Word2VecLoad load_word2vec_text(const std::filesystem::path& path);
Word2VecLoad parse_word2vec_text(std::istream& in);

struct SentenceVector {
  std::vector<double> value;
  // True when no token was in vocabulary (value is then all zeros).
  bool empty = false;
};

SentenceVector sentence_vector(std::span<const std::string> sentence_tokens, const WordVectors& wv);

}  // namespace seje
