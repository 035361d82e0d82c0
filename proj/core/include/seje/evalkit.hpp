#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace seje {

using Matrix = std::vector<std::vector<double>>;

enum class Direction { im2recipe, recipe2im };
const char* to_string(Direction d);

// Row i of queries and candidates is matched pair i. rank_i is 1 plus the
// number of candidates strictly closer to query i than candidate i, plus
// exact ties at a lower index. `threads` = 0 uses one thread.
std::vector<std::size_t> rank_retrieval(const Matrix& queries, const Matrix& candidates, unsigned threads = 0);

// Mean of the two middle values for an even count.
double median_rank(std::vector<std::size_t> ranks);
double recall_at(std::span<const std::size_t> ranks, std::size_t k);

struct SubsetMetrics {
  double medr = 0.0;
  std::map<std::size_t, double> r_at;
};

struct RetrievalReport {
  Direction direction = Direction::im2recipe;
  std::size_t subset_size = 0;
  std::size_t n_subsets = 0;
  double medr = 0.0;                   // mean of per-subset medians
  std::map<std::size_t, double> r_at;  // mean over subsets
  std::vector<SubsetMetrics> per_subset;
};

struct Evaluation {
  RetrievalReport im2recipe;
  RetrievalReport recipe2im;
};

// Subsets are drawn without replacement inside each subset; when
// subset_size < M no two subsets are the same set.
std::vector<std::vector<std::size_t>> sample_subsets(std::size_t m, std::size_t subset_size, std::size_t n_subsets,
                                                     std::uint64_t seed);

Evaluation evaluate(const Matrix& recipe_embs, const Matrix& image_embs, std::size_t subset_size,
                    std::size_t n_subsets, std::span<const std::size_t> ks, std::uint64_t seed, unsigned threads = 0);

struct SweepPoint {
  std::size_t size = 0;
  double medr_im2recipe = 0.0;
  double medr_recipe2im = 0.0;
};

// 10 subsets per size, or 1 when the size is the full set.
std::vector<SweepPoint> scalability_sweep(const Matrix& recipe_embs, const Matrix& image_embs,
                                          std::span<const std::size_t> sizes, std::uint64_t seed, unsigned threads = 0);

struct ArithTerm {
  std::string keyword;
  double sign = 1.0;
};
// "A - B + C" with single-word or multi-word keywords.
std::vector<ArithTerm> parse_arith_expression(const std::string& expr);

struct ArithHit {
  std::string id;
  double distance = 0.0;
};

// query = sum of sign * mean(embeddings whose title contains the keyword,
// case-insensitive); returns the k nearest ids by Euclidean distance, ties
// by position. Throws KeywordNotFound.
std::vector<ArithHit> vector_arith(std::span<const std::string> ids, const Matrix& embs,
                                   std::span<const std::string> titles, const std::string& expr, std::size_t k);

std::string report_json(const Evaluation& e);
void write_report_csv(const std::filesystem::path& path, const Evaluation& e);
std::string sweep_json(std::span<const SweepPoint> points);

// Embedding dump: f32 matrix file plus "<path>.ids", one id per line.
void save_embeddings(const std::filesystem::path& path, std::span<const std::string> ids, const Matrix& embs);
struct EmbeddingDump {
  std::vector<std::string> ids;
  Matrix embs;
};
EmbeddingDump load_embeddings(const std::filesystem::path& path);

}  // namespace seje
