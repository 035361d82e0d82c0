#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seje/corpus.hpp"
#include "seje/wordvec.hpp"

namespace seje {

enum class LabelSource { curated, bigram };

struct CategorySpace {
  std::vector<std::string> labels;
  std::vector<LabelSource> source;

  std::size_t size() const { return labels.size(); }
  // Throws ValidationError for an unknown label.
  std::size_t index_of(const std::string& label) const;
};

struct CategoryLabel {
  std::string label;
  int step = 0;  // 1..4: which rule assigned it

  bool operator==(const CategoryLabel&) const = default;
};

struct CategoryAssignment {
  // pair id -> label, in manifest order.
  std::vector<std::pair<std::string, CategoryLabel>> entries;

  const CategoryLabel& at(const std::string& pair_id) const;
  std::size_t size() const { return entries.size(); }
};

struct CategoryResult {
  CategorySpace space;
  CategoryAssignment assignment;
};

// 1. title contains a curated label (longest, then lexicographic);
// 2. title contains a title bigram with frequency >= bigram_min_freq
//    (most frequent first, ties lexicographic);
// 3. ingredient then instruction text contains a curated label, then a
//    retained bigram;
// 4. the image classifier's top-1 label from `image_topcats`.
// Labels are lowercase with underscores joining words.
CategoryResult assign_categories(const Corpus& corpus, const std::vector<std::string>& curated_labels,
                                 std::size_t bigram_min_freq,
                                 const std::map<std::string, std::string>& image_topcats);

// Top-1 image label for every pair, from the corpus' category probabilities.
std::map<std::string, std::string> image_top_categories(const Corpus& corpus);

// Title bigram frequencies over the whole corpus ("stew_pot" -> count).
std::map<std::string, std::size_t> title_bigram_counts(const Corpus& corpus);

// JSONL lines {"pair_id", "label", "step"}.
void save_assignment(const CategoryResult& result, const std::filesystem::path& path);
CategoryResult load_assignment(const std::filesystem::path& path, const std::vector<std::string>& curated_labels);

struct CategoryEmbedding {
  std::vector<double> value;
  bool empty = false;
};

// Joined token if it is in vocabulary, otherwise the mean of the label's
// word vectors.
CategoryEmbedding category_embedding(const std::string& label, const WordVectors& wv);

}  // namespace seje
