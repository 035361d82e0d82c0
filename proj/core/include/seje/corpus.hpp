#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace seje {

struct Recipe {
  std::string id;
  std::string title;
  std::vector<std::string> ingredient_lines;
  std::vector<std::string> instruction_sentences;

  bool operator==(const Recipe&) const = default;
};

// Precomputed image side: pixel features plus a probability vector over the
// image-category labels of the corpus.
struct ImageFeatures {
  std::string id;
  std::vector<double> pixel_feature;
  std::vector<double> category_probs;

  bool operator==(const ImageFeatures&) const = default;
};

enum class Split { train, val, test };

const char* to_string(Split s);
Split parse_split(const std::string& s);

struct Pair {
  std::string recipe_id;
  std::string image_id;
  Split split = Split::train;

  // Pairs are keyed by recipe id (one image per recipe).
  const std::string& pair_id() const { return recipe_id; }

  bool operator==(const Pair&) const = default;
};

struct PairManifest {
  std::vector<Pair> pairs;

  bool operator==(const PairManifest&) const = default;
};

struct Corpus {
  std::vector<Recipe> recipes;
  std::vector<ImageFeatures> images;
  PairManifest manifest;
  // Names for the entries of ImageFeatures::category_probs.
  std::vector<std::string> image_category_labels;

  bool operator==(const Corpus&) const = default;

  const Recipe& recipe(const std::string& id) const;
  const ImageFeatures& image(const std::string& id) const;
  // Label with the highest probability for an image (lowest index on ties).
  const std::string& image_top_category(const ImageFeatures& img) const;
};

// Checks every corpus invariant; throws MalformedRecord, DanglingReference,
// DimensionMismatch or ValidationError.
void validate_corpus(const Corpus& corpus);

// Sidecar files that accompany an image feature matrix `images.bin`:
//   images.ids            one image id per line, row order
//   images.catprobs.bin   category probability matrix (same row order)
//   images.catlabels      one category label per line, column order
struct ImageFilePaths {
  std::filesystem::path pixels;
  std::filesystem::path ids;
  std::filesystem::path category_probs;
  std::filesystem::path category_labels;
};
ImageFilePaths image_file_paths(const std::filesystem::path& pixels_path);

Corpus load_corpus(const std::filesystem::path& recipes_path, const std::filesystem::path& images_path,
                   const std::filesystem::path& manifest_path);

std::vector<Recipe> load_recipes(const std::filesystem::path& recipes_path);

// Writes recipes.jsonl, images.bin (+ sidecars) and manifest.jsonl into `dir`.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);

struct SyntheticSpec {
  std::size_t n_pairs = 600;
  std::size_t n_categories = 10;
  std::size_t latent_dim = 16;
  double noise_sigma = 0.1;
  std::uint64_t seed = 1;
  // Held-out pairs; the remainder is train. The last pairs in generation
  // order go to test, the ones before them to val.
  std::size_t n_test = 200;
  std::size_t n_val = 0;
};

void validate(const SyntheticSpec& spec);

struct SyntheticCorpus {
  Corpus corpus;
  // Dish labels, one per generated category (lowercase, underscore-joined).
  std::vector<std::string> category_labels;
  // Category index of each recipe, parallel to corpus.recipes.
  std::vector<std::size_t> true_category;
  // Lexicons covering the generated text.
  std::vector<std::string> ingredient_entities;
  std::vector<std::string> utensils;
  std::vector<std::string> actions;
};

// Each category gets a latent prototype; a pair's pixel feature is the
// prototype plus N(0, noise_sigma^2) noise. Recipe text mixes 5 exclusive
// signature ingredients per category, a shared common pool, and instance
// modifier terms selected from the strongest coordinates of the pair's noise
// vector, so text and pixels share both category and instance structure.
// Pure function of `spec`.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec);

}  // namespace seje
