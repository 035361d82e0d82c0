#include <cmath>

#include <gtest/gtest.h>

#include "seje/pipeline.hpp"
#include "support.hpp"

namespace seje {
namespace {

SyntheticCorpus small_corpus() {
  SyntheticSpec s;
  s.n_pairs = 160;
  s.n_categories = 8;
  s.n_test = 40;
  s.n_val = 20;
  s.seed = 3;
  return generate_synthetic(s);
}

PipelineConfig small_pipeline() {
  PipelineConfig pc;
  pc.cbow.dim = 16;
  pc.cbow.epochs = 2;
  return pc;
}

TEST(Pipeline, SplitsAndWidths) {
  const PreparedCorpus p = prepare_synthetic(small_corpus(), small_pipeline());
  EXPECT_EQ(p.data.train.size(), 100u);
  EXPECT_EQ(p.data.val.size(), 20u);
  EXPECT_EQ(p.data.test.size(), 40u);
  for (const auto& x : p.data.train) {
    EXPECT_EQ(x.term_feature.size(), 16u);
    EXPECT_EQ(x.sentence_mean.size(), 16u);
    EXPECT_EQ(x.category_feature.size(), 16u);
    EXPECT_LT(x.category, p.data.n_categories);
  }
}

TEST(Pipeline, WhitenedTrainFeaturesAreDecorrelated) {
  const PreparedCorpus p = prepare_synthetic(small_corpus(), small_pipeline());
  const auto& train = p.data.train;
  const std::size_t n = train.size(), d = train.front().pixel.size();
  std::vector<double> mean(d, 0.0);
  for (const auto& x : train) {
    for (std::size_t k = 0; k < d; ++k) mean[k] += x.pixel[k] / n;
  }
  for (std::size_t k = 0; k < d; ++k) EXPECT_NEAR(mean[k], 0.0, 1e-9);
  // Covariance close to identity (shrunk slightly by the eigenvalue floor).
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      double c = 0.0;
      for (const auto& x : train) c += x.pixel[a] * x.pixel[b] / n;
      EXPECT_NEAR(c, a == b ? 1.0 : 0.0, 0.02) << a << "," << b;
    }
  }
}

TEST(Pipeline, WhiteningCanBeDisabled) {
  PipelineConfig pc = small_pipeline();
  pc.whiten_eps = -1.0;
  const PreparedCorpus p = prepare_synthetic(small_corpus(), pc);
  EXPECT_TRUE(p.scaler.pixel.whiten.empty());
  EXPECT_FALSE(p.scaler.pixel.mean.empty());
}

TEST(Pipeline, Deterministic) {
  const PreparedCorpus a = prepare_synthetic(small_corpus(), small_pipeline());
  const PreparedCorpus b = prepare_synthetic(small_corpus(), small_pipeline());
  EXPECT_EQ(a.data.train, b.data.train);
  EXPECT_EQ(a.data.test, b.data.test);
}

TEST(Pipeline, RatersShareKeyTermsButNotWeights) {
  const SyntheticCorpus sc = small_corpus();
  PipelineConfig pc = small_pipeline();
  const PreparedCorpus tfidf = prepare_synthetic(sc, pc);
  pc.rater = Rater::textrank;
  const PreparedCorpus textrank = prepare_synthetic(sc, pc);
  EXPECT_EQ(tfidf.terms.terms, textrank.terms.terms);
  EXPECT_NE(tfidf.weights, textrank.weights);
  for (const auto& w : textrank.weights) EXPECT_NEAR(w.sum(), 1.0, 1e-9);
}

TEST(Pipeline, ThresholdFiltersWeights) {
  const SyntheticCorpus sc = small_corpus();
  PipelineConfig pc = small_pipeline();
  const PreparedCorpus unfiltered = prepare_synthetic(sc, pc);
  pc.term_threshold = 0.15;
  const PreparedCorpus p = prepare_synthetic(sc, pc);
  std::size_t fallbacks = 0;
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const auto& w = p.weights[i];
    EXPECT_NEAR(w.sum(), 1.0, 1e-9);
    bool all_below = true;
    for (const auto& [t, v] : unfiltered.weights[i].weights) all_below = all_below && v < 0.15;
    if (all_below) {
      // Nothing survives the cut, so the recipe keeps every term.
      EXPECT_EQ(w, unfiltered.weights[i]);
      ++fallbacks;
      continue;
    }
    for (const auto& [t, v] : w.weights) EXPECT_GE(v, 0.15) << t;
    EXPECT_LE(w.weights.size(), unfiltered.weights[i].weights.size());
  }
  EXPECT_EQ(fallbacks, p.filter_fallbacks);
}

TEST(Pipeline, DatasetRoundTrip) {
  testing::TempDir dir("dataset");
  const PreparedCorpus p = prepare_synthetic(small_corpus(), small_pipeline());
  save_dataset(p.data, dir.path());
  const Dataset back = load_dataset(dir.path());
  EXPECT_EQ(back.train, p.data.train);
  EXPECT_EQ(back.val, p.data.val);
  EXPECT_EQ(back.test, p.data.test);
  EXPECT_EQ(back.n_categories, p.data.n_categories);
}

TEST(Pipeline, TokenStreamsJoinEntities) {
  const SyntheticCorpus sc = small_corpus();
  const Lexicons lex = Lexicons::from_lists(sc.ingredient_entities, sc.utensils, sc.actions);
  const auto streams = token_streams(sc.corpus, lex);
  ASSERT_EQ(streams.size(), sc.corpus.recipes.size());
  bool joined = false;
  for (const auto& s : streams) {
    for (const auto& t : s) joined = joined || t.find('_') != std::string::npos;
  }
  EXPECT_TRUE(joined);
}

}  // namespace
}  // namespace seje
