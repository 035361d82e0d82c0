#include <sstream>

#include <gtest/gtest.h>

#include "seje/error.hpp"
#include "seje/wordvec.hpp"
#include "support.hpp"

namespace seje {
namespace {

std::vector<Tokens> kitchen_streams() {
  std::vector<Tokens> s;
  for (int i = 0; i < 150; ++i) {
    s.push_back({"season", "the", "soup", "with", "salt", "then", "stir", "well"});
    s.push_back({"season", "the", "soup", "with", "pepper", "then", "stir", "well"});
    s.push_back({"bake", "the", "bread", "in", "oven", "until", "golden", "brown"});
  }
  return s;
}

CbowConfig small_cfg() {
  CbowConfig c;
  c.dim = 16;
  c.window = 2;
  c.epochs = 5;
  c.seed = 1;
  return c;
}

TEST(Cbow, SharedContextsMeanCloserVectors) {
  const CbowResult r = train_cbow(kitchen_streams(), small_cfg());
  EXPECT_GT(r.vectors.cosine("salt", "pepper"), r.vectors.cosine("salt", "oven"));
}

TEST(Cbow, Deterministic) {
  const CbowResult a = train_cbow(kitchen_streams(), small_cfg());
  const CbowResult b = train_cbow(kitchen_streams(), small_cfg());
  EXPECT_EQ(a.vectors.matrix(), b.vectors.matrix());
  EXPECT_EQ(a.vectors.tokens(), b.vectors.tokens());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
}

TEST(Cbow, LossDecreases) {
  const CbowResult r = train_cbow(kitchen_streams(), small_cfg());
  ASSERT_EQ(r.epoch_loss.size(), 5u);
  EXPECT_LE(r.epoch_loss.back(), r.epoch_loss.front());
}

TEST(Cbow, MinCountDropsRareTokens) {
  auto s = kitchen_streams();
  s[0].push_back("rare");
  s[1].push_back("rare");
  CbowConfig cfg = small_cfg();
  cfg.min_count = 5;
  cfg.epochs = 1;
  const CbowResult r = train_cbow(s, cfg);
  EXPECT_FALSE(r.vectors.contains("rare"));
  EXPECT_TRUE(r.vectors.contains("salt"));
}

TEST(Cbow, Errors) {
  EXPECT_THROW(train_cbow({}, small_cfg()), EmptyCorpus);
  EXPECT_THROW(train_cbow({{"salt", "salt"}}, small_cfg()), VocabularyTooSmall);
  CbowConfig bad = small_cfg();
  bad.window = 0;
  EXPECT_THROW(train_cbow(kitchen_streams(), bad), ValidationError);
}

TEST(Word2VecText, ParsesRowsExactly) {
  std::istringstream in("salt 0.1 0.2\npepper -3.5 1e-3\n");
  const Word2VecLoad w = parse_word2vec_text(in);
  const auto v = w.vectors.lookup("salt");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0], 0.1);
  EXPECT_EQ(v[1], 0.2);
  EXPECT_EQ(w.vectors.lookup("pepper")[1], 1e-3);
  EXPECT_TRUE(w.vectors.lookup("oven").empty());
}

TEST(Word2VecText, HeaderAndDuplicates) {
  std::istringstream in("2 3\nsalt 1 2 3\npepper 4 5 6\n");
  EXPECT_EQ(parse_word2vec_text(in).vectors.size(), 2u);
  std::istringstream dup("salt 1 2\nsalt 3 4\n");
  const Word2VecLoad w = parse_word2vec_text(dup);
  EXPECT_EQ(w.duplicates, 1u);
  EXPECT_EQ(w.vectors.size(), 1u);
  EXPECT_EQ(w.vectors.lookup("salt")[0], 3.0);
}

TEST(Word2VecText, Errors) {
  std::istringstream ragged("a 1 2 3\nb 1 2 3 4\n");
  EXPECT_THROW(parse_word2vec_text(ragged), RaggedRow);
  std::istringstream text("a 1 x\n");
  EXPECT_THROW(parse_word2vec_text(text), NonNumericField);
}

TEST(Word2VecText, SaveLoadRoundTrip) {
  testing::TempDir dir("w2v");
  const CbowResult r = train_cbow(kitchen_streams(), small_cfg());
  r.vectors.save_text(dir / "v.txt");
  const Word2VecLoad back = load_word2vec_text(dir / "v.txt");
  EXPECT_EQ(back.vectors.tokens(), r.vectors.tokens());
  EXPECT_EQ(back.vectors.matrix(), r.vectors.matrix());
}

TEST(SentenceVector, MeanOfInVocabularyTokens) {
  const WordVectors wv({"a", "b"}, {1.0, 2.0, 3.0, 6.0}, 2);
  const Tokens one{"a"}, two{"a", "zz", "b"}, swapped{"b", "a"}, none{"x", "y"};
  EXPECT_EQ(sentence_vector(one, wv).value, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(sentence_vector(two, wv).value, (std::vector<double>{2.0, 4.0}));
  EXPECT_EQ(sentence_vector(swapped, wv).value, sentence_vector(two, wv).value);
  const SentenceVector empty = sentence_vector(none, wv);
  EXPECT_TRUE(empty.empty);
  EXPECT_EQ(empty.value, (std::vector<double>{0.0, 0.0}));
}

TEST(SentenceVector, PermutationInvariantBitForBit) {
  const CbowResult r = train_cbow(kitchen_streams(), small_cfg());
  Tokens s{"season", "soup", "salt", "stir", "golden"};
  const auto base = sentence_vector(s, r.vectors).value;
  std::sort(s.begin(), s.end());
  do {
    EXPECT_EQ(sentence_vector(s, r.vectors).value, base);
  } while (std::next_permutation(s.begin(), s.end()));
}

}  // namespace
}  // namespace seje
