#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "seje/error.hpp"
#include "seje/textfeat.hpp"

namespace seje {
namespace {

Recipe recipe(std::vector<std::string> ingredients, std::vector<std::string> instructions, std::string title = "") {
  return {"r1", std::move(title), std::move(ingredients), std::move(instructions)};
}

TEST(Tokenize, LowercasesAndSplits) {
  EXPECT_EQ(tokenize("1 Cup Red-Wine, chilled!"), (Tokens{"1", "cup", "red", "wine", "chilled"}));
}

TEST(KeyTerms, MultiwordIngredient) {
  const Lexicons lex = Lexicons::from_lists({"red wine", "wine"}, {}, {});
  const auto terms = extract_key_terms(recipe({"1 cup red wine"}, {}), lex, accept_all_verifier(), {});
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0], (KeyTerm{"red_wine", TermKind::ingredient, false}));
}

TEST(KeyTerms, RecoversRejectedSpanFromGlobalEntities) {
  const Lexicons lex = Lexicons::from_lists({"fresh pitted dates"}, {}, {});
  const Verifier reject_long = [](std::span<const std::string> span) { return span.size() < 3; };
  const EntitySet global{{"pitted", "dates"}};
  const auto terms = extract_key_terms(recipe({"1 cup fresh pitted dates"}, {}), lex, reject_long, global);
  ASSERT_EQ(terms.size(), 1u);
  EXPECT_EQ(terms[0], (KeyTerm{"pitted_dates", TermKind::ingredient, true}));
}

TEST(KeyTerms, UtensilsAndActions) {
  const Lexicons lex = Lexicons::from_lists({}, {"oven"}, {"blend"});
  const auto terms = extract_key_terms(recipe({}, {"blend in the oven"}), lex, accept_all_verifier(), {});
  ASSERT_EQ(terms.size(), 2u);
  EXPECT_EQ(terms[0], (KeyTerm{"blend", TermKind::action, false}));
  EXPECT_EQ(terms[1], (KeyTerm{"oven", TermKind::utensil, false}));
}

TEST(KeyTerms, IngredientWordsAreNotUtensils) {
  // "pan" belongs to the ingredient "pan dulce" here, so it is not a utensil.
  const Lexicons lex = Lexicons::from_lists({"pan dulce"}, {"pan", "bowl"}, {"slice"});
  const auto terms =
      extract_key_terms(recipe({"1 pan dulce"}, {"slice the pan dulce", "slice into a bowl"}), lex, accept_all_verifier(), {});
  std::vector<std::string> surfaces;
  for (const auto& t : terms) surfaces.push_back(t.surface);
  EXPECT_EQ(surfaces, (std::vector<std::string>{"pan_dulce", "slice", "bowl"}));
}

TEST(KeyTerms, GreedyLongestMatch) {
  const Lexicons lex = Lexicons::from_lists({"olive", "olive oil", "extra virgin olive oil"}, {}, {});
  const Tokens toks = tokenize("2 tbsp extra virgin olive oil and olive");
  const auto m = match_entities(toks, lex.ingredient_entities, lex.longest_entity());
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], (std::pair<std::size_t, std::size_t>{2, 4}));
  EXPECT_EQ(m[1], (std::pair<std::size_t, std::size_t>{7, 1}));
}

TEST(TfIdf, HandComputedFixture) {
  const TermLists lists{{"salt", "chicken"}, {"salt", "chicken", "rice"}, {"salt", "chicken", "artichoke"}};
  // chicken appears everywhere in this fixture; a second one varies df.
  const auto raw = tfidf_raw(lists);
  EXPECT_NEAR(raw[2].at("artichoke"), std::log(3.0) / 3.0, 1e-12);
  EXPECT_NEAR(raw[2].at("artichoke"), 0.3662, 1e-4);
  EXPECT_EQ(raw[0].at("salt"), 0.0);

  const TermLists lists2{{"salt", "chicken"}, {"salt", "chicken", "rice"}, {"salt", "beef", "artichoke"}};
  const auto raw2 = tfidf_raw(lists2);
  EXPECT_NEAR(raw2[0].at("chicken"), 0.5 * std::log(1.5), 1e-12);
  EXPECT_NEAR(raw2[0].at("chicken"), 0.2027, 1e-4);
  EXPECT_NEAR(raw2[1].at("rice"), std::log(3.0) / 3.0, 1e-12);
}

TEST(TfIdf, RepeatedTermsCountInTf) {
  const TermLists lists{{"a", "a", "b"}, {"b"}};
  EXPECT_NEAR(tfidf_raw(lists)[0].at("a"), (2.0 / 3.0) * std::log(2.0), 1e-12);
}

TEST(TfIdf, NormalizedWeightsSumToOne) {
  const TermLists lists{{"salt", "chicken"}, {"salt", "chicken", "rice"}, {"salt", "chicken", "artichoke"}};
  const auto w = tfidf_weights(lists);
  for (const auto& tw : w) EXPECT_NEAR(tw.sum(), 1.0, 1e-9);
  // Recipe 0 holds only zero-idf terms: uniform fallback.
  EXPECT_EQ(w[0].weights.at("salt"), 0.5);
  EXPECT_EQ(w[2].weights.at("artichoke"), 1.0);
}

TEST(TfIdf, EmptyRecipeIsAnError) {
  try {
    tfidf_weights({{"a"}, {}});
    FAIL() << "expected EmptyRecipeTerms";
  } catch (const EmptyRecipeTerms& e) {
    EXPECT_EQ(e.index(), 1u);
  }
}

// Dense weighted PageRank iterated far past convergence.
std::map<std::string, double> pagerank_oracle(const std::map<std::string, std::map<std::string, double>>& w,
                                              double d) {
  std::map<std::string, double> s;
  for (const auto& [k, _] : w) s[k] = 1.0;
  for (int it = 0; it < 5000; ++it) {
    std::map<std::string, double> next;
    for (const auto& [i, _] : w) {
      double acc = 0.0;
      for (const auto& [j, nbrs] : w) {
        const auto e = nbrs.find(i);
        if (e == nbrs.end()) continue;
        double out = 0.0;
        for (const auto& [k, wk] : nbrs) out += wk;
        acc += e->second / out * s[j];
      }
      next[i] = (1.0 - d) + d * acc;
    }
    s = next;
  }
  return s;
}

TextRankParams tight() {
  TextRankParams p;
  p.window = 2;
  p.tol = 1e-14;
  p.max_iters = 100000;
  return p;
}

TEST(TextRank, IsolatedNode) {
  const auto s = textrank_scores({{"a", "b"}, {"z"}}, tight());
  EXPECT_NEAR(s.at("z"), 0.15, 1e-9);
}

TEST(TextRank, SymmetricPair) {
  const auto s = textrank_scores({{"a", "b"}}, tight());
  EXPECT_NEAR(s.at("a"), s.at("b"), 1e-9);
}

TEST(TextRank, PathGraphMatchesPowerIteration) {
  const auto s = textrank_scores({{"a", "b", "c"}}, tight());
  const auto oracle = pagerank_oracle({{"a", {{"b", 1.0}}}, {"b", {{"a", 1.0}, {"c", 1.0}}}, {"c", {{"b", 1.0}}}}, 0.85);
  for (const char* t : {"a", "b", "c"}) EXPECT_NEAR(s.at(t), oracle.at(t), 1e-9) << t;
  EXPECT_GT(s.at("b"), s.at("a"));
  EXPECT_NEAR(s.at("a"), s.at("c"), 1e-12);
}

TEST(TextRank, WeightedGraphMatchesPowerIteration) {
  // Window 3: a-b, a-c, b-c, b-d, c-d from the first recipe; a-b again from
  // the second (count 2); windows never cross recipes.
  TextRankParams p = tight();
  p.window = 3;
  const auto s = textrank_scores({{"a", "b", "c", "d"}, {"a", "b"}}, p);
  const auto oracle = pagerank_oracle({{"a", {{"b", 2.0}, {"c", 1.0}}},
                                       {"b", {{"a", 2.0}, {"c", 1.0}, {"d", 1.0}}},
                                       {"c", {{"a", 1.0}, {"b", 1.0}, {"d", 1.0}}},
                                       {"d", {{"b", 1.0}, {"c", 1.0}}}},
                                      0.85);
  for (const char* t : {"a", "b", "c", "d"}) EXPECT_NEAR(s.at(t), oracle.at(t), 1e-9) << t;
}

TEST(TextRank, StopsAtMaxIters) {
  TextRankParams p;
  p.max_iters = 3;
  p.tol = 0.0;
  const TextRankResult r = textrank({{"a", "b", "c", "d", "e"}}, p);
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_EQ(r.totals.size(), 3u);
  EXPECT_THROW(textrank_scores({{}, {}}, p), NoTerms);
}

TEST(TermWeights, NormalizeAndUniformFallback) {
  const TermWeights tw = normalize({{"a", 0.3}, {"b", 0.1}});
  EXPECT_NEAR(tw.weights.at("a"), 0.75, 1e-15);
  EXPECT_NEAR(tw.weights.at("b"), 0.25, 1e-15);
  const TermWeights zero = normalize({{"a", 0.0}, {"b", 0.0}, {"c", 0.0}});
  EXPECT_NEAR(zero.weights.at("c"), 1.0 / 3.0, 1e-15);
}

TEST(ExternalScores, ClampsAndNormalizes) {
  const std::vector<std::string> ids{"r1", "r2", "r3"};
  std::istringstream in("r1 salt -0.2\nr1 beef 0.4\nr2 rice 0.8\nr3 a 0.3\nr3 b 0.1\n");
  const auto w = parse_external_term_scores(in, ids);
  EXPECT_EQ(w[0].weights.at("salt"), 0.0);
  EXPECT_EQ(w[0].weights.at("beef"), 1.0);
  EXPECT_EQ(w[1].weights.at("rice"), 1.0);
  EXPECT_NEAR(w[2].weights.at("a"), 0.75, 1e-15);
  EXPECT_NEAR(w[2].weights.at("b"), 0.25, 1e-15);
}

TEST(ExternalScores, Errors) {
  const std::vector<std::string> ids{"r1"};
  std::istringstream unknown("r9 salt 0.5\n");
  EXPECT_THROW(parse_external_term_scores(unknown, ids), UnknownRecipe);
  std::istringstream text("r1 salt lots\n");
  EXPECT_THROW(parse_external_term_scores(text, ids), NonNumericScore);
}

TEST(FilterTerms, Rules) {
  const TermWeights tw = normalize({{"a", 0.7}, {"b", 0.2}, {"c", 0.1}});
  EXPECT_EQ(filter_terms(tw, 0.0), tw);
  const TermWeights f = filter_terms(tw, 0.15);
  ASSERT_EQ(f.weights.size(), 2u);
  EXPECT_NEAR(f.weights.at("a"), 0.7 / 0.9, 1e-12);
  EXPECT_NEAR(f.weights.at("b"), 0.2 / 0.9, 1e-12);
  EXPECT_NEAR(f.weights.at("a"), 0.778, 5e-4);
  EXPECT_EQ(filter_terms(tw, 0.9), tw);
}

TEST(WeightedTermFeature, Combinations) {
  const WordVectors wv({"v1", "v2"}, {1.0, 0.0, 0.0, 2.0}, 2);
  const std::vector<KeyTerm> both{{"v1", TermKind::ingredient, false}, {"v2", TermKind::utensil, false}};
  EXPECT_EQ(weighted_term_feature(both, normalize({{"v1", 3.0}, {"v2", 1.0}}), wv).value,
            (std::vector<double>{0.75, 0.5}));
  EXPECT_EQ(weighted_term_feature(both, normalize({{"v1", 1.0}, {"v2", 1.0}}), wv).value,
            (std::vector<double>{0.5, 1.0}));
  const std::vector<KeyTerm> with_oov{{"v1", TermKind::ingredient, false}, {"zz", TermKind::ingredient, false}};
  EXPECT_EQ(weighted_term_feature(with_oov, normalize({{"v1", 1.0}, {"zz", 3.0}}), wv).value,
            (std::vector<double>{1.0, 0.0}));
  const std::vector<KeyTerm> oov{{"zz", TermKind::ingredient, false}};
  const TermFeature f = weighted_term_feature(oov, normalize({{"zz", 1.0}}), wv);
  EXPECT_TRUE(f.empty);
  EXPECT_EQ(f.value, (std::vector<double>{0.0, 0.0}));
}

}  // namespace
}  // namespace seje
