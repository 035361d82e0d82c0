#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "seje/evalkit.hpp"
#include "support.hpp"

namespace seje {
namespace {

namespace fs = std::filesystem;

int run(const std::string& args) {
  const std::string cmd = "SOURCE_DATE_EPOCH=1700000000 " + std::string(SEJE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testing::slurp(e.path());
  }
  return files;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

TEST(Cli, SynthIsReproducible) {
  testing::TempDir dir("cli_synth");
  ASSERT_EQ(run("synth --out " + q(dir / "a") + " --pairs 200 --categories 10 --seed 7"), 0);
  ASSERT_EQ(run("synth --out " + q(dir / "b") + " --pairs 200 --categories 10 --seed 7"), 0);
  const auto a = tree(dir / "a");
  EXPECT_EQ(a, tree(dir / "b"));
  EXPECT_TRUE(a.contains("run_manifest.json"));
  EXPECT_TRUE(a.contains("lexicons/ingredients.txt"));
}

TEST(Cli, EvaluatePerfectEmbeddings) {
  testing::TempDir dir("cli_eval");
  Rng rng(1);
  Matrix e(150, std::vector<double>(4));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (double& x : e[i]) x = rng.normal();
    ids.push_back("p" + std::to_string(i));
  }
  save_embeddings(dir / "r.bin", ids, e);
  save_embeddings(dir / "v.bin", ids, e);
  ASSERT_EQ(run("evaluate --out " + q(dir / "out") + " --recipes " + q(dir / "r.bin") + " --images " +
                q(dir / "v.bin") + " --subset-size 100 --subsets 10 --k 1,5,10"),
            0);
  const auto report = nlohmann::json::parse(testing::slurp(dir / "out" / "report.json"));
  for (const char* d : {"im2recipe", "recipe2im"}) {
    EXPECT_EQ(report[d]["medr"].get<double>(), 1.0);
    EXPECT_EQ(report[d]["recall"]["R@1"].get<double>(), 1.0);
  }
  const auto manifest = nlohmann::json::parse(testing::slurp(dir / "out" / "run_manifest.json"));
  EXPECT_EQ(manifest["command"], "evaluate");
  EXPECT_TRUE(manifest["outputs"].contains("report.json"));
  EXPECT_EQ(manifest["inputs"].size(), 4u);
}

TEST(Cli, RatersDifferOnlyInWeights) {
  testing::TempDir dir("cli_rater");
  const fs::path c = dir / "corpus";
  ASSERT_EQ(run("synth --out " + q(c) + " --pairs 120 --categories 6 --seed 2"), 0);
  const std::string common = " --corpus " + q(c) + " --lexicons " + q(c / "lexicons") + " --labels " +
                             q(c / "labels.txt") + " --dim 16 --wv-epochs 1";
  ASSERT_EQ(run("preprocess --out " + q(dir / "tfidf") + " --rater tfidf" + common), 0);
  ASSERT_EQ(run("preprocess --out " + q(dir / "textrank") + " --rater textrank" + common), 0);
  EXPECT_EQ(testing::slurp(dir / "tfidf" / "key_terms.jsonl"), testing::slurp(dir / "textrank" / "key_terms.jsonl"));
  EXPECT_NE(testing::slurp(dir / "tfidf" / "term_weights.jsonl"),
            testing::slurp(dir / "textrank" / "term_weights.jsonl"));
}

TEST(Cli, TrainResumeAndEvaluate) {
  testing::TempDir dir("cli_train");
  const fs::path c = dir / "corpus", p = dir / "prep";
  ASSERT_EQ(run("synth --out " + q(c) + " --pairs 150 --categories 5 --seed 4"), 0);
  ASSERT_EQ(run("preprocess --out " + q(p) + " --corpus " + q(c) + " --lexicons " + q(c / "lexicons") + " --labels " +
                q(c / "labels.txt") + " --dim 16 --wv-epochs 1"),
            0);
  ASSERT_EQ(run("train-joint --out " + q(dir / "full") + " --data " + q(p) +
                " --epochs 4 --checkpoint-every 2 --batch-size 16 --embed-dim 8 --hidden 16 --disc-hidden 8"),
            0);
  ASSERT_EQ(run("train-joint --out " + q(dir / "resumed") + " --data " + q(p) + " --resume " +
                q(dir / "full" / "checkpoints" / "epoch_0002.bin")),
            0);
  EXPECT_EQ(testing::slurp(dir / "full" / "checkpoint.bin"), testing::slurp(dir / "resumed" / "checkpoint.bin"));
  EXPECT_EQ(testing::slurp(dir / "full" / "model.bin"), testing::slurp(dir / "resumed" / "model.bin"));
  ASSERT_EQ(run("evaluate --out " + q(dir / "eval") + " --recipes " + q(dir / "full/embeddings/recipe_test.bin") +
                " --images " + q(dir / "full/embeddings/image_test.bin") + " --subset-size 50"),
            0);
  EXPECT_TRUE(fs::exists(dir / "eval" / "report.csv"));
}

TEST(Cli, ConfigFileWithFlagPrecedence) {
  testing::TempDir dir("cli_config");
  testing::spit(dir / "cfg.json", R"({"pairs": 40, "categories": 4, "test": 10})");
  ASSERT_EQ(run("synth --out " + q(dir / "a") + " --config " + q(dir / "cfg.json") + " --pairs 50"), 0);
  const std::string recipes = testing::slurp(dir / "a" / "recipes.jsonl");
  EXPECT_EQ(std::count(recipes.begin(), recipes.end(), '\n'), 50);
  const auto manifest = nlohmann::json::parse(testing::slurp(dir / "a" / "run_manifest.json"));
  EXPECT_EQ(manifest["config"]["pairs"], "50");
  EXPECT_EQ(manifest["config"]["categories"], "4");

  testing::spit(dir / "bad.json", R"({"pairz": 40})");
  EXPECT_EQ(run("synth --out " + q(dir / "b") + " --config " + q(dir / "bad.json")), 1);
}

TEST(Cli, ExitCodesAndOverwriteGuard) {
  testing::TempDir dir("cli_exit");
  EXPECT_EQ(run(""), 1);
  EXPECT_EQ(run("synth"), 1);
  EXPECT_EQ(run("synth --out " + q(dir / "s") + " --pairs 0"), 1);
  ASSERT_EQ(run("synth --out " + q(dir / "s") + " --pairs 30 --categories 3"), 0);
  EXPECT_EQ(run("synth --out " + q(dir / "s") + " --pairs 30 --categories 3"), 1);
  EXPECT_EQ(run("synth --out " + q(dir / "s") + " --pairs 30 --categories 3 --force"), 0);
  fs::create_directories(dir / "other");
  testing::spit(dir / "other" / "keep.txt", "x");
  EXPECT_EQ(run("synth --out " + q(dir / "other") + " --pairs 30 --categories 3 --force"), 1);
  EXPECT_TRUE(fs::exists(dir / "other" / "keep.txt"));
  testing::spit(dir / "bad.bin", "garbage");
  EXPECT_EQ(run("sweep --out " + q(dir / "sw") + " --recipes " + q(dir / "bad.bin") + " --images " +
                q(dir / "bad.bin") + " --sizes 10"),
            1);
}

}  // namespace
}  // namespace seje
