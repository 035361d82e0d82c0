#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>

#include <nlohmann/json.hpp>

#include "run_manifest.hpp"
#include "seje/catassign.hpp"
#include "seje/corpus.hpp"
#include "seje/error.hpp"
#include "seje/evalkit.hpp"
#include "seje/gradcheck.hpp"
#include "seje/pipeline.hpp"
#include "seje/trainer.hpp"
#include "seje/wordvec.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace seje::cli {

namespace {

struct Common {
  fs::path out;
  bool force = false;
  std::uint64_t seed = 1;
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help, Common& c) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->always_capture_default();
  sub->add_option("--config", "JSON object of option values; command-line flags win")->check(CLI::ExistingFile);
  sub->add_option("--out", c.out, "Output directory")->required()->configurable(false);
  sub->add_flag("--force", c.force, "Replace the outputs of an earlier run in --out")->configurable(false);
  sub->add_option("--seed", c.seed, "Seed for every random choice of the command");
  return sub;
}

// Every option of `sub` after parsing, keyed by long name with '_'.
json resolved_options(const CLI::App* sub) {
  json j = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    if (opt->get_lnames().empty()) continue;
    std::string name = opt->get_lnames().front();
    if (name == "help" || name == "config" || name == "out" || name == "force") continue;
    std::replace(name.begin(), name.end(), '-', '_');
    if (opt->count() > 0) {
      const auto& res = opt->results();
      j[name] = res.size() == 1 ? json(res.front()) : json(res);
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

void prepare_out(const Common& c) {
  if (fs::exists(c.out)) {
    if (!fs::is_directory(c.out)) throw ValidationError(c.out.string() + " exists and is not a directory");
    if (!fs::is_empty(c.out)) {
      if (!c.force) throw ValidationError(c.out.string() + " is not empty; pass --force to replace an earlier run");
      if (!fs::exists(c.out / "run_manifest.json")) {
        throw ValidationError("refusing to clear " + c.out.string() + ": it holds no run_manifest.json");
      }
      for (const auto& e : fs::directory_iterator(c.out)) fs::remove_all(e.path());
    }
  }
  fs::create_directories(c.out);
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw RuntimeFailure("cannot write " + path.string());
  os << text;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& l : lines) text += l + "\n";
  write_text(path, text);
}

unsigned thread_count() {
  const char* env = std::getenv("SEJE_THREADS");
  if (!env || !*env) return 1;
  unsigned n = 0;
  const auto [p, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), n);
  if (ec != std::errc() || *p != '\0' || n == 0) throw ValidationError("SEJE_THREADS must be a positive integer");
  return n;
}

struct CorpusFiles {
  fs::path recipes, images, manifest;
};

CorpusFiles corpus_files(const fs::path& dir) {
  return {dir / "recipes.jsonl", dir / "images.bin", dir / "manifest.jsonl"};
}

Corpus load_corpus_dir(const fs::path& dir, RunManifest& m) {
  const CorpusFiles f = corpus_files(dir);
  Corpus c = load_corpus(f.recipes, f.images, f.manifest);
  m.add_input(f.recipes);
  m.add_input(f.manifest);
  const ImageFilePaths img = image_file_paths(f.images);
  for (const auto& p : {img.pixels, img.ids, img.category_probs, img.category_labels}) m.add_input(p);
  return c;
}

Lexicons load_lexicons(const fs::path& dir, RunManifest& m) {
  const fs::path ing = dir / "ingredients.txt", ut = dir / "utensils.txt", act = dir / "actions.txt";
  for (const auto& p : {ing, ut, act}) m.add_input(p);
  return Lexicons::load(ing, ut, act);
}

std::vector<std::string> load_labels(const fs::path& path, RunManifest& m) {
  m.add_input(path);
  return read_word_list(path);
}

void add_cbow_options(CLI::App* sub, CbowConfig& cfg) {
  sub->add_option("--dim", cfg.dim, "Word-vector width")->check(CLI::PositiveNumber);
  sub->add_option("--window", cfg.window, "CBOW context window")->check(CLI::PositiveNumber);
  sub->add_option("--negatives", cfg.negatives, "Negative samples per target")->check(CLI::PositiveNumber);
  sub->add_option("--wv-epochs", cfg.epochs, "CBOW passes over the corpus")->check(CLI::PositiveNumber);
  sub->add_option("--wv-lr", cfg.lr_start, "Initial CBOW learning rate")->check(CLI::PositiveNumber);
  sub->add_option("--min-count", cfg.min_count, "Drop tokens seen fewer times");
}

// ---- synth ----------------------------------------------------------------

std::pair<CLI::App*, Action> synth(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto spec = std::make_shared<SyntheticSpec>();
  CLI::App* sub = add_command(app, "synth", "Generate a synthetic recipe/image corpus", *c);
  sub->add_option("--pairs", spec->n_pairs, "Recipe-image pairs");
  sub->add_option("--categories", spec->n_categories, "Dish categories");
  sub->add_option("--latent-dim", spec->latent_dim, "Pixel feature width");
  sub->add_option("--noise", spec->noise_sigma, "Pixel noise standard deviation");
  CLI::Option* test = sub->add_option("--test", spec->n_test, "Test pairs (default: a third of --pairs)");
  sub->add_option("--val", spec->n_val, "Validation pairs");
  return {sub, [=] {
            spec->seed = c->seed;
            if (test->count() == 0) spec->n_test = spec->n_pairs / 3;
            validate(*spec);
            prepare_out(*c);
            RunManifest m("synth", c->seed, resolved_options(sub));
            const SyntheticCorpus s = generate_synthetic(*spec);
            save_corpus(s.corpus, c->out);
            write_lines(c->out / "lexicons" / "ingredients.txt", s.ingredient_entities);
            write_lines(c->out / "lexicons" / "utensils.txt", s.utensils);
            write_lines(c->out / "lexicons" / "actions.txt", s.actions);
            write_lines(c->out / "labels.txt", s.category_labels);
            std::string truth;
            for (std::size_t i = 0; i < s.corpus.recipes.size(); ++i) {
              truth += json{{"recipe_id", s.corpus.recipes[i].id}, {"category", s.category_labels[s.true_category[i]]}}
                           .dump() +
                       "\n";
            }
            write_text(c->out / "truth.jsonl", truth);
            m.finish(c->out);
            std::cout << "wrote " << s.corpus.recipes.size() << " pairs to " << c->out.string() << "\n";
          }};
}

// ---- train-wordvec --------------------------------------------------------

std::pair<CLI::App*, Action> train_wordvec(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto cfg = std::make_shared<CbowConfig>();
  auto recipes = std::make_shared<fs::path>();
  auto lexicons = std::make_shared<fs::path>();
  CLI::App* sub = add_command(app, "train-wordvec", "Train CBOW word vectors on recipe text", *c);
  sub->add_option("--recipes", *recipes, "recipes.jsonl")->required()->check(CLI::ExistingFile);
  sub->add_option("--lexicons", *lexicons, "Directory with ingredients.txt, utensils.txt, actions.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  add_cbow_options(sub, *cfg);
  return {sub, [=] {
            cfg->seed = c->seed;
            validate(*cfg);
            RunManifest m("train-wordvec", c->seed, resolved_options(sub));
            Corpus corpus;
            corpus.recipes = load_recipes(*recipes);
            m.add_input(*recipes);
            const Lexicons lex = load_lexicons(*lexicons, m);
            prepare_out(*c);
            const CbowResult r = train_cbow(token_streams(corpus, lex), *cfg);
            r.vectors.save_text(c->out / "vectors.txt");
            std::string csv = "epoch,loss\n";
            for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
              csv += std::to_string(e + 1) + "," + json(r.epoch_loss[e]).dump() + "\n";
            }
            write_text(c->out / "loss.csv", csv);
            m.finish(c->out);
            std::cout << r.vectors.size() << " tokens x " << r.vectors.dim() << " dims\n";
          }};
}

// ---- assign-categories ----------------------------------------------------

std::pair<CLI::App*, Action> assign(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto corpus_dir = std::make_shared<fs::path>();
  auto labels = std::make_shared<fs::path>();
  auto min_freq = std::make_shared<std::size_t>(2);
  CLI::App* sub = add_command(app, "assign-categories", "Label every pair with a dish category", *c);
  sub->add_option("--corpus", *corpus_dir, "Directory with recipes.jsonl, images.bin, manifest.jsonl")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--labels", *labels, "Curated category labels, one per line")->required()->check(CLI::ExistingFile);
  sub->add_option("--bigram-min-freq", *min_freq, "Minimum title-bigram count for a new label");
  return {sub, [=] {
            RunManifest m("assign-categories", c->seed, resolved_options(sub));
            const Corpus corpus = load_corpus_dir(*corpus_dir, m);
            const auto curated = load_labels(*labels, m);
            prepare_out(*c);
            const CategoryResult r = assign_categories(corpus, curated, *min_freq, image_top_categories(corpus));
            save_assignment(r, c->out / "categories.jsonl");
            std::map<int, std::size_t> steps;
            for (const auto& [id, l] : r.assignment.entries) ++steps[l.step];
            json summary{{"pairs", r.assignment.size()}, {"labels", r.space.labels}, {"steps", json::object()}};
            for (const auto& [s, n] : steps) summary["steps"][std::to_string(s)] = n;
            write_text(c->out / "summary.json", summary.dump(2) + "\n");
            m.finish(c->out);
            std::cout << r.assignment.size() << " pairs over " << r.space.size() << " labels\n";
          }};
}

// ---- preprocess -----------------------------------------------------------

std::pair<CLI::App*, Action> preprocess(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto cfg = std::make_shared<PipelineConfig>();
  auto corpus_dir = std::make_shared<fs::path>();
  auto lexicons = std::make_shared<fs::path>();
  auto labels = std::make_shared<fs::path>();
  auto vectors = std::make_shared<fs::path>();
  auto rater = std::make_shared<std::string>("tfidf");
  CLI::App* sub = add_command(app, "preprocess", "Build term, sentence, pixel and category features", *c);
  sub->add_option("--corpus", *corpus_dir, "Directory with recipes.jsonl, images.bin, manifest.jsonl")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--lexicons", *lexicons, "Directory with ingredients.txt, utensils.txt, actions.txt")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--labels", *labels, "Curated category labels, one per line")->required()->check(CLI::ExistingFile);
  sub->add_option("--vectors", *vectors, "Pretrained word2vec text file (skips CBOW training)")
      ->check(CLI::ExistingFile);
  sub->add_option("--rater", *rater, "Term rater")->check(CLI::IsMember({"tfidf", "textrank", "external"}));
  sub->add_option("--scores", cfg->external_scores, "Term scores for --rater external")->check(CLI::ExistingFile);
  sub->add_option("--threshold", cfg->term_threshold, "Drop terms whose normalized weight is below this");
  sub->add_option("--textrank-window", cfg->textrank.window, "TextRank co-occurrence window");
  sub->add_option("--damping", cfg->textrank.damping, "TextRank damping factor");
  sub->add_option("--bigram-min-freq", cfg->bigram_min_freq, "Minimum title-bigram count for a new label");
  sub->add_option("--whiten-eps", cfg->whiten_eps, "Eigenvalue floor for feature whitening (< 0 disables)");
  add_cbow_options(sub, cfg->cbow);
  return {sub, [=] {
            cfg->cbow.seed = c->seed;
            cfg->rater = parse_rater(*rater);
            if (cfg->rater == Rater::external && cfg->external_scores.empty()) {
              throw ValidationError("--rater external needs --scores");
            }
            RunManifest m("preprocess", c->seed, resolved_options(sub));
            const Corpus corpus = load_corpus_dir(*corpus_dir, m);
            const Lexicons lex = load_lexicons(*lexicons, m);
            const auto curated = load_labels(*labels, m);
            if (!cfg->external_scores.empty()) m.add_input(cfg->external_scores);
            std::optional<WordVectors> pretrained;
            if (!vectors->empty()) {
              m.add_input(*vectors);
              const Word2VecLoad w = load_word2vec_text(*vectors);
              if (w.duplicates > 0) std::cerr << "warning: " << w.duplicates << " duplicate token(s) in vectors\n";
              pretrained = w.vectors;
            }
            prepare_out(*c);
            const PreparedCorpus p = pretrained ? prepare(corpus, lex, curated, *cfg, *pretrained)
                                                : prepare(corpus, lex, curated, *cfg);
            p.wv.save_text(c->out / "vectors.txt");
            save_assignment(p.categories, c->out / "categories.jsonl");
            std::string terms, weights;
            for (std::size_t i = 0; i < corpus.recipes.size(); ++i) {
              json kt = json::array();
              for (const auto& t : p.terms.terms[i]) {
                kt.push_back({{"surface", t.surface}, {"kind", to_string(t.kind)}, {"recovered", t.recovered}});
              }
              terms += json{{"recipe_id", corpus.recipes[i].id}, {"terms", kt}}.dump() + "\n";
              weights += term_weights_json(corpus.recipes[i].id, p.terms.terms[i], p.weights[i]) + "\n";
            }
            write_text(c->out / "key_terms.jsonl", terms);
            write_text(c->out / "term_weights.jsonl", weights);
            save_dataset(p.data, c->out / "dataset");
            write_text(c->out / "scaler.json", scaler_json(p.scaler) + "\n");
            const json summary{{"train", p.data.train.size()},
                               {"val", p.data.val.size()},
                               {"test", p.data.test.size()},
                               {"categories", p.data.n_categories},
                               {"vocabulary", p.wv.size()},
                               {"filter_fallbacks", p.filter_fallbacks},
                               {"empty_term_features", p.data.empty_term_features}};
            write_text(c->out / "summary.json", summary.dump(2) + "\n");
            m.finish(c->out);
            std::cout << summary.dump() << "\n";
          }};
}

// ---- train-joint ----------------------------------------------------------

fs::path dataset_dir(const fs::path& p) { return fs::exists(p / "dataset.json") ? p : p / "dataset"; }

void save_split_embeddings(const ModelParams& params, const std::vector<PairExample>& xs, const std::string& split,
                           const fs::path& dir) {
  if (xs.empty()) return;
  const EmbeddedPairs e = embed_pairs(params, xs);
  std::vector<std::string> ids;
  for (const auto& x : xs) ids.push_back(x.pair_id);
  fs::create_directories(dir);
  save_embeddings(dir / ("recipe_" + split + ".bin"), ids, e.recipe);
  save_embeddings(dir / ("image_" + split + ".bin"), ids, e.image);
}

std::pair<CLI::App*, Action> train_joint(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto cfg = std::make_shared<TrainConfig>();
  auto data = std::make_shared<fs::path>();
  auto resume = std::make_shared<fs::path>();
  auto every = std::make_shared<std::size_t>(0);
  auto mining = std::make_shared<std::string>("double");
  auto triplet = std::make_shared<std::string>("hard");
  CLI::App* sub = add_command(app, "train-joint", "Train the recipe/image joint embedding", *c);
  sub->add_option("--data", *data, "preprocess output (or its dataset/ directory)")
      ->required()
      ->check(CLI::ExistingDirectory);
  sub->add_option("--resume", *resume, "Continue from a checkpoint file")->check(CLI::ExistingFile);
  sub->add_option("--checkpoint-every", *every, "Also write checkpoints/epoch_NNNN.bin every N epochs");
  sub->add_option("--epochs", cfg->epochs, "Training epochs");
  sub->add_option("--batch-size", cfg->batch_size, "Pairs per batch");
  sub->add_option("--lr", cfg->lr, "Adam learning rate");
  sub->add_option("--disc-steps", cfg->disc_steps, "Discriminator updates per encoder update");
  sub->add_option("--lambda1", cfg->weights.lambda1, "Category alignment weight");
  sub->add_option("--lambda2", cfg->weights.lambda2, "Discriminator alignment weight");
  sub->add_option("--lambda-d", cfg->weights.lambda_D, "Gradient penalty weight");
  sub->add_option("--gamma", cfg->weights.gamma, "Soft-margin scale");
  sub->add_option("--margin", cfg->weights.margin, "Triplet margin");
  sub->add_option("--mining", *mining, "Hard-negative mining")->check(CLI::IsMember({"double", "instance"}));
  sub->add_option("--triplet", *triplet, "Triplet variant: hard (mined) or all (no mining)")
      ->check(CLI::IsMember({"hard", "all"}));
  sub->add_option("--embed-dim", cfg->embed.d, "Joint embedding width");
  sub->add_option("--hidden", cfg->embed.h, "Encoder hidden width");
  sub->add_option("--disc-hidden", cfg->embed.h_D, "Discriminator hidden width");
  sub->add_option("--leaky-slope", cfg->embed.leaky_slope, "Discriminator leaky-ReLU slope");
  CLI::Option* epochs_opt = sub->get_option("--epochs");
  return {sub, [=] {
            RunManifest m("train-joint", c->seed, resolved_options(sub));
            const fs::path dir = dataset_dir(*data);
            const Dataset ds = load_dataset(dir);
            m.add_input(dir);
            if (ds.train.empty()) throw ValidationError("dataset has no train split");
            Checkpoint ckpt;
            if (!resume->empty()) {
              m.add_input(*resume);
              ckpt = load_checkpoint(*resume);
              if (epochs_opt->count() > 0) ckpt.config.epochs = cfg->epochs;
            } else {
              cfg->seed = c->seed;
              cfg->mining = parse_mining_mode(*mining);
              cfg->triplet = parse_triplet_variant(*triplet);
              cfg->embed.seed = c->seed;
              cfg->embed.n_categories = ds.n_categories;
              cfg->embed.D_w = ds.train.front().term_feature.size();
              cfg->embed.D_px = ds.train.front().pixel.size();
              validate(*cfg);
              ckpt = start_training(*cfg);
            }
            prepare_out(*c);
            const auto cb = [&](const Checkpoint& k) {
              const EpochLosses& l = k.trace.back();
              std::cout << "epoch " << l.epoch << " L_TRI " << l.tri << " L_CA " << l.ca_r + l.ca_v << " L_DA " << l.da
                        << " L_D " << l.d << "\n";
              if (*every > 0 && k.epoch % *every == 0) {
                char name[32];
                std::snprintf(name, sizeof name, "epoch_%04zu.bin", k.epoch);
                fs::create_directories(c->out / "checkpoints");
                save_checkpoint(c->out / "checkpoints" / name, k);
              }
            };
            train_until(ckpt, ds.train, ckpt.config.epochs, cb);
            write_text(c->out / "train_config.json", to_json(ckpt.config) + "\n");
            save_checkpoint(c->out / "checkpoint.bin", ckpt);
            save_model(c->out / "model.bin", ckpt.params);
            write_trace_csv(c->out / "trace.csv", ckpt.trace);
            save_split_embeddings(ckpt.params, ds.val, "val", c->out / "embeddings");
            save_split_embeddings(ckpt.params, ds.test, "test", c->out / "embeddings");
            m.finish(c->out);
          }};
}

// ---- evaluate / sweep -----------------------------------------------------

struct EmbeddingPair {
  Matrix recipe, image;
};

EmbeddingPair load_pair(const fs::path& recipes, const fs::path& images, RunManifest& m) {
  EmbeddingDump r = load_embeddings(recipes);
  EmbeddingDump v = load_embeddings(images);
  if (r.ids != v.ids) throw ValidationError("recipe and image embeddings list different pair ids");
  for (const auto& p : {recipes, images}) {
    m.add_input(p);
    m.add_input(p.string() + ".ids");
  }
  return {std::move(r.embs), std::move(v.embs)};
}

std::pair<CLI::App*, Action> evaluate_cmd(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto recipes = std::make_shared<fs::path>();
  auto images = std::make_shared<fs::path>();
  auto subset = std::make_shared<std::size_t>(200);
  auto subsets = std::make_shared<std::size_t>(10);
  auto ks = std::make_shared<std::vector<std::size_t>>(std::vector<std::size_t>{1, 5, 10});
  CLI::App* sub = add_command(app, "evaluate", "MedR and R@K over sampled subsets, both directions", *c);
  sub->add_option("--recipes", *recipes, "Recipe embedding file")->required()->check(CLI::ExistingFile);
  sub->add_option("--images", *images, "Image embedding file")->required()->check(CLI::ExistingFile);
  sub->add_option("--subset-size", *subset, "Pairs per subset")->check(CLI::PositiveNumber);
  sub->add_option("--subsets", *subsets, "Number of subsets")->check(CLI::PositiveNumber);
  sub->add_option("--k", *ks, "Recall cut-offs")->delimiter(',')->check(CLI::PositiveNumber);
  return {sub, [=] {
            RunManifest m("evaluate", c->seed, resolved_options(sub));
            const EmbeddingPair e = load_pair(*recipes, *images, m);
            const Evaluation ev = evaluate(e.recipe, e.image, *subset, *subsets, *ks, c->seed, thread_count());
            prepare_out(*c);
            write_text(c->out / "report.json", report_json(ev) + "\n");
            write_report_csv(c->out / "report.csv", ev);
            m.finish(c->out);
            for (const RetrievalReport* r : {&ev.im2recipe, &ev.recipe2im}) {
              std::cout << to_string(r->direction) << " MedR " << r->medr;
              for (const auto& [k, v] : r->r_at) std::cout << " R@" << k << " " << v;
              std::cout << "\n";
            }
          }};
}

std::pair<CLI::App*, Action> sweep(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto recipes = std::make_shared<fs::path>();
  auto images = std::make_shared<fs::path>();
  auto sizes = std::make_shared<std::vector<std::size_t>>();
  CLI::App* sub = add_command(app, "sweep", "MedR as the retrieval pool grows", *c);
  sub->add_option("--recipes", *recipes, "Recipe embedding file")->required()->check(CLI::ExistingFile);
  sub->add_option("--images", *images, "Image embedding file")->required()->check(CLI::ExistingFile);
  sub->add_option("--sizes", *sizes, "Pool sizes")->delimiter(',')->required()->check(CLI::PositiveNumber);
  return {sub, [=] {
            RunManifest m("sweep", c->seed, resolved_options(sub));
            const EmbeddingPair e = load_pair(*recipes, *images, m);
            const auto points = scalability_sweep(e.recipe, e.image, *sizes, c->seed, thread_count());
            prepare_out(*c);
            write_text(c->out / "sweep.json", sweep_json(points) + "\n");
            m.finish(c->out);
            for (const auto& p : points) {
              std::cout << p.size << " im2recipe " << p.medr_im2recipe << " recipe2im " << p.medr_recipe2im << "\n";
            }
          }};
}

// ---- arith ----------------------------------------------------------------

std::pair<CLI::App*, Action> arith(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto embs = std::make_shared<fs::path>();
  auto recipes = std::make_shared<fs::path>();
  auto expr = std::make_shared<std::string>();
  auto k = std::make_shared<std::size_t>(5);
  CLI::App* sub = add_command(app, "arith", "Nearest items to a keyword expression such as \"A - B + C\"", *c);
  sub->add_option("--embeddings", *embs, "Embedding file (ids are recipe ids)")->required()->check(CLI::ExistingFile);
  sub->add_option("--recipes", *recipes, "recipes.jsonl supplying titles")->required()->check(CLI::ExistingFile);
  sub->add_option("--expr", *expr, "Keyword expression")->required();
  sub->add_option("--k", *k, "Neighbors to return")->check(CLI::PositiveNumber);
  return {sub, [=] {
            RunManifest m("arith", c->seed, resolved_options(sub));
            const EmbeddingDump d = load_embeddings(*embs);
            m.add_input(*embs);
            m.add_input(embs->string() + ".ids");
            m.add_input(*recipes);
            std::map<std::string, std::string> title_of;
            for (const auto& r : load_recipes(*recipes)) title_of[r.id] = r.title;
            std::vector<std::string> titles;
            for (const auto& id : d.ids) {
              const auto it = title_of.find(id);
              if (it == title_of.end()) throw UnknownRecipe(id);
              titles.push_back(it->second);
            }
            const auto hits = vector_arith(d.ids, d.embs, titles, *expr, *k);
            prepare_out(*c);
            json j{{"expr", *expr}, {"hits", json::array()}};
            for (const auto& h : hits) {
              j["hits"].push_back({{"id", h.id}, {"title", title_of.at(h.id)}, {"distance", h.distance}});
              std::cout << h.id << "\t" << h.distance << "\t" << title_of.at(h.id) << "\n";
            }
            write_text(c->out / "arith.json", j.dump(2) + "\n");
            m.finish(c->out);
          }};
}

// ---- gradcheck ------------------------------------------------------------

std::pair<CLI::App*, Action> gradcheck(CLI::App& app) {
  auto c = std::make_shared<Common>();
  auto cfg = std::make_shared<FidelityConfig>();
  auto tol = std::make_shared<double>(1e-5);
  CLI::App* sub = add_command(app, "gradcheck", "Finite-difference check of L and L_D at random points", *c);
  sub->add_option("--points", cfg->points, "Random parameter points")->check(CLI::PositiveNumber);
  sub->add_option("--batch", cfg->batch, "Pairs per point");
  sub->add_option("--embed-dim", cfg->embed.d, "Joint embedding width");
  sub->add_option("--hidden", cfg->embed.h, "Encoder hidden width");
  sub->add_option("--disc-hidden", cfg->embed.h_D, "Discriminator hidden width");
  sub->add_option("--eps", cfg->eps, "Central-difference step in [1e-6, 1e-3]");
  sub->add_option("--scale", cfg->param_scale, "Standard deviation of the random parameters");
  sub->add_option("--kink-margin", cfg->kink_margin, "Redraw points this close to a non-smooth switch");
  sub->add_option("--tolerance", *tol, "Relative error reported as the pass mark");
  return {sub, [=] {
            cfg->seed = c->seed;
            validate(*cfg);
            prepare_out(*c);
            RunManifest m("gradcheck", c->seed, resolved_options(sub));
            const FidelityReport r = check_objective_gradients(*cfg);
            write_text(c->out / "gradcheck.json", fidelity_json(r) + "\n");
            m.finish(c->out);
            std::cout << "L max rel error " << r.total_max << ", L_D max rel error " << r.discriminator_max << " ("
                      << (std::max(r.total_max, r.discriminator_max) < *tol ? "within" : "above") << " " << *tol
                      << ")\n";
          }};
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number()) return v.dump();
  throw ValidationError("config values must be scalars or arrays of scalars");
}

}  // namespace

void apply_config(CLI::App* sub) {
  const CLI::Option* cfg_opt = sub->get_option("--config");
  if (cfg_opt->count() == 0) return;
  const std::string path = cfg_opt->as<std::string>();
  std::ifstream is(path);
  const json j = json::parse(is, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError(path + " must hold one JSON object");
  for (const auto& [key, value] : j.items()) {
    std::string name = key;
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = sub->get_option_no_throw("--" + name);
    if (!opt || !opt->get_configurable() || name == "config") {
      throw ValidationError("unknown config key '" + key + "' for " + sub->get_name());
    }
    if (opt->count() > 0) continue;
    try {
      if (value.is_array()) {
        for (const auto& v : value) opt->add_result(scalar_text(v));
      } else {
        opt->add_result(scalar_text(value));
      }
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw ValidationError("config key '" + key + "': " + e.what());
    }
  }
}

std::vector<std::pair<CLI::App*, Action>> register_commands(CLI::App& app) {
  return {synth(app),        train_wordvec(app), assign(app), preprocess(app), train_joint(app),
          evaluate_cmd(app), sweep(app),         arith(app),  gradcheck(app)};
}

}  // namespace seje::cli
