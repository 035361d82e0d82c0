#include "seje/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "seje/error.hpp"
#include "seje/matrix_io.hpp"
#include "seje/rng.hpp"
#include "seje/text.hpp"

namespace seje {

using nlohmann::json;

const char* to_string(Direction d) { return d == Direction::im2recipe ? "im2recipe" : "recipe2im"; }

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return s;
}

void check_matrix(const Matrix& m, std::size_t width, const char* what) {
  for (const auto& row : m) {
    if (row.size() != width) throw ShapeMismatch(std::string(what) + " rows differ in width");
  }
}

}  // namespace

std::vector<std::size_t> rank_retrieval(const Matrix& queries, const Matrix& candidates, unsigned threads) {
  if (queries.size() != candidates.size()) {
    throw ShapeMismatch("rank_retrieval: " + std::to_string(queries.size()) + " queries vs " +
                        std::to_string(candidates.size()) + " candidates");
  }
  const std::size_t m = queries.size();
  if (m == 0) return {};
  const std::size_t width = queries.front().size();
  check_matrix(queries, width, "query");
  check_matrix(candidates, width, "candidate");

  std::vector<std::size_t> ranks(m);
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<double> dist(m);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t j = 0; j < m; ++j) dist[j] = squared_distance(queries[i], candidates[j]);
      std::size_t r = 1;
      for (std::size_t j = 0; j < m; ++j) {
        if (dist[j] < dist[i] || (dist[j] == dist[i] && j < i)) ++r;
      }
      ranks[i] = r;
    }
  };
  const std::size_t n_threads = std::clamp<std::size_t>(threads, 1, m);
  if (n_threads == 1) {
    work(0, m);
    return ranks;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (m + n_threads - 1) / n_threads;
  for (std::size_t b = 0; b < m; b += chunk) pool.emplace_back(work, b, std::min(m, b + chunk));
  pool.clear();
  return ranks;
}

double median_rank(std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw ValidationError("median of no ranks");
  std::sort(ranks.begin(), ranks.end());
  const std::size_t n = ranks.size();
  if (n % 2 == 1) return static_cast<double>(ranks[n / 2]);
  return 0.5 * (static_cast<double>(ranks[n / 2 - 1]) + static_cast<double>(ranks[n / 2]));
}

double recall_at(std::span<const std::size_t> ranks, std::size_t k) {
  if (ranks.empty()) throw ValidationError("recall of no ranks");
  const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::vector<std::vector<std::size_t>> sample_subsets(std::size_t m, std::size_t subset_size, std::size_t n_subsets,
                                                     std::uint64_t seed) {
  if (subset_size > m) throw SubsetTooLarge(subset_size, m);
  if (subset_size == 0) throw ValidationError("subset size must be positive");
  std::vector<std::vector<std::size_t>> out;
  std::set<std::vector<std::size_t>> seen;
  std::uint64_t stream = 0;
  constexpr std::uint64_t kMaxRedraws = 1000;
  while (out.size() < n_subsets) {
    Rng rng(mix_seed(seed, stream++));
    std::vector<std::size_t> pool(m);
    for (std::size_t i = 0; i < m; ++i) pool[i] = i;
    for (std::size_t i = 0; i < subset_size; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(subset_size);
    std::sort(pool.begin(), pool.end());
    const bool unique_needed = subset_size < m && stream <= n_subsets + kMaxRedraws;
    if (unique_needed && !seen.insert(pool).second) continue;
    out.push_back(std::move(pool));
  }
  return out;
}

namespace {

Matrix take(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(m[i]);
  return out;
}

void finalize(RetrievalReport& r) {
  r.medr = 0.0;
  r.r_at.clear();
  for (const auto& s : r.per_subset) {
    r.medr += s.medr;
    for (const auto& [k, v] : s.r_at) r.r_at[k] += v;
  }
  const double n = static_cast<double>(r.per_subset.size());
  r.medr /= n;
  for (auto& [k, v] : r.r_at) v /= n;
}

}  // namespace

Evaluation evaluate(const Matrix& recipe_embs, const Matrix& image_embs, std::size_t subset_size,
                    std::size_t n_subsets, std::span<const std::size_t> ks, std::uint64_t seed, unsigned threads) {
  if (recipe_embs.size() != image_embs.size()) throw ShapeMismatch("recipe and image embedding counts differ");
  if (n_subsets == 0) throw ValidationError("need at least one subset");
  Evaluation e;
  e.im2recipe = {Direction::im2recipe, subset_size, n_subsets, 0.0, {}, {}};
  e.recipe2im = {Direction::recipe2im, subset_size, n_subsets, 0.0, {}, {}};
  for (const auto& idx : sample_subsets(recipe_embs.size(), subset_size, n_subsets, seed)) {
    const Matrix r = take(recipe_embs, idx);
    const Matrix v = take(image_embs, idx);
    for (RetrievalReport* rep : {&e.im2recipe, &e.recipe2im}) {
      const auto ranks = rep->direction == Direction::im2recipe ? rank_retrieval(v, r, threads)
                                                                 : rank_retrieval(r, v, threads);
      SubsetMetrics s;
      s.medr = median_rank(ranks);
      for (std::size_t k : ks) s.r_at[k] = recall_at(ranks, k);
      rep->per_subset.push_back(std::move(s));
    }
  }
  finalize(e.im2recipe);
  finalize(e.recipe2im);
  return e;
}

std::vector<SweepPoint> scalability_sweep(const Matrix& recipe_embs, const Matrix& image_embs,
                                          std::span<const std::size_t> sizes, std::uint64_t seed, unsigned threads) {
  std::vector<SweepPoint> out;
  for (std::size_t size : sizes) {
    if (size > recipe_embs.size()) throw SubsetTooLarge(size, recipe_embs.size());
    const std::size_t n = size == recipe_embs.size() ? 1 : 10;
    const Evaluation e = evaluate(recipe_embs, image_embs, size, n, {}, seed, threads);
    out.push_back({size, e.im2recipe.medr, e.recipe2im.medr});
  }
  return out;
}

std::vector<ArithTerm> parse_arith_expression(const std::string& expr) {
  std::istringstream in(expr);
  std::vector<ArithTerm> terms;
  std::string word;
  double sign = 1.0;
  std::string current;
  bool expect_term = true;
  auto flush = [&] {
    if (current.empty()) throw ValidationError("malformed expression \"" + expr + "\"");
    terms.push_back({current, sign});
    current.clear();
  };
  while (in >> word) {
    if (word == "+" || word == "-") {
      if (expect_term) throw ValidationError("malformed expression \"" + expr + "\"");
      flush();
      sign = word == "+" ? 1.0 : -1.0;
      expect_term = true;
      continue;
    }
    current += current.empty() ? word : " " + word;
    expect_term = false;
  }
  if (expect_term) throw ValidationError("malformed expression \"" + expr + "\"");
  flush();
  return terms;
}

std::vector<ArithHit> vector_arith(std::span<const std::string> ids, const Matrix& embs,
                                   std::span<const std::string> titles, const std::string& expr, std::size_t k) {
  if (ids.size() != embs.size() || titles.size() != embs.size()) throw ShapeMismatch("ids, embeddings and titles differ in count");
  if (embs.empty()) throw ValidationError("no embeddings");
  const std::size_t d = embs.front().size();
  check_matrix(embs, d, "embedding");
  std::vector<std::string> lowered;
  lowered.reserve(titles.size());
  for (const auto& t : titles) lowered.push_back(to_lower(t));

  std::vector<double> query(d, 0.0);
  for (const auto& term : parse_arith_expression(expr)) {
    const std::string key = to_lower(term.keyword);
    std::vector<double> mean(d, 0.0);
    std::size_t n = 0;
    for (std::size_t i = 0; i < embs.size(); ++i) {
      if (lowered[i].find(key) == std::string::npos) continue;
      for (std::size_t c = 0; c < d; ++c) mean[c] += embs[i][c];
      ++n;
    }
    if (n == 0) throw KeywordNotFound(term.keyword);
    for (std::size_t c = 0; c < d; ++c) query[c] += term.sign * mean[c] / static_cast<double>(n);
  }

  std::vector<ArithHit> hits;
  hits.reserve(embs.size());
  for (std::size_t i = 0; i < embs.size(); ++i) hits.push_back({ids[i], std::sqrt(squared_distance(query, embs[i]))});
  std::stable_sort(hits.begin(), hits.end(), [](const ArithHit& a, const ArithHit& b) { return a.distance < b.distance; });
  hits.resize(std::min(k, hits.size()));
  return hits;
}

namespace {

json report_to_json(const RetrievalReport& r) {
  auto ks = [](const std::map<std::size_t, double>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j["R@" + std::to_string(k)] = v;
    return j;
  };
  json subsets = json::array();
  for (const auto& s : r.per_subset) subsets.push_back({{"medr", s.medr}, {"recall", ks(s.r_at)}});
  return {{"direction", to_string(r.direction)},
          {"subset_size", r.subset_size},
          {"n_subsets", r.n_subsets},
          {"medr", r.medr},
          {"recall", ks(r.r_at)},
          {"per_subset", subsets}};
}

}  // namespace

std::string report_json(const Evaluation& e) {
  return json{{"im2recipe", report_to_json(e.im2recipe)}, {"recipe2im", report_to_json(e.recipe2im)}}.dump(2);
}

void write_report_csv(const std::filesystem::path& path, const Evaluation& e) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out.precision(17);
  out << "direction,subset_size,n_subsets,metric,value\n";
  for (const RetrievalReport* r : {&e.im2recipe, &e.recipe2im}) {
    out << to_string(r->direction) << ',' << r->subset_size << ',' << r->n_subsets << ",MedR," << r->medr << '\n';
    for (const auto& [k, v] : r->r_at) {
      out << to_string(r->direction) << ',' << r->subset_size << ',' << r->n_subsets << ",R@" << k << ',' << v << '\n';
    }
  }
}

std::string sweep_json(std::span<const SweepPoint> points) {
  json j = json::array();
  for (const auto& p : points) {
    j.push_back({{"size", p.size}, {"medr_im2recipe", p.medr_im2recipe}, {"medr_recipe2im", p.medr_recipe2im}});
  }
  return j.dump(2);
}

void save_embeddings(const std::filesystem::path& path, std::span<const std::string> ids, const Matrix& embs) {
  if (ids.size() != embs.size()) throw ShapeMismatch("one id per embedding required");
  save_rows_f32(path, embs);
  std::ofstream out(path.string() + ".ids", std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string() + ".ids");
  for (const auto& id : ids) out << id << '\n';
}

EmbeddingDump load_embeddings(const std::filesystem::path& path) {
  EmbeddingDump d;
  d.embs = load_rows_f64(path);
  std::ifstream in(path.string() + ".ids");
  if (!in) throw ValidationError("cannot open " + path.string() + ".ids");
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) d.ids.push_back(line);
  }
  if (d.ids.size() != d.embs.size()) {
    throw DimensionMismatch(path.string() + ": " + std::to_string(d.ids.size()) + " ids for " +
                            std::to_string(d.embs.size()) + " rows");
  }
  return d;
}

}  // namespace seje
