#include "seje/wordvec.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "seje/error.hpp"
#include "seje/rng.hpp"

namespace seje {

WordVectors::WordVectors(std::vector<std::string> tokens, std::vector<double> matrix, std::size_t dim)
    : tokens_(std::move(tokens)), matrix_(std::move(matrix)), dim_(dim) {
  if (matrix_.size() != tokens_.size() * dim_) throw DimensionMismatch("word vector matrix does not match vocab x dim");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw ValidationError("duplicate token \"" + tokens_[i] + "\"");
  }
  for (double v : matrix_) {
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite word vector entry");
  }
}

std::optional<std::size_t> WordVectors::index_of(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const double> WordVectors::lookup(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end()) return {};
  return row(it->second);
}

double WordVectors::cosine(const std::string& a, const std::string& b) const {
  const auto va = lookup(a);
  const auto vb = lookup(b);
  if (va.empty() || vb.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) {
    dot += va[k] * vb[k];
    na += va[k] * va[k];
    nb += vb[k] * vb[k];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

void WordVectors::save_text(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeFailure("cannot write " + path.string());
  out << tokens_.size() << ' ' << dim_ << '\n';
  char buf[64];
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    out << tokens_[i];
    for (double v : row(i)) {
      // Shortest representation that parses back to the same double.
      const auto res = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
    out << '\n';
  }
}

void validate(const CbowConfig& cfg) {
  if (cfg.window < 1) throw ValidationError("cbow window must be >= 1");
  if (cfg.negatives < 1) throw ValidationError("cbow negatives must be >= 1");
  if (!(cfg.lr_start > 0.0)) throw ValidationError("cbow lr_start must be > 0");
  if (cfg.dim < 2) throw ValidationError("word vector dim must be >= 2");
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

class UnigramTable {
 public:
  explicit UnigramTable(const std::vector<std::size_t>& counts) {
    cumulative_.reserve(counts.size());
    double acc = 0.0;
    for (std::size_t c : counts) {
      acc += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(acc);
    }
  }

  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform() * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace

CbowResult train_cbow(const std::vector<Tokens>& token_streams, const CbowConfig& cfg) {
  validate(cfg);
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& s : token_streams) {
    for (const auto& t : s) {
      ++counts[t];
      ++total;
    }
  }
  if (total == 0) throw EmptyCorpus();

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (const auto& [tok, n] : counts) {
    if (n >= cfg.min_count) kept.emplace_back(tok, n);
  }
  if (kept.size() < 2) throw VocabularyTooSmall(kept.size());
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  std::map<std::string, std::size_t> index;
  std::vector<std::string> vocab;
  std::vector<std::size_t> freq;
  for (const auto& [tok, n] : kept) {
    index.emplace(tok, vocab.size());
    vocab.push_back(tok);
    freq.push_back(n);
  }

  std::vector<std::vector<std::size_t>> streams;
  std::size_t n_words = 0;
  for (const auto& s : token_streams) {
    std::vector<std::size_t> ids;
    for (const auto& t : s) {
      const auto it = index.find(t);
      if (it != index.end()) ids.push_back(it->second);
    }
    n_words += ids.size();
    if (!ids.empty()) streams.push_back(std::move(ids));
  }

  const std::size_t V = vocab.size();
  const std::size_t D = cfg.dim;
  Rng rng(cfg.seed);
  std::vector<double> syn0(V * D);
  for (auto& v : syn0) v = (rng.uniform() - 0.5) / static_cast<double>(D);
  std::vector<double> syn1(V * D, 0.0);
  const UnigramTable table(freq);

  const double total_steps = static_cast<double>(n_words) * static_cast<double>(cfg.epochs);
  double processed = 0.0;
  std::vector<double> h(D);
  std::vector<double> grad_h(D);
  CbowResult result;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t examples = 0;
    for (const auto& s : streams) {
      for (std::size_t i = 0; i < s.size(); ++i, processed += 1.0) {
        const double lr = cfg.lr_start * (1.0 - 0.99 * processed / total_steps);
        const std::size_t lo = i >= cfg.window ? i - cfg.window : 0;
        const std::size_t hi = std::min(s.size() - 1, i + cfg.window);
        std::size_t n_ctx = 0;
        std::fill(h.begin(), h.end(), 0.0);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const double* src = &syn0[s[j] * D];
          for (std::size_t k = 0; k < D; ++k) h[k] += src[k];
          ++n_ctx;
        }
        if (n_ctx == 0) continue;
        for (auto& v : h) v /= static_cast<double>(n_ctx);
        std::fill(grad_h.begin(), grad_h.end(), 0.0);

        double example_loss = 0.0;
        for (std::size_t d = 0; d <= cfg.negatives; ++d) {
          std::size_t target = s[i];
          double label = 1.0;
          if (d > 0) {
            target = table.sample(rng);
            if (target == s[i]) continue;
            label = 0.0;
          }
          double* out = &syn1[target * D];
          double f = 0.0;
          for (std::size_t k = 0; k < D; ++k) f += h[k] * out[k];
          example_loss += label > 0.0 ? softplus(-f) : softplus(f);
          const double sig = 1.0 / (1.0 + std::exp(-f));
          const double g = (label - sig) * lr;
          for (std::size_t k = 0; k < D; ++k) grad_h[k] += g * out[k];
          for (std::size_t k = 0; k < D; ++k) out[k] += g * h[k];
        }
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          double* dst = &syn0[s[j] * D];
          for (std::size_t k = 0; k < D; ++k) dst[k] += grad_h[k];
        }
        loss_sum += example_loss;
        ++examples;
      }
    }
    result.epoch_loss.push_back(examples ? loss_sum / static_cast<double>(examples) : 0.0);
  }

  result.vectors = WordVectors(std::move(vocab), std::move(syn0), D);
  return result;
}

namespace {

std::vector<std::string_view> fields_of(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  const char* end = s.data() + s.size();
  const char* first = s.data();
  if (first != end && *first == '+') ++first;
  const auto res = std::from_chars(first, end, out);
  return res.ec == std::errc() && res.ptr == end;
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

}  // namespace

Word2VecLoad parse_word2vec_text(std::istream& in) {
  std::vector<std::string> tokens;
  std::vector<double> matrix;
  std::map<std::string, std::size_t> seen;
  std::size_t dim = 0;
  std::size_t declared_rows = 0;
  bool has_header = false;
  std::size_t duplicates = 0;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = fields_of(line);
    if (f.empty()) continue;
    if (line_no == 1 && f.size() == 2) {
      std::size_t a = 0, b = 0;
      if (parse_size(f[0], a) && parse_size(f[1], b)) {
        has_header = true;
        declared_rows = a;
        dim = b;
        continue;
      }
    }
    const std::size_t width = f.size() - 1;
    if (dim == 0) dim = width;
    if (width != dim) throw RaggedRow(line_no, dim, width);
    std::vector<double> row(width);
    for (std::size_t k = 0; k < width; ++k) {
      if (!parse_double(f[k + 1], row[k])) throw NonNumericField(line_no, std::string(f[k + 1]));
    }
    std::string tok(f[0]);
    const auto it = seen.find(tok);
    if (it != seen.end()) {
      ++duplicates;
      std::copy(row.begin(), row.end(), matrix.begin() + static_cast<std::ptrdiff_t>(it->second * dim));
      continue;
    }
    seen.emplace(tok, tokens.size());
    tokens.push_back(std::move(tok));
    matrix.insert(matrix.end(), row.begin(), row.end());
  }
  if (has_header && declared_rows != tokens.size() + duplicates) {
    throw ValidationError("word2vec header declares " + std::to_string(declared_rows) + " rows, found " +
                          std::to_string(tokens.size() + duplicates));
  }
  return {WordVectors(std::move(tokens), std::move(matrix), dim), duplicates};
}

Word2VecLoad load_word2vec_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return parse_word2vec_text(in);
}

SentenceVector sentence_vector(std::span<const std::string> sentence_tokens, const WordVectors& wv) {
  SentenceVector out;
  out.value.assign(wv.dim(), 0.0);
  // Sum in vocabulary order so the mean does not depend on token order.
  std::vector<std::size_t> rows;
  for (const auto& t : sentence_tokens) {
    if (auto i = wv.index_of(t)) rows.push_back(*i);
  }
  if (rows.empty()) {
    out.empty = true;
    return out;
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t r : rows) {
    const auto v = wv.row(r);
    for (std::size_t k = 0; k < wv.dim(); ++k) out.value[k] += v[k];
  }
  for (auto& v : out.value) v /= static_cast<double>(rows.size());
  return out;
}

}  // namespace seje
