#include "seje/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seje/error.hpp"

namespace seje::ad {

// ---- Tensor ---------------------------------------------------------------

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill) : shape_{rows, cols}, data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : shape_{rows, cols}, data_(std::move(data)) {
  if (data_.size() != rows * cols) throw ShapeMismatch("tensor data does not match its shape");
}

Tensor Tensor::row(std::span<const double> v) { return Tensor(1, v.size(), std::vector<double>(v.begin(), v.end())); }

Tensor Tensor::rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t cols = rows.empty() ? 0 : rows.front().size();
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (r.size() != cols) throw ShapeMismatch("rows of differing width");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(rows.size(), cols, std::move(data));
}

std::vector<double> Tensor::row_vector(std::size_t r) const {
  const auto s = row_span(r);
  return {s.begin(), s.end()};
}

double Tensor::item() const {
  if (size() != 1) throw ShapeMismatch("item() on a non-scalar tensor");
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

// ---- Tape -----------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }
const Tensor& Var::grad() const { return tape_->grad(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) throw NonFiniteValue("non-finite constant");
  nodes_.push_back({std::move(value), {}, false, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(Tensor value) {
  if (!value.all_finite()) throw NonFiniteValue("non-finite variable");
  nodes_.push_back({std::move(value), {}, true, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  if (!value.all_finite()) throw NonFiniteValue("operation produced a non-finite value");
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape() != this) throw ShapeMismatch("operands recorded on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor* Tape::grad_sink(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Tensor(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

const Tensor& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.has_grad) return n.grad;
  zero_ = Tensor(n.value.rows(), n.value.cols());
  return zero_;
}

void Tape::backward(Var root) {
  if (root.tape() != this) throw ShapeMismatch("backward root is on another tape");
  if (nodes_[root.id()].value.size() != 1) throw ShapeMismatch("backward root must be a 1 x 1 tensor");
  if (!nodes_[root.id()].requires_grad) return;
  Tensor* g = grad_sink(root.id());
  (*g)[0] += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, i);
  }
}

// ---- ops ------------------------------------------------------------------

namespace {

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rows() != 1;
}

void check_binary(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape() || is_row_broadcast(a, b)) return;
  throw ShapeMismatch(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " and " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + " are incompatible");
}

template <typename F, typename D>
Var unary(Var a, F f, D df) {
  const Tensor& x = a.value();
  Tensor y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(y), {a}, [ia, df](Tape& t, std::size_t self) {
    const Tensor& x = t.value(ia);
    const Tensor& y = t.value(self);
    const Tensor& g = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < x.size(); ++i) (*ga)[i] += g[i] * df(x[i], y[i]);
    }
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

Var matmul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.rows()) {
    throw ShapeMismatch("matmul: " + std::to_string(A.rows()) + "x" + std::to_string(A.cols()) + " times " +
                        std::to_string(B.rows()) + "x" + std::to_string(B.cols()));
  }
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  Tensor C(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A(i, p);
      for (std::size_t j = 0; j < m; ++j) C(i, j) += aip * B(p, j);
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(C), {a, b}, [ia, ib, n, k, m](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      const Tensor& B = t.value(ib);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += G(i, j) * B(p, j);
          (*ga)(i, p) += s;
        }
      }
    }
    if (Tensor* gb = t.grad_sink(ib)) {
      const Tensor& A = t.value(ia);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = A(i, p);
          for (std::size_t j = 0; j < m; ++j) (*gb)(p, j) += aip * G(i, j);
        }
      }
    }
  });
}

Var transpose(Var a) {
  const Tensor& A = a.value();
  Tensor T(A.cols(), A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) T(j, i) = A(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(T), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < ga->rows(); ++i) {
        for (std::size_t j = 0; j < ga->cols(); ++j) (*ga)(i, j) += G(j, i);
      }
    }
  });
}

namespace {

Var add_sub(Var a, Var b, double sign, const char* name) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_binary(A, B, name);
  const bool bcast = is_row_broadcast(A, B);
  Tensor C(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) = A(i, j) + sign * (bcast ? B(0, j) : B(i, j));
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(C), {a, b}, [ia, ib, sign, bcast](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < G.size(); ++i) (*ga)[i] += G[i];
    }
    if (Tensor* gb = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*gb)(bcast ? 0 : i, j) += sign * G(i, j);
      }
    }
  });
}

}  // namespace

Var add(Var a, Var b) { return add_sub(a, b, 1.0, "add"); }
Var sub(Var a, Var b) { return add_sub(a, b, -1.0, "sub"); }

Var add_scalar(Var a, double c) {
  return unary(a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var scalar_mul(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var elementwise_mul(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  check_binary(A, B, "elementwise_mul");
  const bool bcast = is_row_broadcast(A, B);
  Tensor C(A.rows(), A.cols());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) C(i, j) = A(i, j) * (bcast ? B(0, j) : B(i, j));
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(C), {a, b}, [ia, ib, bcast](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*ga)(i, j) += G(i, j) * (bcast ? B(0, j) : B(i, j));
      }
    }
    if (Tensor* gb = t.grad_sink(ib)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*gb)(bcast ? 0 : i, j) += G(i, j) * A(i, j);
      }
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(Var a) {
  return unary(a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var leaky_relu_slope_mask(Var a, double slope) {
  const Tensor& x = a.value();
  Tensor m(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] > 0.0 ? 1.0 : slope;
  return a.tape()->constant(std::move(m));
}

Var clamp_min(Var a, double lo) {
  return unary(
      a, [lo](double x) { return std::max(x, lo); }, [lo](double x, double) { return x > lo ? 1.0 : 0.0; });
}

Var concat(std::initializer_list<Var> parts) {
  if (parts.size() == 0) throw ShapeMismatch("concat of nothing");
  const std::size_t rows = parts.begin()->rows();
  std::size_t cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ShapeMismatch("concat: row counts differ");
    cols += p.cols();
  }
  Tensor C(rows, cols);
  std::vector<std::size_t> ids;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Tensor& P = p.value();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < P.cols(); ++j) C(i, off + j) = P(i, j);
    }
    ids.push_back(p.id());
    offsets.push_back(off);
    off += P.cols();
  }
  Tape* tape = parts.begin()->tape();
  Var out = tape->record(std::move(C), parts, [ids, offsets](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      Tensor* gp = t.grad_sink(ids[k]);
      if (!gp) continue;
      for (std::size_t i = 0; i < gp->rows(); ++i) {
        for (std::size_t j = 0; j < gp->cols(); ++j) (*gp)(i, j) += G(i, offsets[k] + j);
      }
    }
  });
  return out;
}

Var slice(Var a, std::size_t col_begin, std::size_t col_end) {
  const Tensor& A = a.value();
  if (col_begin > col_end || col_end > A.cols()) throw ShapeMismatch("slice: column range out of bounds");
  Tensor S(A.rows(), col_end - col_begin);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = col_begin; j < col_end; ++j) S(i, j - col_begin) = A(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(S), {a}, [ia, col_begin](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*ga)(i, col_begin + j) += G(i, j);
      }
    }
  });
}

Var slice_rows(Var a, std::size_t row_begin, std::size_t row_end) {
  const Tensor& A = a.value();
  if (row_begin > row_end || row_end > A.rows()) throw ShapeMismatch("slice_rows: row range out of bounds");
  Tensor S(row_end - row_begin, A.cols());
  for (std::size_t i = row_begin; i < row_end; ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) S(i - row_begin, j) = A(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(S), {a}, [ia, row_begin](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < G.rows(); ++i) {
        for (std::size_t j = 0; j < G.cols(); ++j) (*ga)(row_begin + i, j) += G(i, j);
      }
    }
  });
}

Var reduce_sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t ia = a.id();
  return a.tape()->record(Tensor::scalar(s), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.upstream(self)[0];
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += g;
    }
  });
}

Var reduce_mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeMismatch("reduce_mean of an empty tensor");
  return scalar_mul(reduce_sum(a), 1.0 / n);
}

Var row_sum(Var a) {
  const Tensor& A = a.value();
  Tensor S(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < A.cols(); ++j) S(i, 0) += A(i, j);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(S), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < ga->rows(); ++i) {
        for (std::size_t j = 0; j < ga->cols(); ++j) (*ga)(i, j) += G(i, 0);
      }
    }
  });
}

Var l2_norm(Var a) {
  const Tensor& A = a.value();
  Tensor N(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (double v : A.row_span(i)) s += v * v;
    N(i, 0) = std::sqrt(s);
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(N), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    const Tensor& A = t.value(ia);
    const Tensor& N = t.value(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < A.rows(); ++i) {
        if (N(i, 0) == 0.0) continue;  // subgradient 0 at the origin
        const double s = G(i, 0) / N(i, 0);
        for (std::size_t j = 0; j < A.cols(); ++j) (*ga)(i, j) += s * A(i, j);
      }
    }
  });
}

Var l2_normalize(Var a) {
  const Tensor& A = a.value();
  Tensor Y(A.rows(), A.cols());
  std::vector<double> norms(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (double v : A.row_span(i)) s += v * v;
    const double n = std::sqrt(s);
    if (n < kNormalizeFloor) throw NormalizationDegenerate("l2_normalize: row " + std::to_string(i) + " has norm below 1e-12");
    norms[i] = n;
    for (std::size_t j = 0; j < A.cols(); ++j) Y(i, j) = A(i, j) / n;
  }
  const std::size_t ia = a.id();
  return a.tape()->record(std::move(Y), {a}, [ia, norms](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    const Tensor& Y = t.value(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < Y.rows(); ++i) {
        double yg = 0.0;
        for (std::size_t j = 0; j < Y.cols(); ++j) yg += Y(i, j) * G(i, j);
        for (std::size_t j = 0; j < Y.cols(); ++j) (*ga)(i, j) += (G(i, j) - Y(i, j) * yg) / norms[i];
      }
    }
  });
}

Var squared_euclidean(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.shape() != B.shape()) throw ShapeMismatch("squared_euclidean: shapes differ");
  Tensor D(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const double d = A(i, j) - B(i, j);
      s += d * d;
    }
    D(i, 0) = s;
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(D), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    Tensor* ga = t.grad_sink(ia);
    Tensor* gb = t.grad_sink(ib);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t j = 0; j < A.cols(); ++j) {
        const double g = 2.0 * (A(i, j) - B(i, j)) * G(i, 0);
        if (ga) (*ga)(i, j) += g;
        if (gb) (*gb)(i, j) -= g;
      }
    }
  });
}

Var pairwise_squared_euclidean(Var a, Var b) {
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  if (A.cols() != B.cols()) throw ShapeMismatch("pairwise_squared_euclidean: widths differ");
  Tensor D(A.rows(), B.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    for (std::size_t j = 0; j < B.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < A.cols(); ++k) {
        const double d = A(i, k) - B(j, k);
        s += d * d;
      }
      D(i, j) = s;
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape()->record(std::move(D), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    const Tensor& A = t.value(ia);
    const Tensor& B = t.value(ib);
    Tensor* ga = t.grad_sink(ia);
    Tensor* gb = t.grad_sink(ib);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      for (std::size_t j = 0; j < B.rows(); ++j) {
        const double gij = G(i, j);
        if (gij == 0.0) continue;
        for (std::size_t k = 0; k < A.cols(); ++k) {
          const double g = 2.0 * (A(i, k) - B(j, k)) * gij;
          if (ga) (*ga)(i, k) += g;
          if (gb) (*gb)(j, k) -= g;
        }
      }
    }
  });
}

Var gather_cols(Var a, std::span<const std::size_t> cols) {
  const Tensor& A = a.value();
  if (cols.size() != A.rows()) throw ShapeMismatch("gather_cols: one index per row required");
  Tensor out(A.rows(), 1);
  for (std::size_t i = 0; i < A.rows(); ++i) {
    if (cols[i] >= A.cols()) throw ShapeMismatch("gather_cols: index out of range");
    out(i, 0) = A(i, cols[i]);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return a.tape()->record(std::move(out), {a}, [ia, idx](Tape& t, std::size_t self) {
    const Tensor& G = t.upstream(self);
    if (Tensor* ga = t.grad_sink(ia)) {
      for (std::size_t i = 0; i < idx.size(); ++i) (*ga)(i, idx[i]) += G(i, 0);
    }
  });
}

Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels) {
  const Tensor& Z = logits.value();
  if (labels.size() != Z.rows()) throw ShapeMismatch("softmax_cross_entropy: one label per row required");
  Tensor P(Z.rows(), Z.cols());
  double loss = 0.0;
  for (std::size_t i = 0; i < Z.rows(); ++i) {
    if (labels[i] >= Z.cols()) throw LabelOutOfRange(static_cast<long>(labels[i]), Z.cols());
    double mx = Z(i, 0);
    for (std::size_t j = 1; j < Z.cols(); ++j) mx = std::max(mx, Z(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < Z.cols(); ++j) s += std::exp(Z(i, j) - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < Z.cols(); ++j) P(i, j) = std::exp(Z(i, j) - lse);
    loss += lse - Z(i, labels[i]);
  }
  const std::size_t iz = logits.id();
  std::vector<std::size_t> y(labels.begin(), labels.end());
  return logits.tape()->record(Tensor::scalar(loss), {logits},
                               [iz, y, P = std::move(P)](Tape& t, std::size_t self) {
                                 const double g = t.upstream(self)[0];
                                 if (Tensor* gz = t.grad_sink(iz)) {
                                   for (std::size_t i = 0; i < P.rows(); ++i) {
                                     for (std::size_t j = 0; j < P.cols(); ++j) {
                                       (*gz)(i, j) += g * (P(i, j) - (j == y[i] ? 1.0 : 0.0));
                                     }
                                   }
                                 }
                               });
}

// ---- gradient check ---------------------------------------------------------

double grad_check(const ScalarFunction& f, const Tensor& x, double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw ValidationError("grad_check eps must lie in [1e-6, 1e-3]");
  Tensor analytic;
  {
    Tape tape;
    Var xv = tape.variable(x);
    Var y = f(tape, xv);
    if (y.value().size() != 1) throw ShapeMismatch("grad_check needs a scalar-valued function");
    tape.backward(y);
    analytic = xv.grad();
  }
  auto eval = [&](const Tensor& at) {
    Tape tape;
    Var y = f(tape, tape.variable(at));
    return y.value().item();
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = eval(probe);
    probe[i] = orig - eps;
    const double down = eval(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    if (!std::isfinite(numeric)) throw NonFiniteValue("grad_check: non-finite finite difference");
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace seje::ad
