#pragma once

// Minimal reverse-mode differentiation over dense row-major 2-D tensors.
//
// A Tape records every operation in creation order, so parents always precede
// children and a reverse sweep visits nodes in reverse topological order.
// Vectors are 1 x n rows; batches are N x d matrices; scalars are 1 x 1.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace seje::ad {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  bool operator==(const Shape&) const = default;
};

class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor row(std::span<const double> v);
  static Tensor rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const { return shape_.rows; }
  std::size_t cols() const { return shape_.cols; }
  std::size_t size() const { return data_.size(); }
  Shape shape() const { return shape_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_.cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_.cols + c]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * shape_.cols, shape_.cols}; }
  std::vector<double> row_vector(std::size_t r) const;

  double item() const;  // value of a 1 x 1 tensor
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Tensor& grad() const;
  Shape shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);

  // Seeds d(root)/d(root) = 1 and sweeps the tape once in reverse.
  // Root must be 1 x 1.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  // Zero tensor of the node's shape when nothing flowed into it.
  const Tensor& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  // Op plumbing: records a node. Parents that do not require gradients are
  // never visited during backward.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  // Accumulator for a parent's gradient (allocated lazily), or nullptr when
  // the parent does not require gradients.
  Tensor* grad_sink(std::size_t id);
  const Tensor& upstream(std::size_t id) const { return nodes_[id].grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
  mutable Tensor zero_;
};

// ---- op set ---------------------------------------------------------------
// Shape rules: add/sub/elementwise_mul accept equal shapes or a 1 x cols
// right operand broadcast over rows. Row-wise ops (l2_norm, l2_normalize,
// squared_euclidean) return one value per row.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var add_scalar(Var a, double c);
Var scalar_mul(Var a, double s);
Var elementwise_mul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var softplus(Var a);
Var log(Var a);
Var exp(Var a);
Var leaky_relu(Var a, double slope);
// Piecewise-constant derivative of leaky_relu; carries no gradient.
Var leaky_relu_slope_mask(Var a, double slope);
Var clamp_min(Var a, double lo);
Var concat(std::initializer_list<Var> parts);  // along columns
Var slice(Var a, std::size_t col_begin, std::size_t col_end);
Var slice_rows(Var a, std::size_t row_begin, std::size_t row_end);
Var reduce_sum(Var a);       // -> 1 x 1
Var reduce_mean(Var a);      // -> 1 x 1
Var row_sum(Var a);          // -> rows x 1
Var l2_norm(Var a);          // -> rows x 1; gradient 0 at the zero row
Var l2_normalize(Var a);     // rows scaled to unit norm; throws below 1e-12
Var squared_euclidean(Var a, Var b);           // -> rows x 1
Var pairwise_squared_euclidean(Var a, Var b);  // -> a.rows x b.rows
// out(i, 0) = a(i, cols[i])
Var gather_cols(Var a, std::span<const std::size_t> cols);
// Sum over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const std::size_t> labels);

inline constexpr double kNormalizeFloor = 1e-12;

// Central-difference check of a scalar function's tape gradient at x.
// Returns the largest |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
using ScalarFunction = std::function<Var(Tape&, Var)>;
double grad_check(const ScalarFunction& f, const Tensor& x, double eps);

}  // namespace seje::ad
