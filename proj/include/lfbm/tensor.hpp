#pragma once

// Dense 2-D tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle onto a graph node. Leaves are either constants
// or parameters (requires_grad). Every op builds a new node whose backward
// closure pushes the incoming gradient to the parents that require it.
// Batches are laid out as (rows = examples, cols = features), row-major.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

namespace lfbm {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

namespace detail {

struct Node {
  std::shared_ptr<Matrix> value;
  Matrix grad;
  bool has_grad = false;
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this->grad and accumulates into parents.
  std::function<void(const Node&)> backward;

  void accumulate(const Matrix& g);
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::Index size() const;
  std::vector<std::size_t> shape() const;

  const Matrix& value() const;
  // Direct write access for optimizers and perturbation oracles. Only legal
  // on leaves; changes are seen by every handle sharing this storage.
  Matrix& mutable_value();
  double item() const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  const Matrix& grad() const;
  void zero_grad();

  // Constant leaf sharing this tensor's value storage. Gradients never flow
  // through it; used to evaluate models with frozen parameters.
  Tensor detached() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Runs reverse-mode differentiation from a 1x1 root. Leaf gradients
// accumulate across calls until zero_grad(); intermediate gradients are
// recomputed on every call.
void backward(const Tensor& root);

// Throws NumericError naming `what` if m holds NaN or Inf.
void check_finite(const Matrix& m, std::string_view what);

// ---- primitives -----------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
// a (n x m) + b (1 x m), row broadcast.
Tensor add_bias(const Tensor& a, const Tensor& bias);
Tensor mul(const Tensor& a, const Tensor& b);
// a (n x m) * r (1 x m), row broadcast.
Tensor mul_row(const Tensor& a, const Tensor& row);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double c);
Tensor tanh(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope = 0.2);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
// Sum of all entries, 1 x 1.
Tensor sum(const Tensor& a);
// Per-row sum, n x 1.
Tensor sum_cols(const Tensor& a);
// Per-row sum of mask-weighted entries; mask is a constant of a's shape.
Tensor masked_sum_cols(const Tensor& a, const Matrix& mask);
Tensor mean(const Tensor& a);
// Column gather: out(:, j) = a(:, index[j]).
Tensor select_cols(const Tensor& a, std::span<const int> index);
// Inverse of a split: out(:, ia[j]) = a(:, j), out(:, ib[j]) = b(:, j).
Tensor merge_cols(const Tensor& a, std::span<const int> ia, const Tensor& b,
                  std::span<const int> ib, Eigen::Index total_cols);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }

}  // namespace lfbm
