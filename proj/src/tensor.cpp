#include "lfbm/tensor.hpp"

#include "lfbm/error.hpp"

#include <cmath>
#include <string>
#include <unordered_set>

namespace lfbm {

namespace detail {

void Node::accumulate(const Matrix& g) {
  if (!has_grad) {
    grad = g;
    has_grad = true;
  } else {
    grad += g;
  }
}

}  // namespace detail

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

Tensor make_result(Matrix value, std::string_view op, std::vector<NodePtr> parents,
                   std::function<void(const Node&)> bw) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->value = std::make_shared<Matrix>(std::move(value));
  node->is_leaf = false;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p->requires_grad;
  if (needs) {
    node->requires_grad = true;
    node->parents = std::move(parents);
    node->backward = std::move(bw);
  }
  return Tensor(std::move(node));
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.value()) + " vs " +
                        shape_str(b.value()));
  }
}

void require_defined(const Tensor& a, std::string_view op) {
  if (!a.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

}  // namespace

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::constant(Matrix value) {
  check_finite(value, "constant");
  auto node = std::make_shared<Node>();
  node->value = std::make_shared<Matrix>(std::move(value));
  return Tensor(std::move(node));
}

Tensor Tensor::parameter(Matrix value) {
  check_finite(value, "parameter");
  auto node = std::make_shared<Node>();
  node->value = std::make_shared<Matrix>(std::move(value));
  node->requires_grad = true;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(std::move(m));
}

Eigen::Index Tensor::rows() const { return value().rows(); }
Eigen::Index Tensor::cols() const { return value().cols(); }
Eigen::Index Tensor::size() const { return value().size(); }

std::vector<std::size_t> Tensor::shape() const {
  return {static_cast<std::size_t>(rows()), static_cast<std::size_t>(cols())};
}

const Matrix& Tensor::value() const {
  require_defined(*this, "value");
  return *node_->value;
}

Matrix& Tensor::mutable_value() {
  require_defined(*this, "mutable_value");
  if (!node_->is_leaf) throw ContractError("mutable_value: tensor is not a leaf");
  return *node_->value;
}

double Tensor::item() const {
  if (size() != 1) throw ContractError("item: tensor is not scalar " + shape_str(value()));
  return value()(0, 0);
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }
bool Tensor::has_grad() const { return node_ && node_->has_grad; }

const Matrix& Tensor::grad() const {
  if (!has_grad()) throw ContractError("grad: tensor has no gradient");
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!node_) return;
  node_->grad.resize(0, 0);
  node_->has_grad = false;
}

Tensor Tensor::detached() const {
  require_defined(*this, "detached");
  auto node = std::make_shared<Node>();
  node->value = node_->value;
  return Tensor(std::move(node));
}

void check_finite(const Matrix& m, std::string_view what) {
  // A finite sum implies finite entries; only an overflowing sum needs the
  // element-wise scan.
  if (std::isfinite(m.sum())) return;
  if (!m.allFinite()) {
    throw NumericError("non-finite value produced by " + std::string(what) + " " + shape_str(m));
  }
}

void backward(const Tensor& root) {
  require_defined(root, "backward");
  if (root.size() != 1) throw ContractError("backward: root must be scalar, got " + shape_str(root.value()));
  if (!root.requires_grad()) return;

  // Iterative post-order DFS -> topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    if (!n->is_leaf) {
      n->grad.resize(0, 0);
      n->has_grad = false;
    }
  }
  Node* r = root.node().get();
  r->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->is_leaf || !n->has_grad || !n->backward) continue;
    n->backward(*n);
    check_finite(n->grad, "backward");
  }
}

// ---- primitives ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw ContractError("matmul: inner dimension mismatch " + shape_str(a.value()) + " * " +
                        shape_str(b.value()));
  }
  auto pa = a.node();
  auto pb = b.node();
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), "matmul", {pa, pb}, [pa, pb](const Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad * pb->value->transpose());
    if (pb->requires_grad) pb->accumulate(pa->value->transpose() * self.grad);
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.value() + b.value(), "add", {pa, pb}, [pa, pb](const Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(self.grad);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto pa = a.node();
  auto pb = b.node();
  return make_result(a.value() - b.value(), "sub", {pa, pb}, [pa, pb](const Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(-self.grad);
  });
}

Tensor add_bias(const Tensor& a, const Tensor& bias) {
  if (bias.rows() != 1 || bias.cols() != a.cols()) {
    throw ContractError("add_bias: bias " + shape_str(bias.value()) + " does not match " +
                        shape_str(a.value()));
  }
  auto pa = a.node();
  auto pb = bias.node();
  Matrix out = a.value();
  out.rowwise() += bias.value().row(0);
  return make_result(std::move(out), "add_bias", {pa, pb}, [pa, pb](const Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad);
    if (pb->requires_grad) pb->accumulate(self.grad.colwise().sum());
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto pa = a.node();
  auto pb = b.node();
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), "mul", {pa, pb}, [pa, pb](const Node& self) {
    if (pa->requires_grad) pa->accumulate(self.grad.cwiseProduct(*pb->value));
    if (pb->requires_grad) pb->accumulate(self.grad.cwiseProduct(*pa->value));
  });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ContractError("mul_row: row " + shape_str(row.value()) + " does not match " +
                        shape_str(a.value()));
  }
  auto pa = a.node();
  auto pr = row.node();
  Matrix out = a.value().array().rowwise() * row.value().row(0).array();
  return make_result(std::move(out), "mul_row", {pa, pr}, [pa, pr](const Node& self) {
    if (pa->requires_grad) {
      Matrix g = self.grad.array().rowwise() * pr->value->row(0).array();
      pa->accumulate(g);
    }
    if (pr->requires_grad) pr->accumulate(self.grad.cwiseProduct(*pa->value).colwise().sum());
  });
}

Tensor scale(const Tensor& a, double factor) {
  auto pa = a.node();
  return make_result(a.value() * factor, "scale", {pa}, [pa, factor](const Node& self) {
    pa->accumulate(self.grad * factor);
  });
}

Tensor add_scalar(const Tensor& a, double c) {
  auto pa = a.node();
  Matrix out = a.value().array() + c;
  return make_result(std::move(out), "add_scalar", {pa},
                     [pa](const Node& self) { pa->accumulate(self.grad); });
}

Tensor tanh(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().array().tanh();
  auto y = std::make_shared<Matrix>(out);
  return make_result(std::move(out), "tanh", {pa}, [pa, y](const Node& self) {
    Matrix g = self.grad.array() * (1.0 - y->array().square());
    pa->accumulate(g);
  });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  auto pa = a.node();
  Matrix out = a.value().unaryExpr([negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; });
  return make_result(std::move(out), "leaky_relu", {pa}, [pa, negative_slope](const Node& self) {
    Matrix g = self.grad.binaryExpr(*pa->value, [negative_slope](double gi, double xi) {
      return xi > 0.0 ? gi : negative_slope * gi;
    });
    pa->accumulate(g);
  });
}

Tensor exp(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().array().exp();
  auto y = std::make_shared<Matrix>(out);
  return make_result(std::move(out), "exp", {pa}, [pa, y](const Node& self) {
    pa->accumulate(self.grad.cwiseProduct(*y));
  });
}

Tensor log(const Tensor& a) {
  auto pa = a.node();
  if ((a.value().array() <= 0.0).any()) throw NumericError("log of non-positive value");
  Matrix out = a.value().array().log();
  return make_result(std::move(out), "log", {pa}, [pa](const Node& self) {
    pa->accumulate(self.grad.cwiseQuotient(*pa->value));
  });
}

Tensor square(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().array().square();
  return make_result(std::move(out), "square", {pa}, [pa](const Node& self) {
    pa->accumulate(2.0 * self.grad.cwiseProduct(*pa->value));
  });
}

Tensor sum(const Tensor& a) {
  auto pa = a.node();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return make_result(std::move(out), "sum", {pa}, [pa](const Node& self) {
    pa->accumulate(Matrix::Constant(pa->value->rows(), pa->value->cols(), self.grad(0, 0)));
  });
}

Tensor sum_cols(const Tensor& a) {
  auto pa = a.node();
  Matrix out = a.value().rowwise().sum();
  return make_result(std::move(out), "sum_cols", {pa}, [pa](const Node& self) {
    Matrix g = self.grad.col(0).replicate(1, pa->value->cols());
    pa->accumulate(g);
  });
}

Tensor masked_sum_cols(const Tensor& a, const Matrix& mask) {
  if (mask.rows() != a.rows() || mask.cols() != a.cols()) {
    throw ContractError("masked_sum_cols: mask " + shape_str(mask) + " does not match " +
                        shape_str(a.value()));
  }
  auto pa = a.node();
  auto m = std::make_shared<Matrix>(mask);
  Matrix out = a.value().cwiseProduct(mask).rowwise().sum();
  return make_result(std::move(out), "masked_sum_cols", {pa}, [pa, m](const Node& self) {
    Matrix g = m->array().colwise() * self.grad.col(0).array();
    pa->accumulate(g);
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw ContractError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor select_cols(const Tensor& a, std::span<const int> index) {
  const Matrix& v = a.value();
  Matrix out(v.rows(), static_cast<Eigen::Index>(index.size()));
  for (std::size_t j = 0; j < index.size(); ++j) {
    if (index[j] < 0 || index[j] >= v.cols()) throw ContractError("select_cols: index out of range");
    out.col(static_cast<Eigen::Index>(j)) = v.col(index[j]);
  }
  auto pa = a.node();
  std::vector<int> idx(index.begin(), index.end());
  return make_result(std::move(out), "select_cols", {pa}, [pa, idx](const Node& self) {
    Matrix g = Matrix::Zero(pa->value->rows(), pa->value->cols());
    for (std::size_t j = 0; j < idx.size(); ++j) g.col(idx[j]) += self.grad.col(static_cast<Eigen::Index>(j));
    pa->accumulate(g);
  });
}

Tensor merge_cols(const Tensor& a, std::span<const int> ia, const Tensor& b, std::span<const int> ib,
                  Eigen::Index total_cols) {
  if (static_cast<Eigen::Index>(ia.size()) != a.cols() || static_cast<Eigen::Index>(ib.size()) != b.cols() ||
      a.rows() != b.rows() || static_cast<Eigen::Index>(ia.size() + ib.size()) != total_cols) {
    throw ContractError("merge_cols: inconsistent split");
  }
  Matrix out(a.rows(), total_cols);
  for (std::size_t j = 0; j < ia.size(); ++j) out.col(ia[j]) = a.value().col(static_cast<Eigen::Index>(j));
  for (std::size_t j = 0; j < ib.size(); ++j) out.col(ib[j]) = b.value().col(static_cast<Eigen::Index>(j));
  auto pa = a.node();
  auto pb = b.node();
  std::vector<int> xa(ia.begin(), ia.end());
  std::vector<int> xb(ib.begin(), ib.end());
  return make_result(std::move(out), "merge_cols", {pa, pb}, [pa, pb, xa, xb](const Node& self) {
    if (pa->requires_grad) {
      Matrix g(self.grad.rows(), static_cast<Eigen::Index>(xa.size()));
      for (std::size_t j = 0; j < xa.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = self.grad.col(xa[j]);
      pa->accumulate(g);
    }
    if (pb->requires_grad) {
      Matrix g(self.grad.rows(), static_cast<Eigen::Index>(xb.size()));
      for (std::size_t j = 0; j < xb.size(); ++j) g.col(static_cast<Eigen::Index>(j)) = self.grad.col(xb[j]);
      pb->accumulate(g);
    }
  });
}

}  // namespace lfbm
