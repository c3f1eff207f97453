#include "lfbm/flow.hpp"

#include "lfbm/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lfbm {

namespace {

Tensor ones_column(Eigen::Index n) { return Tensor::constant(Matrix::Ones(n, 1)); }

// clamp * tanh(raw / clamp)
Tensor soft_clamp(const Tensor& raw, double clamp) { return scale(tanh(scale(raw, 1.0 / clamp)), clamp); }

}  // namespace

Tensor standard_normal_log_density(const Tensor& x) {
  const double c = -0.5 * static_cast<double>(x.cols()) * std::log(2.0 * std::numbers::pi);
  return add_scalar(scale(sum_cols(square(x)), -0.5), c);
}

FlowModel::FlowModel(const FlowConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.dim < 1) throw ContractError("FlowModel: dim must be >= 1");
  if (cfg_.depth < 1) throw ContractError("FlowModel: depth must be >= 1");
  if (cfg_.hidden < 1) throw ContractError("FlowModel: hidden width must be >= 1");
  if (!(cfg_.clamp > 0.0)) throw ContractError("FlowModel: clamp must be positive");

  const int d = cfg_.dim;
  for (int i = 0; i < d; ++i) (i % 2 == 0 ? even_ : odd_).push_back(i);
  perm_.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) perm_[static_cast<std::size_t>(i)] = d - 1 - i;

  std::mt19937_64 rng(seed);
  const int da = static_cast<int>(even_.size());
  const int db = static_cast<int>(odd_.size());
  for (int l = 0; l < cfg_.depth; ++l) {
    const std::string p = step_prefix(l);
    params_.add(p + ".actnorm.log_scale", Matrix::Zero(1, d));
    params_.add(p + ".actnorm.bias", Matrix::Zero(1, d));
    if (db > 0) {
      scale_nets_.emplace_back(params_, p + ".scale", std::vector<int>{da, cfg_.hidden, cfg_.hidden, db},
                               Activation::Tanh, Activation::Identity, rng, true);
      shift_nets_.emplace_back(params_, p + ".shift", std::vector<int>{da, cfg_.hidden, cfg_.hidden, db},
                               Activation::Tanh, Activation::Identity, rng, true);
    }
  }
}

std::string FlowModel::step_prefix(int l) const { return "step" + std::to_string(l); }

void FlowModel::check_dim(const Tensor& x, const char* op) const {
  if (x.cols() != cfg_.dim) {
    throw ContractError(std::string(op) + ": expected latent dimension " + std::to_string(cfg_.dim) + ", got " +
                        std::to_string(x.cols()));
  }
}

FlowModel FlowModel::frozen() const {
  FlowModel out = *this;
  out.params_ = params_.detached();
  return out;
}

FlowPass FlowModel::forward(const Tensor& z0) const {
  check_dim(z0, "flow_forward");
  const Eigen::Index n = z0.rows();
  const Tensor ones = ones_column(n);
  Tensor x = z0;
  Tensor log_det = Tensor::constant(Matrix::Zero(n, 1));
  for (int l = 0; l < cfg_.depth; ++l) {
    const std::string p = step_prefix(l);
    const Tensor& ls = params_.at(p + ".actnorm.log_scale");
    const Tensor& bias = params_.at(p + ".actnorm.bias");
    x = add_bias(mul_row(x, exp(ls)), bias);
    log_det = add(log_det, matmul(ones, sum_cols(ls)));
    x = select_cols(x, perm_);
    if (!odd_.empty()) {
      const auto li = static_cast<std::size_t>(l);
      Tensor a = select_cols(x, even_);
      Tensor b = select_cols(x, odd_);
      Tensor s = soft_clamp(scale_nets_[li].forward(params_, a), cfg_.clamp);
      Tensor t = shift_nets_[li].forward(params_, a);
      b = add(mul(b, exp(s)), t);
      x = merge_cols(a, even_, b, odd_, cfg_.dim);
      log_det = add(log_det, sum_cols(s));
    }
  }
  return {x, log_det};
}

FlowPass FlowModel::inverse(const Tensor& z) const {
  check_dim(z, "flow_inverse");
  const Eigen::Index n = z.rows();
  const Tensor ones = ones_column(n);
  Tensor x = z;
  Tensor log_det = Tensor::constant(Matrix::Zero(n, 1));
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    const std::string p = step_prefix(l);
    if (!odd_.empty()) {
      const auto li = static_cast<std::size_t>(l);
      Tensor a = select_cols(x, even_);
      Tensor b = select_cols(x, odd_);
      Tensor s = soft_clamp(scale_nets_[li].forward(params_, a), cfg_.clamp);
      Tensor t = shift_nets_[li].forward(params_, a);
      b = mul(sub(b, t), exp(scale(s, -1.0)));
      x = merge_cols(a, even_, b, odd_, cfg_.dim);
      log_det = sub(log_det, sum_cols(s));
    }
    x = select_cols(x, perm_);  // reversal is an involution
    const Tensor& ls = params_.at(p + ".actnorm.log_scale");
    const Tensor& bias = params_.at(p + ".actnorm.bias");
    x = mul_row(add_bias(x, scale(bias, -1.0)), exp(scale(ls, -1.0)));
    log_det = sub(log_det, matmul(ones, sum_cols(ls)));
  }
  return {x, log_det};
}

Tensor FlowModel::log_prob(const Tensor& z) const {
  FlowPass inv = inverse(z);
  return add(standard_normal_log_density(inv.out), inv.log_det);
}

void FlowModel::initialize_actnorm(const Matrix& z) {
  if (z.cols() != cfg_.dim) throw ContractError("initialize_actnorm: latent dimension mismatch");
  if (z.rows() < 2) throw ContractError("initialize_actnorm: need at least two samples");
  const FlowModel view = frozen();
  Tensor x = Tensor::constant(z);
  for (int l = cfg_.depth - 1; l >= 0; --l) {
    const std::string p = step_prefix(l);
    if (!odd_.empty()) {
      const auto li = static_cast<std::size_t>(l);
      Tensor a = select_cols(x, even_);
      Tensor b = select_cols(x, odd_);
      Tensor s = soft_clamp(view.scale_nets_[li].forward(view.params_, a), cfg_.clamp);
      Tensor t = view.shift_nets_[li].forward(view.params_, a);
      b = mul(sub(b, t), exp(scale(s, -1.0)));
      x = merge_cols(a, even_, b, odd_, cfg_.dim);
    }
    x = select_cols(x, perm_);
    const Matrix& y = x.value();
    Eigen::RowVectorXd mu = y.colwise().mean();
    Matrix centered = y.rowwise() - mu;
    Eigen::RowVectorXd sd = (centered.array().square().colwise().sum() / static_cast<double>(y.rows())).sqrt();
    Matrix ls(1, cfg_.dim);
    for (int j = 0; j < cfg_.dim; ++j) ls(0, j) = std::log(std::max(sd(j), 1e-6));
    params_.at(p + ".actnorm.log_scale").mutable_value() = ls;
    params_.at(p + ".actnorm.bias").mutable_value() = mu;
    Matrix next = centered.array().rowwise() / ls.row(0).array().exp();
    x = Tensor::constant(std::move(next));
  }
  actnorm_initialized_ = true;
}

std::vector<Matrix> FlowModel::coupling_log_scales(const Matrix& z0) const {
  std::vector<Matrix> out;
  if (odd_.empty()) return out;
  const FlowModel view = frozen();
  Tensor x = Tensor::constant(z0);
  for (int l = 0; l < cfg_.depth; ++l) {
    const std::string p = step_prefix(l);
    x = add_bias(mul_row(x, exp(view.params_.at(p + ".actnorm.log_scale"))), view.params_.at(p + ".actnorm.bias"));
    x = select_cols(x, perm_);
    const auto li = static_cast<std::size_t>(l);
    Tensor a = select_cols(x, even_);
    Tensor b = select_cols(x, odd_);
    Tensor s = soft_clamp(view.scale_nets_[li].forward(view.params_, a), cfg_.clamp);
    Tensor t = view.shift_nets_[li].forward(view.params_, a);
    out.push_back(s.value());
    x = merge_cols(a, even_, add(mul(b, exp(s)), t), odd_, cfg_.dim);
  }
  return out;
}

FlowOutput flow_forward(const FlowModel& model, const Matrix& z0) {
  FlowPass p = model.frozen().forward(Tensor::constant(z0));
  return {p.out.value(), p.log_det.value().col(0)};
}

FlowOutput flow_inverse(const FlowModel& model, const Matrix& z) {
  FlowPass p = model.frozen().inverse(Tensor::constant(z));
  return {p.out.value(), p.log_det.value().col(0)};
}

Vector flow_log_prob(const FlowModel& model, const Matrix& z) {
  return model.frozen().log_prob(Tensor::constant(z)).value().col(0);
}

Matrix flow_sample(const FlowModel& model, int n, std::mt19937_64& rng) {
  if (n < 1) throw ContractError("flow_sample: n must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z0(n, model.dim());
  for (Eigen::Index i = 0; i < z0.size(); ++i) z0.data()[i] = normal(rng);
  return flow_forward(model, z0).z;
}

Matrix grad_log_prob_z(const FlowModel& model, const Matrix& z) {
  Tensor zt = Tensor::parameter(z);
  backward(sum(model.frozen().log_prob(zt)));
  return zt.grad();
}

}  // namespace lfbm
