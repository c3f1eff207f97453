#include "lfbm/generator.hpp"

#include "lfbm/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lfbm {

Generator::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.latent_dim < 1 || cfg_.data_dim < 1) throw ContractError("Generator: dimensions must be positive");
  if (!(cfg_.sigma > 0.0)) throw ContractError("Generator: sigma must be positive");
  std::vector<int> sizes;
  sizes.push_back(cfg_.latent_dim);
  for (int h : cfg_.hidden) sizes.push_back(h);
  sizes.push_back(cfg_.data_dim);
  std::mt19937_64 rng(seed);
  net_ = Mlp(params_, "gen", sizes, Activation::LeakyReLU, cfg_.output, rng);
}

Generator Generator::frozen() const {
  Generator out = *this;
  out.params_ = params_.detached();
  return out;
}

Tensor Generator::decode(const Tensor& z) const {
  if (z.cols() != cfg_.latent_dim) {
    throw ContractError("decode: expected latent dimension " + std::to_string(cfg_.latent_dim) + ", got " +
                        std::to_string(z.cols()));
  }
  return net_.forward(params_, z);
}

Matrix expand_mask(const Matrix& mask, Eigen::Index n, Eigen::Index data_dim) {
  if (mask.cols() != data_dim || (mask.rows() != 1 && mask.rows() != n)) {
    throw ContractError("mask shape (" + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                        ") does not match data (" + std::to_string(n) + "x" + std::to_string(data_dim) + ")");
  }
  if (((mask.array() != 0.0) && (mask.array() != 1.0)).any()) throw ContractError("mask entries must be 0 or 1");
  Matrix out = mask.rows() == n ? mask : mask.replicate(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (out.row(i).sum() == 0.0) {
      throw ContractError("mask for example " + std::to_string(i) + " has no visible coordinates");
    }
  }
  return out;
}

Tensor Generator::log_likelihood(const Matrix& x, const Tensor& z, const Matrix* mask) const {
  if (x.rows() != z.rows() || x.cols() != cfg_.data_dim) {
    throw ContractError("log_likelihood: x shape does not match (" + std::to_string(z.rows()) + "x" +
                        std::to_string(cfg_.data_dim) + ")");
  }
  const double s2 = cfg_.sigma * cfg_.sigma;
  const double log_norm = std::log(2.0 * std::numbers::pi * s2);
  Tensor r2 = square(sub(Tensor::constant(x), decode(z)));
  if (mask == nullptr) {
    const double count = static_cast<double>(cfg_.data_dim);
    return add_scalar(scale(sum_cols(r2), -0.5 / s2), -0.5 * count * log_norm);
  }
  const Matrix m = expand_mask(*mask, x.rows(), x.cols());
  Matrix visible = m.rowwise().sum();
  Tensor quad = scale(masked_sum_cols(r2, m), -0.5 / s2);
  return add(quad, Tensor::constant(visible * (-0.5 * log_norm)));
}

Matrix decode(const Generator& gen, const Matrix& z) {
  return gen.frozen().decode(Tensor::constant(z)).value();
}

Vector log_likelihood(const Generator& gen, const Matrix& x, const Matrix& z) {
  return gen.frozen().log_likelihood(x, Tensor::constant(z)).value().col(0);
}

Vector masked_log_likelihood(const Generator& gen, const Matrix& x, const Matrix& z, const Matrix& mask) {
  return gen.frozen().log_likelihood(x, Tensor::constant(z), &mask).value().col(0);
}

Tensor joint_log_prob_graph(const FlowModel& frozen_prior, const Generator& frozen_gen, const Matrix& x,
                            const Tensor& z, const Matrix* mask) {
  if (frozen_prior.dim() != frozen_gen.latent_dim()) throw ContractError("prior and generator latent dims differ");
  return add(frozen_prior.log_prob(z), frozen_gen.log_likelihood(x, z, mask));
}

Vector joint_log_prob(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                      const Matrix* mask) {
  return joint_log_prob_graph(prior.frozen(), gen.frozen(), x, Tensor::constant(z), mask).value().col(0);
}

Matrix posterior_grad_z(const FlowModel& prior, const Generator& gen, const Matrix& x, const Matrix& z,
                        const Matrix* mask) {
  Tensor zt = Tensor::parameter(z);
  backward(sum(joint_log_prob_graph(prior.frozen(), gen.frozen(), x, zt, mask)));
  return zt.grad();
}

}  // namespace lfbm
