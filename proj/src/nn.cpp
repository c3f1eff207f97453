#include "lfbm/nn.hpp"

#include "lfbm/error.hpp"

#include <cmath>

namespace lfbm {

Tensor activate(const Tensor& x, Activation a) {
  switch (a) {
    case Activation::Identity:
      return x;
    case Activation::Tanh:
      return tanh(x);
    case Activation::LeakyReLU:
      return leaky_relu(x, 0.2);
  }
  return x;
}

Mlp::Mlp(ParamGroup& params, std::string prefix, std::vector<int> sizes, Activation hidden, Activation output,
         std::mt19937_64& rng, bool zero_last)
    : prefix_(std::move(prefix)), sizes_(std::move(sizes)), hidden_(hidden), output_(output) {
  if (sizes_.size() < 2) throw ContractError("Mlp: need at least input and output sizes");
  for (int s : sizes_) {
    if (s < 1) throw ContractError("Mlp: layer sizes must be positive");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    const int fan_in = sizes_[i];
    const int fan_out = sizes_[i + 1];
    Matrix w(fan_in, fan_out);
    if (zero_last && i + 1 == layers) {
      w.setZero();
    } else {
      const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = std * normal(rng);
    }
    params.add(prefix_ + ".w" + std::to_string(i), std::move(w));
    params.add(prefix_ + ".b" + std::to_string(i), Matrix::Zero(1, fan_out));
  }
}

void Mlp::set_masks(std::vector<Matrix> masks) {
  if (masks.size() + 1 != sizes_.size()) throw ContractError("Mlp::set_masks: one mask per layer required");
  masks_.clear();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    if (masks[i].rows() != sizes_[i] || masks[i].cols() != sizes_[i + 1]) {
      throw ContractError("Mlp::set_masks: mask shape mismatch");
    }
    masks_.push_back(Tensor::constant(std::move(masks[i])));
  }
}

Tensor Mlp::forward(const ParamGroup& params, const Tensor& x) const {
  if (x.cols() != in_dim()) {
    throw ContractError("Mlp '" + prefix_ + "': expected " + std::to_string(in_dim()) + " inputs, got " +
                        std::to_string(x.cols()));
  }
  Tensor h = x;
  const std::size_t layers = sizes_.size() - 1;
  for (std::size_t i = 0; i < layers; ++i) {
    Tensor w = params.at(prefix_ + ".w" + std::to_string(i));
    if (!masks_.empty()) w = mul(w, masks_[i]);
    h = add_bias(matmul(h, w), params.at(prefix_ + ".b" + std::to_string(i)));
    h = activate(h, i + 1 == layers ? output_ : hidden_);
  }
  return h;
}

}  // namespace lfbm
