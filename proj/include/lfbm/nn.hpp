#pragma once

#include "lfbm/params.hpp"

#include <optional>
#include <random>
#include <string>
#include <vector>

namespace lfbm {

enum class Activation { Identity, Tanh, LeakyReLU };

Tensor activate(const Tensor& x, Activation a);

// Fully connected network whose weights live in an external ParamGroup under
// `<prefix>.w<i>` / `<prefix>.b<i>`, so the same layout can be evaluated on a
// live or a detached parameter set.
class Mlp {
 public:
  Mlp() = default;
  // sizes = {in, hidden..., out}. Weights ~ N(0, 1/fan_in), biases zero; the
  // final layer is zero-initialized when zero_last is set.
  Mlp(ParamGroup& params, std::string prefix, std::vector<int> sizes, Activation hidden, Activation output,
      std::mt19937_64& rng, bool zero_last = false);

  // Optional constant connectivity masks, one per layer (shape in x out).
  void set_masks(std::vector<Matrix> masks);

  Tensor forward(const ParamGroup& params, const Tensor& x) const;

  int in_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
  int out_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::vector<int> sizes_;
  Activation hidden_ = Activation::Tanh;
  Activation output_ = Activation::Identity;
  std::vector<Tensor> masks_;
};

}  // namespace lfbm
