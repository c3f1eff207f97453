#pragma once

#include "lfbm/params.hpp"

#include <map>
#include <string>

namespace lfbm {

struct AdamOptions {
  double lr = 4e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Multiplicative learning-rate factor applied once per completed epoch.
  double decay = 1.0;
};

struct AdamState {
  AdamOptions options;
  long long t = 0;
  long long epochs_completed = 0;
  std::map<std::string, Matrix> m;
  std::map<std::string, Matrix> v;

  AdamState() = default;
  explicit AdamState(AdamOptions opts) : options(opts) {}

  double effective_lr() const;
  void end_epoch() { ++epochs_completed; }
};

// One bias-corrected Adam descent step on every parameter of `params`, then
// zeroes their gradients. Throws ContractError if a parameter has no gradient.
void adam_step(ParamGroup& params, AdamState& state);

}  // namespace lfbm
