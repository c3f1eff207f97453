#pragma once

#include "lfbm/tensor.hpp"

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lfbm {

// Named parameter tensors in deterministic insertion order.
class ParamGroup {
 public:
  using Entry = std::pair<std::string, Tensor>;

  // Adds a parameter leaf initialized with `value`; names must be unique.
  Tensor& add(const std::string& name, Matrix value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t num_scalars() const;
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad();
  // Constant copies sharing value storage (no gradient flow).
  ParamGroup detached() const;
  // Deep copy of the values into fresh parameter leaves.
  ParamGroup clone() const;
  // Overwrites values from another group with identical names and shapes.
  void assign(const ParamGroup& other);

  // Concatenated gradients in iteration order (zeros where absent).
  Vector flat_grad() const;
  Vector flat_values() const;

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace lfbm
