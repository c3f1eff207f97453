#include "lfbm/params.hpp"

#include "lfbm/error.hpp"

namespace lfbm {

Tensor& ParamGroup::add(const std::string& name, Matrix value) {
  if (contains(name)) throw ContractError("ParamGroup: duplicate parameter name '" + name + "'");
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, Tensor::parameter(std::move(value)));
  return entries_.back().second;
}

Tensor& ParamGroup::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamGroup: unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

const Tensor& ParamGroup::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("ParamGroup: unknown parameter '" + name + "'");
  return entries_[it->second].second;
}

std::size_t ParamGroup::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += static_cast<std::size_t>(t.size());
  return n;
}

void ParamGroup::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

ParamGroup ParamGroup::detached() const {
  ParamGroup out;
  out.index_ = index_;
  out.entries_.reserve(entries_.size());
  for (const auto& [name, t] : entries_) out.entries_.emplace_back(name, t.detached());
  return out;
}

ParamGroup ParamGroup::clone() const {
  ParamGroup out;
  for (const auto& [name, t] : entries_) out.add(name, t.value());
  return out;
}

void ParamGroup::assign(const ParamGroup& other) {
  if (other.size() != size()) throw ContractError("ParamGroup::assign: size mismatch");
  for (auto& [name, t] : entries_) {
    const Tensor& src = other.at(name);
    if (src.rows() != t.rows() || src.cols() != t.cols()) {
      throw ContractError("ParamGroup::assign: shape mismatch for '" + name + "'");
    }
    t.mutable_value() = src.value();
  }
}

Vector ParamGroup::flat_grad() const {
  Vector out(static_cast<Eigen::Index>(num_scalars()));
  Eigen::Index k = 0;
  for (const auto& [name, t] : entries_) {
    const Eigen::Index n = t.size();
    if (t.has_grad()) {
      out.segment(k, n) = Eigen::Map<const Vector>(t.grad().data(), n);
    } else {
      out.segment(k, n).setZero();
    }
    k += n;
  }
  return out;
}

Vector ParamGroup::flat_values() const {
  Vector out(static_cast<Eigen::Index>(num_scalars()));
  Eigen::Index k = 0;
  for (const auto& [name, t] : entries_) {
    const Eigen::Index n = t.size();
    out.segment(k, n) = Eigen::Map<const Vector>(t.value().data(), n);
    k += n;
  }
  return out;
}

}  // namespace lfbm
