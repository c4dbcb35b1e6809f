#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adaptmix/tensor.hpp"

namespace adaptmix {

// Named collection of tensors with a stable iteration order. flatten and
// with_values round-trip exactly; the flat layout is the concatenation of
// tensors in insertion order.
class ParamSet {
 public:
  void add(std::string name, Tensor t);

  const Tensor& get(const std::string& name) const;
  bool has(const std::string& name) const;

  std::size_t count() const { return items_.size(); }
  std::size_t total_params() const;

  const std::string& name_at(std::size_t i) const { return items_[i].first; }
  const Tensor& tensor_at(std::size_t i) const { return items_[i].second; }

  std::vector<double> flatten() const;
  // Same names/shapes, values taken from the flat vector.
  ParamSet with_values(std::span<const double> flat) const;

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

}  // namespace adaptmix
