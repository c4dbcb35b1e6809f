#include "adaptmix/param_set.hpp"

#include <stdexcept>

namespace adaptmix {

void ParamSet::add(std::string name, Tensor t) {
  if (has(name)) throw std::invalid_argument("ParamSet: duplicate name '" + name + "'");
  items_.emplace_back(std::move(name), std::move(t));
}

const Tensor& ParamSet::get(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return t;
  }
  throw std::invalid_argument("ParamSet: no parameter named '" + name + "'");
}

bool ParamSet::has(const std::string& name) const {
  for (const auto& [n, t] : items_) {
    if (n == name) return true;
  }
  return false;
}

std::size_t ParamSet::total_params() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.size();
  return n;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_params());
  for (const auto& [name, t] : items_) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

ParamSet ParamSet::with_values(std::span<const double> flat) const {
  if (flat.size() != total_params()) {
    throw std::invalid_argument("ParamSet: flat vector of length " + std::to_string(flat.size()) +
                                " for layout of " + std::to_string(total_params()) + " parameters");
  }
  ParamSet out;
  std::size_t pos = 0;
  for (const auto& [name, t] : items_) {
    Tensor copy = t;
    for (std::size_t i = 0; i < copy.size(); ++i) copy.data[i] = flat[pos + i];
    pos += copy.size();
    out.items_.emplace_back(name, std::move(copy));
  }
  return out;
}

}  // namespace adaptmix
