#include "adaptmix/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace adaptmix {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (const std::size_t e : shape) n *= e;
  return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
  for (const std::size_t e : shape) {
    if (e == 0) throw std::invalid_argument("Tensor: zero extent in shape " + shape_to_string(shape));
  }
  if (shape_product(shape) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + shape_to_string(shape) + " does not match data length " +
                                std::to_string(data.size()));
  }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::from_data(std::vector<std::size_t> shape, std::vector<double> data) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw std::invalid_argument("Tensor: non-finite entry at index " + std::to_string(i));
    }
  }
  return Tensor(std::move(shape), std::move(data));
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ",";
    s += std::to_string(shape[i]);
  }
  s += "]";
  return s;
}

}  // namespace adaptmix
