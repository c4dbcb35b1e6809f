#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace adaptmix {

// Dense row-major float64 tensor. Shapes are lists of positive extents;
// a scalar is shape {1}.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v) { return Tensor({1}, {v}); }
  // Validating constructor for values coming from outside the math core:
  // rejects NaN/Inf entries and shape/data length mismatches.
  static Tensor from_data(std::vector<std::size_t> shape, std::vector<double> data);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1; }

  // 2-d accessors; rank-1 tensors are treated as column vectors [n, 1].
  std::size_t rows() const { return shape.empty() ? 0 : shape[0]; }
  std::size_t cols() const { return shape.size() >= 2 ? shape[1] : 1; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

std::string shape_to_string(const std::vector<std::size_t>& shape);

}  // namespace adaptmix
