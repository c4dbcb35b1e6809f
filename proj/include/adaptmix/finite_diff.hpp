#pragma once

#include <functional>
#include <vector>

#include "adaptmix/param_set.hpp"

namespace adaptmix {

// Central-difference gradient (f(x+eps*e_k) - f(x-eps*e_k)) / (2 eps) per
// coordinate. f must be deterministic given its input; a non-finite
// evaluation is reported with the offending coordinate index.
std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& x, double epsilon);

// Same oracle over a ParamSet, differentiating through its flat layout.
std::vector<double> finite_difference_gradient(const std::function<double(const ParamSet&)>& f,
                                               const ParamSet& params, double epsilon);

// max_i |a_i - b_i| / max(1, |a_i|, |b_i|); the per-coordinate relative
// error used by every gradient check in the test suites.
double max_relative_error(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace adaptmix
