#include "adaptmix/finite_diff.hpp"

#include <cmath>
#include <stdexcept>

namespace adaptmix {

std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& x, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("finite_difference_gradient: epsilon must be positive");
  std::vector<double> grad(x.size(), 0.0);
  std::vector<double> probe = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double saved = probe[k];
    probe[k] = saved + epsilon;
    const double fp = f(probe);
    probe[k] = saved - epsilon;
    const double fm = f(probe);
    probe[k] = saved;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::runtime_error("finite_difference_gradient: non-finite evaluation at coordinate " +
                               std::to_string(k));
    }
    grad[k] = (fp - fm) / (2.0 * epsilon);
  }
  return grad;
}

std::vector<double> finite_difference_gradient(const std::function<double(const ParamSet&)>& f,
                                               const ParamSet& params, double epsilon) {
  const auto wrapped = [&](const std::vector<double>& flat) { return f(params.with_values(flat)); };
  return finite_difference_gradient(wrapped, params.flatten(), epsilon);
}

double max_relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({1.0, std::fabs(a[i]), std::fabs(b[i])});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace adaptmix
