#include "codespot/autodiff/finite_difference.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "codespot/util/error.hpp"

namespace codespot::ad {

Tensor finite_difference_grad(const ScalarFunction& f, const Tensor& point, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    fail(ErrorKind::kConfig, "finite_difference_grad: epsilon must lie in (0, 1e-2]");
  }
  std::vector<double> x(point.data().begin(), point.data().end());
  std::vector<double> grad(x.size());
  auto eval = [&](std::size_t j) {
    const double v = f(Tensor::from_data(point.shape(), x));
    if (!std::isfinite(v)) {
      fail(ErrorKind::kNumeric,
           "finite_difference_grad: non-finite evaluation at coordinate " + std::to_string(j));
    }
    return v;
  };
  for (std::size_t j = 0; j < x.size(); ++j) {
    const double saved = x[j];
    x[j] = saved + epsilon;
    const double plus = eval(j);
    x[j] = saved - epsilon;
    const double minus = eval(j);
    x[j] = saved;
    grad[j] = (plus - minus) / (2.0 * epsilon);
  }
  return Tensor::from_data(point.shape(), std::move(grad));
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) fail(ErrorKind::kContract, "max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

double normwise_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) fail(ErrorKind::kContract, "normwise_relative_error: length mismatch");
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return diff / scale;
}

}  // namespace codespot::ad
