#pragma once

#include <functional>
#include <span>

#include "codespot/autodiff/tensor.hpp"

namespace codespot::ad {

using ScalarFunction = std::function<double(const Tensor&)>;

// Central-difference gradient estimate of f at point:
//   (f(x + eps e_j) - f(x - eps e_j)) / (2 eps)   for every scalar j.
// f must be pure; it receives a perturbed copy of point. epsilon must lie in
// (0, 1e-2]. A non-finite evaluation is a numeric error.
Tensor finite_difference_grad(const ScalarFunction& f, const Tensor& point, double epsilon);

// max_j |a_j - b_j| / max(|a_j|, |b_j|, floor)
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-8);

// max_j |a_j - b_j| / max(max_j |a_j|, max_j |b_j|, floor)
double normwise_relative_error(std::span<const double> a, std::span<const double> b,
                               double floor = 1e-12);

}  // namespace codespot::ad
