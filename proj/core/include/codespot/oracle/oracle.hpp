#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codespot/autodiff/ops.hpp"
#include "codespot/corpus/batching.hpp"
#include "codespot/model/model.hpp"

namespace codespot::oracle {

struct LeaveOneOutResult {
  std::vector<std::size_t> indices;  // scalar indices, in sweep order
  std::vector<double> true_delta;    // |L(theta, theta_j = 0) - L(theta)|
  double base_loss = 0.0;
};

// Zeroes each scalar of the subset in turn (all scalars when absent),
// evaluates the target-weighted mean loss over the batches and restores the
// value bit-exactly. Numeric error naming j on a non-finite loss.
LeaveOneOutResult leave_one_out(const model::ModelState& model,
                                std::span<const corpus::TokenBatch> batches,
                                std::optional<std::span<const std::size_t>> subset = std::nullopt);

// 1-based ranks with ties sharing their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// Spearman rank correlation (Pearson over average ranks). Contract error on
// unequal lengths or fewer than two values, degenerate-input error when either
// vector is constant.
double spearman(std::span<const double> a, std::span<const double> b);

// Indices of the k largest values, ties to the lower index.
std::vector<std::size_t> topk_indices(std::span<const double> values, std::size_t k_count);

// |topk(a) & topk(b)| / k_count.
double topk_overlap(std::span<const double> a, std::span<const double> b, std::size_t k_count);

// index,param,offset,importance,true_delta
std::string leave_one_out_csv(const model::ParameterRegistry& registry, const LeaveOneOutResult& loo,
                              std::span<const double> importance);

// ---- finite-difference gradient checks ----

struct GradCheckCase {
  ad::ops::OpKind op = ad::ops::OpKind::kAdd;
  std::size_t index = 0;
  std::string description;
  std::size_t scalars = 0;      // number of input coordinates checked
  double max_rel_error = 0.0;       // elementwise, denominators clamped at 1e-8
  double max_normwise_error = 0.0;  // per input tensor, worst input (diagnostic)
  bool ok = false;
};

struct GradCheckSummary {
  std::vector<GradCheckCase> cases;
  double tolerance = 0.0;
  double epsilon = 0.0;

  std::size_t failures() const;
  bool all_ok() const { return !cases.empty() && failures() == 0; }
  double worst() const;
  nlohmann::json to_json() const;
};

// Random cases for every op kind. Each case builds a scalar loss as a random
// weighted sum of the op's output and compares the tape gradient with central
// differences for every input coordinate.
GradCheckSummary run_gradcheck(std::uint64_t seed, std::size_t cases_per_op, double epsilon = 1e-5,
                               double tolerance = 1e-6);

// Tape gradient versus central differences for the whole model loss on one
// batch over the given scalar indices, as a normwise relative error.
double model_gradcheck(const model::ModelState& model, const corpus::TokenBatch& batch,
                       std::span<const std::size_t> indices, double epsilon = 1e-5);

// ---- first-order Taylor consistency ----

struct TaylorProbe {
  std::size_t index = 0;
  double theta = 0.0;
  double first_order = 0.0;  // |g_j * theta_j|
  double true_delta = 0.0;   // |L(theta_j = 0) - L|
  double rel_error = 0.0;    // |true_delta - first_order| / first_order
};

// Relative size below which |g_j * theta_j| cannot be resolved against the loss.
inline constexpr double kTaylorResolution = 1e-10;

// Probes up to max_probes scalars with 0 < |theta_j| <= max_abs_theta and
// |g_j * theta_j| >= kTaylorResolution * L, choosing those with the largest
// |g_j * theta_j| (g from the target-weighted mean loss over the batches).
std::vector<TaylorProbe> taylor_probes(const model::ModelState& model,
                                       std::span<const corpus::TokenBatch> batches,
                                       double max_abs_theta, std::size_t max_probes);

// Gradient of the target-weighted mean loss over several batches.
std::vector<double> mean_loss_gradient(const model::ModelState& model,
                                       std::span<const corpus::TokenBatch> batches);

}  // namespace codespot::oracle
