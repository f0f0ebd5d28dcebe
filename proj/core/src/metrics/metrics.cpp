#include "codespot/metrics/metrics.hpp"

#include <cmath>

#include "codespot/util/error.hpp"

namespace codespot::metrics {

namespace {
void check_percent(double v, const char* what) {
  if (!(v >= 0.0 && v <= 100.0)) {
    fail(ErrorKind::kDomain, std::string(what) + " must lie in [0, 100], got " + std::to_string(v));
  }
}
}  // namespace

void BenchmarkResult::validate() const {
  for (const auto& [name, score] : general_scores) check_percent(score, name.c_str());
  check_percent(code_score, "code score");
}

double avg_general(const BenchmarkResult& result) {
  if (result.general_scores.empty()) {
    fail(ErrorKind::kContract, "condition '" + result.condition_tag + "' has no general scores");
  }
  double total = 0.0;
  for (const auto& [name, score] : result.general_scores) total += score;
  return total / static_cast<double>(result.general_scores.size());
}

double relative_change(double original, double deactivated) {
  if (!(original > 0.0)) fail(ErrorKind::kDomain, "relative change against a non-positive original");
  return 100.0 * (deactivated - original) / original;
}

double monosemanticity(double original_code, double deactivated_code,
                       double original_general_avg, double deactivated_general_avg) {
  check_percent(original_code, "original code score");
  check_percent(deactivated_code, "deactivated code score");
  check_percent(original_general_avg, "original general average");
  check_percent(deactivated_general_avg, "deactivated general average");
  const double delta_code = original_code - deactivated_code;
  const double delta_general = original_general_avg - deactivated_general_avg;
  if (!(1.0 + delta_general > 0.0)) {
    fail(ErrorKind::kDomain, "monosemanticity undefined for a general-score gain of 1 point or more");
  }
  return delta_code / (1.0 + delta_general);
}

DerivedMetrics derive_original(const BenchmarkResult& original) {
  original.validate();
  DerivedMetrics m;
  m.avg_general = avg_general(original);
  return m;
}

DerivedMetrics derive(const BenchmarkResult& original, const BenchmarkResult& deactivated) {
  original.validate();
  deactivated.validate();
  const double base_avg = avg_general(original);
  DerivedMetrics m;
  m.avg_general = avg_general(deactivated);
  m.gtc_percent = relative_change(base_avg, m.avg_general);
  m.code_change_percent = relative_change(original.code_score, deactivated.code_score);
  m.m_s = monosemanticity(original.code_score, deactivated.code_score, base_avg, m.avg_general);
  return m;
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The 1e-9 nudge absorbs representation error in values like 3.155.
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

}  // namespace codespot::metrics
