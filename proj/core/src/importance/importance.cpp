#include "codespot/importance/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "codespot/util/error.hpp"

namespace codespot::importance {

std::string_view to_string(GradientMode mode) {
  return mode == GradientMode::kMeanOverSteps ? "mean_over_steps" : "final_batch";
}

GradientMode parse_gradient_mode(std::string_view text) {
  if (text == "mean_over_steps") return GradientMode::kMeanOverSteps;
  if (text == "final_batch") return GradientMode::kFinalBatch;
  fail(ErrorKind::kConfig, "unknown gradient mode '" + std::string(text) + "'");
}

std::vector<double> taylor_scores(std::span<const double> abs_gradient,
                                  std::span<const double> parameters) {
  if (abs_gradient.size() != parameters.size()) {
    fail(ErrorKind::kContract, "gradient and parameter vectors differ in length");
  }
  std::vector<double> scores(parameters.size());
  for (std::size_t j = 0; j < scores.size(); ++j) {
    scores[j] = std::abs(abs_gradient[j]) * std::abs(parameters[j]);
  }
  return scores;
}

ImportanceMap score_language(const trainer::FinetuneOutput& output, std::string language_tag,
                             GradientMode mode) {
  if (output.accumulator.empty()) {
    fail(ErrorKind::kContract, "cannot score '" + language_tag + "': no accumulated gradients");
  }
  if (language_tag == kTotalTag) {
    fail(ErrorKind::kContract, "'total' is reserved for aggregated maps");
  }
  const std::vector<double> grad = mode == GradientMode::kMeanOverSteps
                                       ? output.accumulator.mean_abs()
                                       : output.accumulator.last_abs();
  ImportanceMap map;
  map.language_tag = std::move(language_tag);
  map.scores = taylor_scores(grad, output.model.parameters);
  map.batch_count = output.accumulator.count();
  map.registry_digest = output.model.registry.digest();
  return map;
}

ImportanceMap aggregate(std::span<const ImportanceMap> maps, bool normalize) {
  if (maps.empty()) fail(ErrorKind::kContract, "aggregate needs at least one map");
  ImportanceMap total;
  total.language_tag = std::string(kTotalTag);
  total.registry_digest = maps.front().registry_digest;
  total.scores.assign(maps.front().scores.size(), 0.0);
  for (const auto& m : maps) {
    if (m.language_tag == kTotalTag) fail(ErrorKind::kContract, "cannot aggregate a 'total' map");
    if (m.scores.size() != total.scores.size()) {
      fail(ErrorKind::kContract, "importance maps differ in length");
    }
    if (m.registry_digest != total.registry_digest) {
      fail(ErrorKind::kDigest, "importance maps come from different registries");
    }
    double factor = 1.0;
    if (normalize) {
      double s = 0.0;
      for (double v : m.scores) s += v;
      if (!(s > 0.0)) {
        fail(ErrorKind::kDegenerate, "cannot normalise all-zero map '" + m.language_tag + "'");
      }
      factor = 1.0 / s;
    }
    for (std::size_t j = 0; j < m.scores.size(); ++j) total.scores[j] += m.scores[j] * factor;
    total.batch_count += m.batch_count;
  }
  return total;
}

std::size_t SpotMask::count() const {
  return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true));
}

std::vector<std::size_t> SpotMask::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < selected.size(); ++j) {
    if (selected[j]) out.push_back(j);
  }
  return out;
}

std::size_t spot_size(std::size_t total_scalars, double k_percent) {
  if (!(k_percent > 0.0 && k_percent <= 100.0)) {
    fail(ErrorKind::kConfig, "k_percent must lie in (0, 100]");
  }
  const auto n = static_cast<std::size_t>(
      std::llround(k_percent / 100.0 * static_cast<double>(total_scalars)));
  return std::clamp<std::size_t>(n, 1, total_scalars);
}

SpotMask select_top_k(const ImportanceMap& total, double k_percent, const std::vector<bool>& eligible) {
  const std::size_t d = total.scores.size();
  if (d == 0) fail(ErrorKind::kContract, "cannot select from an empty map");
  if (eligible.size() != d) fail(ErrorKind::kContract, "eligibility mask length mismatch");
  const std::size_t n = spot_size(d, k_percent);

  std::vector<std::size_t> candidates;
  candidates.reserve(d);
  for (std::size_t j = 0; j < d; ++j) {
    if (eligible[j]) candidates.push_back(j);
  }
  if (candidates.size() < n) {
    fail(ErrorKind::kConfig, "only " + std::to_string(candidates.size()) +
                                 " eligible scalars for a spot of " + std::to_string(n));
  }
  const auto& s = total.scores;
  auto before = [&s](std::size_t a, std::size_t b) {
    return s[a] > s[b] || (s[a] == s[b] && a < b);
  };
  std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n - 1),
                   candidates.end(), before);

  SpotMask mask;
  mask.selected.assign(d, false);
  mask.k_percent = k_percent;
  mask.registry_digest = total.registry_digest;
  mask.threshold_score = s[candidates[n - 1]];
  for (std::size_t i = 0; i < n; ++i) mask.selected[candidates[i]] = true;
  return mask;
}

SpotMask select_top_k(const ImportanceMap& total, double k_percent) {
  return select_top_k(total, k_percent, std::vector<bool>(total.scores.size(), true));
}

std::vector<bool> eligibility(const model::ParameterRegistry& registry,
                              std::span<const std::string> excluded_prefixes) {
  std::vector<bool> out(registry.total_scalars(), true);
  for (const auto& e : registry.entries()) {
    const bool excluded = std::any_of(excluded_prefixes.begin(), excluded_prefixes.end(),
                                      [&](const std::string& p) { return e.name.starts_with(p); });
    if (!excluded) continue;
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(e.offset),
              out.begin() + static_cast<std::ptrdiff_t>(e.offset + e.size), false);
  }
  return out;
}

}  // namespace codespot::importance
