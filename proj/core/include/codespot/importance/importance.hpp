#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codespot/model/model.hpp"
#include "codespot/trainer/trainer.hpp"

namespace codespot::importance {

inline constexpr std::string_view kTotalTag = "total";

// Per-scalar nonnegative scores aligned to a parameter registry.
struct ImportanceMap {
  std::string language_tag;
  std::vector<double> scores;
  std::uint64_t batch_count = 0;
  std::uint64_t registry_digest = 0;
};

// Which gradient magnitude enters the score.
enum class GradientMode {
  kMeanOverSteps,  // mean |grad| over every fine-tuning batch
  kFinalBatch,     // |grad| of the last fine-tuning batch only
};

std::string_view to_string(GradientMode mode);
GradientMode parse_gradient_mode(std::string_view text);

// score_j = |grad_j| * |theta_j|
std::vector<double> taylor_scores(std::span<const double> abs_gradient,
                                  std::span<const double> parameters);

// Scores one language from its fine-tuning run, using |theta| of the
// fine-tuned parameters. Contract error when the accumulator is empty.
ImportanceMap score_language(const trainer::FinetuneOutput& output, std::string language_tag,
                             GradientMode mode = GradientMode::kMeanOverSteps);

// Elementwise sum of the maps in input order. With normalize set, each map is
// first scaled to unit sum (degenerate-input error on an all-zero map).
ImportanceMap aggregate(std::span<const ImportanceMap> maps, bool normalize);

struct SpotMask {
  std::vector<bool> selected;
  double k_percent = 0.0;
  double threshold_score = 0.0;  // smallest selected score
  std::uint64_t registry_digest = 0;

  std::size_t count() const;
  std::size_t size() const { return selected.size(); }
  std::vector<std::size_t> indices() const;
  bool operator==(const SpotMask&) const = default;
};

// round(k/100 * total), at least 1.
std::size_t spot_size(std::size_t total_scalars, double k_percent);

// Top round(k/100 * d) scalars in descending score order, ties broken by
// ascending registry index. Config error unless 0 < k_percent <= 100.
SpotMask select_top_k(const ImportanceMap& total, double k_percent);

// Same, restricted to scalars flagged in `eligible`.
SpotMask select_top_k(const ImportanceMap& total, double k_percent, const std::vector<bool>& eligible);

// Flags every scalar whose tensor name does not start with one of the prefixes.
std::vector<bool> eligibility(const model::ParameterRegistry& registry,
                              std::span<const std::string> excluded_prefixes);

// File formats (little-endian):
//   map:  "CSPTIMAP" | u32 version | u64 registry digest | u32 len + tag bytes
//         | u64 batch count | u64 n | f64[n]
//   mask: "CSPTMASK" | u32 version | f64 k_percent | f64 threshold
//         | u64 registry digest | u64 n | u64 selected count
//         | ceil(n/8) bytes, bit j%8 of byte j/8 set when scalar j is selected
inline constexpr std::uint32_t kMapFormatVersion = 1;
inline constexpr std::uint32_t kMaskFormatVersion = 1;

void save_importance_map(const ImportanceMap& map, const std::filesystem::path& path);
// Digest error when the file's registry digest differs from expected_digest.
ImportanceMap load_importance_map(const std::filesystem::path& path, std::uint64_t expected_digest);

void save_spot_mask(const SpotMask& mask, const std::filesystem::path& path);
SpotMask load_spot_mask(const std::filesystem::path& path, std::uint64_t expected_digest);

}  // namespace codespot::importance
