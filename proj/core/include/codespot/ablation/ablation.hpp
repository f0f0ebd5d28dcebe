#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "codespot/corpus/batching.hpp"
#include "codespot/importance/importance.hpp"
#include "codespot/metrics/metrics.hpp"
#include "codespot/model/model.hpp"

namespace codespot::ablation {

enum class MaskSource { kOriginal, kCodingSpot, kRandomMatched, kBottomK };

std::string_view to_string(MaskSource source);
MaskSource parse_mask_source(std::string_view text);

// Copy of `model` with every selected scalar set to 0.0. Digest error when the
// mask was built for another registry, contract error on a length mismatch.
model::ModelState apply_mask(const model::ModelState& model, const importance::SpotMask& mask);

// Uniformly random mask with the spot's cardinality, k and digest.
importance::SpotMask random_matched_mask(const importance::SpotMask& spot, std::uint64_t seed);

// The round(k/100 * d) lowest-scoring scalars, ties broken by ascending index.
importance::SpotMask bottom_k_mask(const importance::ImportanceMap& total, double k_percent);

enum class SplitRole { kCode, kHoldout, kGeneral };

std::string_view to_string(SplitRole role);

struct EvalSplit {
  std::string tag;
  SplitRole role = SplitRole::kCode;
  std::vector<corpus::TokenBatch> batches;
};

struct AblationPlan {
  std::vector<importance::SpotMask> spots;  // one per k, ascending k not required
  std::size_t n_random_seeds = 10;
  std::uint64_t random_seed = 0;
  bool include_bottom_k = true;
};

struct AblationRecord {
  double k_percent = 0.0;  // 0 for the original model
  MaskSource source = MaskSource::kOriginal;
  std::optional<std::uint64_t> seed;
  std::string split_tag;
  double accuracy = 0.0;
};

// Accuracies of one masked model, folded by split role.
struct ConditionScores {
  double k_percent = 0.0;
  MaskSource source = MaskSource::kOriginal;
  std::optional<std::uint64_t> seed;
  double code = 0.0;  // mean over code splits
  double general = 0.0;
  std::optional<double> holdout;
  std::size_t masked_count = 0;
};

struct ConditionMetrics {
  ConditionScores scores;
  double code_drop = 0.0;  // original - masked, percentage points
  double general_drop = 0.0;
  std::optional<double> holdout_drop;
  metrics::DerivedMetrics derived;
};

// Spot versus the random-matched baseline at one k.
struct KSummary {
  double k_percent = 0.0;
  std::size_t mask_count = 0;
  ConditionMetrics spot;
  std::optional<ConditionMetrics> bottom_k;
  double random_mean_code_drop = 0.0;
  double random_mean_general_drop = 0.0;
  std::optional<double> random_mean_holdout_drop;
  std::optional<double> random_mean_m_s;
  bool spot_beats_random_code = false;
  bool spot_general_below_code = false;
  std::optional<bool> spot_beats_random_holdout;
};

struct AblationReport {
  std::vector<std::string> split_tags;
  std::vector<SplitRole> split_roles;
  std::vector<AblationRecord> records;
  ConditionMetrics original;
  std::vector<ConditionMetrics> conditions;  // every masked model, in run order
  std::vector<KSummary> summaries;           // one per spot, in plan order

  nlohmann::json to_json() const;
  // One row per masked model mirroring the published table layout.
  std::string to_table_csv() const;
  // k_percent, mask_source, split_tag, mean accuracy, min, max (random rows aggregate seeds).
  std::string to_curve_csv() const;
};

inline constexpr int kReportSchemaVersion = 1;

// Evaluates the unmasked base model, then for every spot: the spot mask,
// n_random_seeds random-matched masks and optionally the bottom-k control.
// Needs at least one code split and exactly one general split. Errors are
// rethrown with (k, mask_source) context. `total` is only read for bottom-k.
AblationReport run_ablation_suite(const model::ModelState& base, const importance::ImportanceMap& total,
                                  std::span<const EvalSplit> splits, const AblationPlan& plan);

// Derived metrics of a masked condition relative to the original.
ConditionMetrics derive_condition(const ConditionScores& original, const ConditionScores& masked);

}  // namespace codespot::ablation
