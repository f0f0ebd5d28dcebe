#include "codespot/ablation/ablation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fmt/format.h>
#include <random>

#include "codespot/util/error.hpp"

namespace codespot::ablation {

using importance::ImportanceMap;
using importance::SpotMask;
using model::ModelState;

std::string_view to_string(MaskSource source) {
  switch (source) {
    case MaskSource::kOriginal: return "original";
    case MaskSource::kCodingSpot: return "coding_spot";
    case MaskSource::kRandomMatched: return "random_matched";
    case MaskSource::kBottomK: return "bottom_k";
  }
  return "unknown";
}

MaskSource parse_mask_source(std::string_view text) {
  for (MaskSource s : {MaskSource::kOriginal, MaskSource::kCodingSpot, MaskSource::kRandomMatched,
                       MaskSource::kBottomK}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorKind::kConfig, "unknown mask source '" + std::string(text) + "'");
}

std::string_view to_string(SplitRole role) {
  switch (role) {
    case SplitRole::kCode: return "code";
    case SplitRole::kHoldout: return "holdout";
    case SplitRole::kGeneral: return "general";
  }
  return "unknown";
}

ModelState apply_mask(const ModelState& model, const SpotMask& mask) {
  if (mask.registry_digest != model.registry.digest()) {
    fail(ErrorKind::kDigest, fmt::format("mask digest {:016x} does not match model registry {:016x}",
                                         mask.registry_digest, model.registry.digest()));
  }
  if (mask.size() != model.parameters.size()) {
    fail(ErrorKind::kContract, fmt::format("mask covers {} scalars, model has {}", mask.size(),
                                           model.parameters.size()));
  }
  ModelState out = model;
  for (std::size_t j = 0; j < out.parameters.size(); ++j) {
    if (mask.selected[j]) out.parameters[j] = 0.0;
  }
  return out;
}

SpotMask random_matched_mask(const SpotMask& spot, std::uint64_t seed) {
  const std::size_t d = spot.size();
  const std::size_t n = spot.count();
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(d)};
  std::mt19937_64 rng(seq);
  // Partial Fisher-Yates over the index range.
  std::vector<std::size_t> idx(d);
  for (std::size_t j = 0; j < d; ++j) idx[j] = j;
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  SpotMask out;
  out.selected.assign(d, false);
  for (std::size_t i = 0; i < n; ++i) out.selected[idx[i]] = true;
  out.k_percent = spot.k_percent;
  out.threshold_score = 0.0;
  out.registry_digest = spot.registry_digest;
  return out;
}

SpotMask bottom_k_mask(const ImportanceMap& total, double k_percent) {
  const std::size_t d = total.scores.size();
  if (d == 0) fail(ErrorKind::kContract, "cannot select from an empty map");
  const std::size_t n = importance::spot_size(d, k_percent);
  std::vector<std::size_t> idx(d);
  for (std::size_t j = 0; j < d; ++j) idx[j] = j;
  const auto& s = total.scores;
  auto before = [&s](std::size_t a, std::size_t b) { return s[a] < s[b] || (s[a] == s[b] && a < b); };
  std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n - 1), idx.end(), before);
  SpotMask out;
  out.selected.assign(d, false);
  for (std::size_t i = 0; i < n; ++i) out.selected[idx[i]] = true;
  out.k_percent = k_percent;
  out.threshold_score = s[idx[n - 1]];
  out.registry_digest = total.registry_digest;
  return out;
}

ConditionMetrics derive_condition(const ConditionScores& original, const ConditionScores& masked) {
  ConditionMetrics m;
  m.scores = masked;
  m.code_drop = original.code - masked.code;
  m.general_drop = original.general - masked.general;
  if (original.holdout && masked.holdout) m.holdout_drop = *original.holdout - *masked.holdout;
  m.derived.avg_general = masked.general;
  if (original.general > 0.0) m.derived.gtc_percent = metrics::relative_change(original.general, masked.general);
  if (original.code > 0.0) m.derived.code_change_percent = metrics::relative_change(original.code, masked.code);
  if (masked.source != MaskSource::kOriginal && 1.0 + m.general_drop > 0.0) {
    m.derived.m_s = metrics::monosemanticity(original.code, masked.code, original.general, masked.general);
  }
  return m;
}

namespace {

struct SuiteContext {
  const ModelState& base;
  std::span<const EvalSplit> splits;
  AblationReport& report;
};

ConditionScores evaluate_condition(SuiteContext& ctx, const ModelState& model, double k,
                                   MaskSource source, std::optional<std::uint64_t> seed,
                                   std::size_t masked_count) {
  ConditionScores c;
  c.k_percent = k;
  c.source = source;
  c.seed = seed;
  c.masked_count = masked_count;
  double code_sum = 0.0;
  std::size_t code_n = 0;
  for (const EvalSplit& split : ctx.splits) {
    double acc = 0.0;
    try {
      acc = model::eval_accuracy(model, split.batches);
    } catch (const Error& e) {
      fail(e.kind(), fmt::format("k={} mask_source={} split={}: {}", k, to_string(source), split.tag,
                                 e.what()));
    }
    ctx.report.records.push_back({k, source, seed, split.tag, acc});
    switch (split.role) {
      case SplitRole::kCode:
        code_sum += acc;
        ++code_n;
        break;
      case SplitRole::kHoldout: c.holdout = acc; break;
      case SplitRole::kGeneral: c.general = acc; break;
    }
  }
  c.code = code_sum / static_cast<double>(code_n);
  return c;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

AblationReport run_ablation_suite(const ModelState& base, const ImportanceMap& total,
                                  std::span<const EvalSplit> splits, const AblationPlan& plan) {
  std::size_t n_code = 0;
  std::size_t n_general = 0;
  std::size_t n_holdout = 0;
  for (const auto& s : splits) {
    if (s.batches.empty()) fail(ErrorKind::kData, "evaluation split '" + s.tag + "' has no batches");
    n_code += s.role == SplitRole::kCode;
    n_general += s.role == SplitRole::kGeneral;
    n_holdout += s.role == SplitRole::kHoldout;
  }
  if (n_code == 0) fail(ErrorKind::kConfig, "ablation needs at least one code split");
  if (n_general != 1) fail(ErrorKind::kConfig, "ablation needs exactly one general split");
  if (n_holdout > 1) fail(ErrorKind::kConfig, "ablation takes at most one hold-out split");
  if (plan.spots.empty()) fail(ErrorKind::kConfig, "ablation plan has no spot masks");
  if (total.registry_digest != base.registry.digest()) {
    fail(ErrorKind::kDigest, "importance map does not match the base model registry");
  }

  AblationReport report;
  for (const auto& s : splits) {
    report.split_tags.push_back(s.tag);
    report.split_roles.push_back(s.role);
  }
  SuiteContext ctx{base, splits, report};

  const ConditionScores original = evaluate_condition(ctx, base, 0.0, MaskSource::kOriginal, std::nullopt, 0);
  report.original = derive_condition(original, original);

  for (const SpotMask& spot : plan.spots) {
    const double k = spot.k_percent;
    KSummary summary;
    summary.k_percent = k;
    summary.mask_count = spot.count();

    summary.spot = derive_condition(
        original, evaluate_condition(ctx, apply_mask(base, spot), k, MaskSource::kCodingSpot,
                                     std::nullopt, spot.count()));
    report.conditions.push_back(summary.spot);

    std::vector<double> code_drops;
    std::vector<double> general_drops;
    std::vector<double> holdout_drops;
    std::vector<double> m_s_values;
    for (std::size_t i = 0; i < plan.n_random_seeds; ++i) {
      const std::uint64_t seed = plan.random_seed + i;
      const SpotMask random = random_matched_mask(spot, seed);
      const ConditionMetrics m = derive_condition(
          original, evaluate_condition(ctx, apply_mask(base, random), k, MaskSource::kRandomMatched,
                                       seed, random.count()));
      code_drops.push_back(m.code_drop);
      general_drops.push_back(m.general_drop);
      if (m.holdout_drop) holdout_drops.push_back(*m.holdout_drop);
      if (m.derived.m_s) m_s_values.push_back(*m.derived.m_s);
      report.conditions.push_back(m);
    }

    if (plan.include_bottom_k) {
      const SpotMask bottom = bottom_k_mask(total, k);
      summary.bottom_k = derive_condition(
          original, evaluate_condition(ctx, apply_mask(base, bottom), k, MaskSource::kBottomK,
                                       std::nullopt, bottom.count()));
      report.conditions.push_back(*summary.bottom_k);
    }

    if (!code_drops.empty()) {
      summary.random_mean_code_drop = mean(code_drops);
      summary.random_mean_general_drop = mean(general_drops);
      if (!holdout_drops.empty()) summary.random_mean_holdout_drop = mean(holdout_drops);
      if (m_s_values.size() == code_drops.size()) summary.random_mean_m_s = mean(m_s_values);
      summary.spot_beats_random_code = summary.spot.code_drop > summary.random_mean_code_drop;
      if (summary.spot.holdout_drop && summary.random_mean_holdout_drop) {
        summary.spot_beats_random_holdout = *summary.spot.holdout_drop > *summary.random_mean_holdout_drop;
      }
    }
    summary.spot_general_below_code = summary.spot.general_drop < summary.spot.code_drop;
    report.summaries.push_back(summary);
  }
  return report;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json condition_json(const ConditionMetrics& m) {
  nlohmann::json j;
  j["k_percent"] = m.scores.k_percent;
  j["mask_source"] = to_string(m.scores.source);
  j["seed"] = m.scores.seed ? nlohmann::json(*m.scores.seed) : nlohmann::json(nullptr);
  j["masked_count"] = m.scores.masked_count;
  j["code_accuracy"] = m.scores.code;
  j["general_accuracy"] = m.scores.general;
  j["holdout_accuracy"] = optional_json(m.scores.holdout);
  j["code_drop"] = m.code_drop;
  j["general_drop"] = m.general_drop;
  j["holdout_drop"] = optional_json(m.holdout_drop);
  j["gtc_percent"] = m.derived.gtc_percent;
  j["code_change_percent"] = m.derived.code_change_percent;
  j["m_s"] = optional_json(m.derived.m_s);
  return j;
}

}  // namespace

nlohmann::json AblationReport::to_json() const {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  nlohmann::json splits = nlohmann::json::array();
  for (std::size_t i = 0; i < split_tags.size(); ++i) {
    splits.push_back({{"tag", split_tags[i]}, {"role", to_string(split_roles[i])}});
  }
  j["splits"] = splits;
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : records) {
    recs.push_back({{"k_percent", r.k_percent},
                    {"mask_source", to_string(r.source)},
                    {"seed", r.seed ? nlohmann::json(*r.seed) : nlohmann::json(nullptr)},
                    {"split_tag", r.split_tag},
                    {"accuracy", r.accuracy}});
  }
  j["records"] = recs;
  j["original"] = condition_json(original);
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) conds.push_back(condition_json(c));
  j["conditions"] = conds;
  nlohmann::json sums = nlohmann::json::array();
  for (const auto& s : summaries) {
    nlohmann::json e;
    e["k_percent"] = s.k_percent;
    e["mask_count"] = s.mask_count;
    e["coding_spot"] = condition_json(s.spot);
    e["bottom_k"] = s.bottom_k ? condition_json(*s.bottom_k) : nlohmann::json(nullptr);
    e["random_mean_code_drop"] = s.random_mean_code_drop;
    e["random_mean_general_drop"] = s.random_mean_general_drop;
    e["random_mean_holdout_drop"] = optional_json(s.random_mean_holdout_drop);
    e["random_mean_m_s"] = optional_json(s.random_mean_m_s);
    e["spot_beats_random_code"] = s.spot_beats_random_code;
    e["spot_general_below_code"] = s.spot_general_below_code;
    e["spot_beats_random_holdout"] =
        s.spot_beats_random_holdout ? nlohmann::json(*s.spot_beats_random_holdout) : nlohmann::json(nullptr);
    sums.push_back(e);
  }
  j["summaries"] = sums;
  return j;
}

namespace {

std::string cell(const std::optional<double>& v) {
  return v ? fmt::format("{:.2f}", metrics::round_half_up(*v)) : std::string();
}

}  // namespace

std::string AblationReport::to_table_csv() const {
  std::string out =
      "k_percent,mask_source,seed,code_accuracy,general_accuracy,holdout_accuracy,gtc_percent,"
      "code_change_percent,m_s\n";
  auto row = [&out](const ConditionMetrics& m, bool is_original) {
    out += fmt::format("{},{},{},{:.2f},{:.2f},{},{},{},{}\n",
                       is_original ? std::string("original") : fmt::format("{}", m.scores.k_percent),
                       to_string(m.scores.source), m.scores.seed ? std::to_string(*m.scores.seed) : "",
                       metrics::round_half_up(m.scores.code), metrics::round_half_up(m.scores.general),
                       cell(m.scores.holdout),
                       is_original ? "" : cell(m.derived.gtc_percent),
                       is_original ? "" : cell(m.derived.code_change_percent), cell(m.derived.m_s));
  };
  row(original, true);
  for (const auto& c : conditions) row(c, false);
  return out;
}

std::string AblationReport::to_curve_csv() const {
  struct Acc {
    double sum = 0.0, lo = 0.0, hi = 0.0;
    std::size_t n = 0;
  };
  std::vector<std::tuple<double, MaskSource, std::string>> keys;
  std::vector<Acc> accs;
  for (const auto& r : records) {
    const auto key = std::make_tuple(r.k_percent, r.source, r.split_tag);
    auto it = std::find(keys.begin(), keys.end(), key);
    if (it == keys.end()) {
      keys.push_back(key);
      accs.push_back({r.accuracy, r.accuracy, r.accuracy, 1});
      continue;
    }
    Acc& a = accs[static_cast<std::size_t>(it - keys.begin())];
    a.sum += r.accuracy;
    a.lo = std::min(a.lo, r.accuracy);
    a.hi = std::max(a.hi, r.accuracy);
    ++a.n;
  }
  std::string out = "k_percent,mask_source,split_tag,mean_accuracy,min_accuracy,max_accuracy,n\n";
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto& [k, source, tag] = keys[i];
    const Acc& a = accs[i];
    out += fmt::format("{},{},{},{:.17g},{:.17g},{:.17g},{}\n", k, to_string(source), tag,
                       a.sum / static_cast<double>(a.n), a.lo, a.hi, a.n);
  }
  return out;
}

}  // namespace codespot::ablation
