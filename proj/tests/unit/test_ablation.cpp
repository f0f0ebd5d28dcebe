#include <gtest/gtest.h>

#include <bit>
#include <set>

#include "codespot/ablation/ablation.hpp"
#include "codespot/corpus/batching.hpp"
#include "codespot/corpus/corpus.hpp"
#include "test_support.hpp"

namespace codespot::ablation {
namespace {

const model::ModelConfig kTiny{64, 16, 8, 2, 1, 12};

importance::ImportanceMap ramp_map(const model::ModelState& m) {
  importance::ImportanceMap map;
  map.language_tag = "total";
  map.registry_digest = m.registry.digest();
  for (std::size_t j = 0; j < m.parameters.size(); ++j) {
    map.scores.push_back(static_cast<double>((j * 7919) % 1000));
  }
  return map;
}

std::vector<EvalSplit> tiny_splits() {
  auto split = [](corpus::GrammarId g, std::string tag, SplitRole role) {
    const auto c = corpus::generate_corpus({tag, g, 3}, 10, 0.5).eval;
    return EvalSplit{tag, role, corpus::sequential_batches(c, 8, 16)};
  };
  std::vector<EvalSplit> s;
  s.push_back(split(corpus::GrammarId::kCLike, "c_like", SplitRole::kCode));
  s.push_back(split(corpus::GrammarId::kLispLike, "lisp_like", SplitRole::kCode));
  s.push_back(split(corpus::GrammarId::kPyLike, "py_like", SplitRole::kHoldout));
  const auto g = corpus::generate_general_corpus(4, 10, 0.5).eval;
  s.push_back(EvalSplit{"general", SplitRole::kGeneral, corpus::sequential_batches(g, 8, 16)});
  return s;
}

TEST(ApplyMask, EmptyMaskIsIdentity) {
  const auto m = model::init_model(kTiny);
  importance::SpotMask empty;
  empty.selected.assign(m.parameters.size(), false);
  empty.registry_digest = m.registry.digest();
  EXPECT_EQ(apply_mask(m, empty).parameters, m.parameters);
}

TEST(ApplyMask, ZeroesSelectionOnlyAndIsIdempotent) {
  const auto m = model::init_model(kTiny);
  const auto before = m.content_hash();
  const auto mask = importance::select_top_k(ramp_map(m), 5.0);
  const auto once = apply_mask(m, mask);
  EXPECT_EQ(m.content_hash(), before);
  EXPECT_EQ(apply_mask(once, mask).parameters, once.parameters);
  for (std::size_t j = 0; j < m.parameters.size(); ++j) {
    if (mask.selected[j]) {
      EXPECT_EQ(once.parameters[j], 0.0);
    } else {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(once.parameters[j]),
                std::bit_cast<std::uint64_t>(m.parameters[j]));
    }
  }
}

TEST(ApplyMask, Errors) {
  const auto m = model::init_model(kTiny);
  auto mask = importance::select_top_k(ramp_map(m), 5.0);
  auto wrong = mask;
  wrong.registry_digest ^= 1;
  EXPECT_ERROR_KIND(apply_mask(m, wrong), ErrorKind::kDigest);
  mask.selected.pop_back();
  EXPECT_ERROR_KIND(apply_mask(m, mask), ErrorKind::kContract);
}

TEST(ApplyMask, FullMaskCollapsesToConstantPrediction) {
  // With every scalar zero the logits are all zero; argmax picks the padding
  // id, which is never a target, so accuracy is exactly 0.
  const auto m = model::init_model(kTiny);
  const auto all = importance::select_top_k(ramp_map(m), 100.0);
  const auto dead = apply_mask(m, all);
  for (double p : dead.parameters) EXPECT_EQ(p, 0.0);
  for (const auto& s : tiny_splits()) EXPECT_EQ(model::eval_accuracy(dead, s.batches), 0.0) << s.tag;
}

TEST(Baselines, RandomMatchedCardinality) {
  const auto m = model::init_model(kTiny);
  const auto spot = importance::select_top_k(ramp_map(m), 2.0);
  std::set<std::vector<bool>> distinct;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto r = random_matched_mask(spot, seed);
    EXPECT_EQ(r.count(), spot.count());
    EXPECT_EQ(r.size(), spot.size());
    EXPECT_EQ(r.registry_digest, spot.registry_digest);
    EXPECT_EQ(r, random_matched_mask(spot, seed));
    distinct.insert(r.selected);
  }
  EXPECT_EQ(distinct.size(), 10U);
}

TEST(Baselines, BottomK) {
  importance::ImportanceMap map;
  map.scores = {5.0, 1.0, 9.0, 1.0, 3.0};
  const auto b = bottom_k_mask(map, 40.0);
  EXPECT_EQ(b.indices(), (std::vector<std::size_t>{1, 3}));
  EXPECT_ERROR_KIND(bottom_k_mask(map, 0.0), ErrorKind::kConfig);
}

TEST(Names, RoundTrip) {
  for (auto s : {MaskSource::kOriginal, MaskSource::kCodingSpot, MaskSource::kRandomMatched,
                 MaskSource::kBottomK}) {
    EXPECT_EQ(parse_mask_source(to_string(s)), s);
  }
  EXPECT_ERROR_KIND(parse_mask_source("half"), ErrorKind::kConfig);
}

TEST(Suite, RecordsAndSummaries) {
  const auto m = model::init_model(kTiny);
  const auto total = ramp_map(m);
  const auto splits = tiny_splits();
  AblationPlan plan;
  plan.spots = {importance::select_top_k(total, 1.0), importance::select_top_k(total, 10.0)};
  plan.n_random_seeds = 3;
  plan.random_seed = 50;
  const auto report = run_ablation_suite(m, total, splits, plan);

  // original + 2 k * (spot + 3 random + bottom-k), each on 4 splits
  EXPECT_EQ(report.records.size(), (1 + 2 * 5) * 4U);
  EXPECT_EQ(report.conditions.size(), 10U);
  ASSERT_EQ(report.summaries.size(), 2U);
  for (std::size_t i = 0; i < splits.size(); ++i) {
    EXPECT_EQ(report.records[i].source, MaskSource::kOriginal);
    EXPECT_EQ(report.records[i].accuracy, model::eval_accuracy(m, splits[i].batches));
  }
  const double code_mean = (model::eval_accuracy(m, splits[0].batches) +
                            model::eval_accuracy(m, splits[1].batches)) / 2.0;
  EXPECT_EQ(report.original.scores.code, code_mean);
  ASSERT_TRUE(report.original.scores.holdout.has_value());
  for (const auto& c : report.conditions) {
    EXPECT_EQ(c.scores.masked_count, importance::spot_size(m.parameters.size(), c.scores.k_percent));
    EXPECT_EQ(c.code_drop, report.original.scores.code - c.scores.code);
    if (c.scores.source == MaskSource::kRandomMatched) {
      ASSERT_TRUE(c.scores.seed.has_value());
      EXPECT_GE(*c.scores.seed, 50U);
      EXPECT_LT(*c.scores.seed, 53U);
    }
  }
  const auto j = report.to_json();
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  EXPECT_EQ(j["records"].size(), report.records.size());
  EXPECT_EQ(j["summaries"].size(), 2U);
  EXPECT_NE(report.to_table_csv().find("coding_spot"), std::string::npos);
  EXPECT_NE(report.to_curve_csv().find("random_matched"), std::string::npos);

  // Deterministic.
  EXPECT_EQ(run_ablation_suite(m, total, splits, plan).to_json().dump(), j.dump());
}

TEST(Suite, NeedsOneGeneralSplit) {
  const auto m = model::init_model(kTiny);
  const auto total = ramp_map(m);
  auto splits = tiny_splits();
  splits.pop_back();
  AblationPlan plan;
  plan.spots = {importance::select_top_k(total, 1.0)};
  plan.n_random_seeds = 1;
  EXPECT_ERROR_KIND(run_ablation_suite(m, total, splits, plan), ErrorKind::kConfig);
}

TEST(Derive, DropsAndMetric) {
  ConditionScores original{0.0, MaskSource::kOriginal, std::nullopt, 80.0, 60.0, 70.0, 0};
  ConditionScores masked{0.25, MaskSource::kCodingSpot, std::nullopt, 20.0, 58.0, 40.0, 281};
  const auto c = derive_condition(original, masked);
  EXPECT_DOUBLE_EQ(c.code_drop, 60.0);
  EXPECT_DOUBLE_EQ(c.general_drop, 2.0);
  EXPECT_DOUBLE_EQ(*c.holdout_drop, 30.0);
  EXPECT_DOUBLE_EQ(*c.derived.m_s, 20.0);
  EXPECT_DOUBLE_EQ(c.derived.code_change_percent, -75.0);

  masked.general = 62.0;  // general improved by 2 points: 1 + dG < 0
  EXPECT_FALSE(derive_condition(original, masked).derived.m_s.has_value());
}

}  // namespace
}  // namespace codespot::ablation
