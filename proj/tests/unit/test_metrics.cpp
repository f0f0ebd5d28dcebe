#include <gtest/gtest.h>

#include "codespot/metrics/metrics.hpp"
#include "test_support.hpp"

namespace codespot::metrics {
namespace {

BenchmarkResult result(std::vector<double> general, double code) {
  BenchmarkResult r;
  const char* names[] = {"gsm8k", "hellaswag", "mmlu", "truthfulqa", "winogrande"};
  for (std::size_t i = 0; i < general.size(); ++i) r.general_scores[names[i]] = general[i];
  r.code_score = code;
  return r;
}

std::vector<FixtureRow> fixture() { return load_table_fixture(CODESPOT_DATA_DIR "/table1_fixture.csv"); }

TEST(AvgGeneral, PublishedRows) {
  EXPECT_NEAR(round_half_up(avg_general(result({76.72, 59.10, 67.96, 54.08, 73.64}, 0))), 66.30, 1e-9);
  EXPECT_NEAR(round_half_up(avg_general(result({1.90, 36.01, 24.63, 39.32, 53.51}, 0))), 31.07, 1e-9);
  EXPECT_EQ(avg_general(result({42.5}, 0)), 42.5);
  EXPECT_ERROR_KIND(avg_general(result({}, 0)), ErrorKind::kContract);
}

TEST(RelativeChange, PublishedValues) {
  EXPECT_NEAR(round_half_up(relative_change(87.20, 22.56)), -74.13, 1e-9);
  EXPECT_NEAR(round_half_up(relative_change(66.30, 38.58)), -41.81, 1e-9);
  EXPECT_EQ(relative_change(55.5, 55.5), 0.0);
  EXPECT_ERROR_KIND(relative_change(0.0, 10.0), ErrorKind::kDomain);
}

TEST(Monosemanticity, PublishedValues) {
  EXPECT_NEAR(monosemanticity(87.20, 22.56, 41.95, 31.07), 64.64 / 11.88, 1e-12);
  EXPECT_NEAR(round_half_up(monosemanticity(87.20, 22.56, 41.95, 31.07)), 5.44, 1e-9);
  EXPECT_NEAR(round_half_up(monosemanticity(97.56, 20.12, 66.30, 38.58)), 2.70, 1e-9);
  EXPECT_EQ(monosemanticity(50.0, 50.0, 60.0, 20.0), 0.0);
  EXPECT_ERROR_KIND(monosemanticity(101.0, 0.0, 50.0, 40.0), ErrorKind::kDomain);
  EXPECT_ERROR_KIND(monosemanticity(50.0, 0.0, 50.0, 52.0), ErrorKind::kDomain);  // 1 + dG < 0
}

TEST(Monosemanticity, Monotone) {
  double prev = -1.0;
  for (double code = 80.0; code >= 0.0; code -= 10.0) {
    const double m = monosemanticity(80.0, code, 50.0, 45.0);
    EXPECT_GT(m, prev);
    prev = m;
  }
  prev = 1e300;
  for (double g = 50.5; g >= 0.0; g -= 5.0) {
    const double m = monosemanticity(80.0, 10.0, 50.0, g);
    EXPECT_LT(m, prev);
    prev = m;
  }
}

TEST(Rounding, HalfUp) {
  EXPECT_EQ(round_half_up(2.675), 2.68);  // binary value sits just below the half
  EXPECT_EQ(round_half_up(-0.125), -0.12);
  EXPECT_EQ(round_half_up(1.0049), 1.0);
  EXPECT_EQ(round_half_up(3.14159, 3), 3.142);
}

TEST(BenchmarkResult, RangeValidation) {
  EXPECT_ERROR_KIND(result({50.0, 120.0}, 10.0).validate(), ErrorKind::kDomain);
  EXPECT_ERROR_KIND(result({50.0}, -1.0).validate(), ErrorKind::kDomain);
  EXPECT_NO_THROW(result({0.0, 100.0}, 100.0).validate());
}

TEST(Derive, OriginalHasNoMetric) {
  const auto o = result({76.72, 59.10, 67.96, 54.08, 73.64}, 97.56);
  const auto d = derive_original(o);
  EXPECT_FALSE(d.m_s.has_value());
  EXPECT_EQ(d.gtc_percent, 0.0);
  const auto m = derive(o, result({2.35, 44.47, 42.32, 43.61, 60.14}, 20.12));
  EXPECT_NEAR(round_half_up(m.gtc_percent), -41.81, 1e-9);
  EXPECT_NEAR(round_half_up(m.code_change_percent), -79.38, 1e-9);
  EXPECT_NEAR(round_half_up(*m.m_s), 2.70, 1e-9);
}

TEST(Fixture, ShapeOfPublishedTable) {
  const auto rows = fixture();
  ASSERT_EQ(rows.size(), 15U);
  std::size_t deactivated = 0;
  for (const auto& r : rows) {
    EXPECT_EQ(r.result.general_scores.size(), 5U);
    if (r.condition != "original") {
      ++deactivated;
      EXPECT_TRUE(r.printed_m_s.has_value());
    }
  }
  EXPECT_EQ(deactivated, 12U);
}

TEST(Fixture, AllPrintedValuesClose) {
  const auto checks = check_table_closure(fixture());
  // 15 avg_general + 12 * (gtc, code change, m_s)
  ASSERT_EQ(checks.size(), 15U + 36U);
  for (const auto& c : checks) {
    EXPECT_TRUE(c.ok) << c.model << " " << c.condition << " " << c.metric << ": printed " << c.printed
                      << " recomputed " << c.recomputed;
  }
}

TEST(Fixture, AllTwelveMonosemanticityScores) {
  const std::vector<double> printed{5.44, 5.52, 6.75, 6.82, 2.70, 2.65, 2.61, 2.60, 3.41, 3.34, 3.19, 3.15};
  std::vector<double> recomputed;
  for (const auto& c : check_table_closure(fixture())) {
    if (c.metric == "m_s") recomputed.push_back(c.recomputed);
  }
  ASSERT_EQ(recomputed.size(), printed.size());
  for (std::size_t i = 0; i < printed.size(); ++i) EXPECT_NEAR(round_half_up(recomputed[i]), printed[i], 0.01 + 1e-9);
}

TEST(Fixture, RoundedInputsAlsoClose) {
  // M_s from the printed two-decimal averages instead of the raw means.
  const auto rows = fixture();
  const FixtureRow* original = nullptr;
  for (const auto& r : rows) {
    if (r.condition == "original") {
      original = &r;
      continue;
    }
    const double m = monosemanticity(original->result.code_score, r.result.code_score,
                                     original->printed_avg_general, r.printed_avg_general);
    EXPECT_NEAR(round_half_up(m), *r.printed_m_s, 0.01 + 1e-9) << r.model << " " << r.condition;
  }
}

TEST(Fixture, ParseErrors) {
  EXPECT_ERROR_KIND(parse_table_fixture("model,condition\n"), ErrorKind::kData);
  EXPECT_ERROR_KIND(load_table_fixture("/nonexistent/fixture.csv"), ErrorKind::kIo);
}

TEST(Fixture, DerivedTableCsv) {
  const auto csv = render_derived_table_csv(fixture());
  EXPECT_EQ(csv.rfind("model,condition,avg_general,gtc_percent,code_score,code_change_percent,m_s\n", 0), 0U);
  EXPECT_NE(csv.find("codellama-7b-instruct,0.0025,31.07,-25.93,22.56,-74.13,5.44\n"), std::string::npos);
  EXPECT_NE(csv.find("llama-3.1-8b-instruct,original,66.30,,97.56,,\n"), std::string::npos);
}

}  // namespace
}  // namespace codespot::metrics
