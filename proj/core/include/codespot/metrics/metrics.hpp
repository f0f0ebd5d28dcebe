#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace codespot::metrics {

// Scores of one condition (original or deactivated), in percent.
struct BenchmarkResult {
  std::string condition_tag;
  std::map<std::string, double> general_scores;
  double code_score = 0.0;

  // Domain error unless every score lies in [0, 100].
  void validate() const;
};

struct DerivedMetrics {
  double avg_general = 0.0;
  double gtc_percent = 0.0;          // relative change of avg_general vs original
  double code_change_percent = 0.0;  // relative change of code_score vs original
  std::optional<double> m_s;         // absent for the original condition
};

// Arithmetic mean of the general scores. Contract error when there are none.
double avg_general(const BenchmarkResult& result);

// 100 * (deactivated - original) / original. Domain error when original <= 0.
double relative_change(double original, double deactivated);

// M_s = dC / (1 + dG), with dC and dG the absolute percentage-point drops
// (original - deactivated) of the code score and of the general average.
// Domain error when an input is outside [0, 100] or 1 + dG <= 0.
double monosemanticity(double original_code, double deactivated_code,
                       double original_general_avg, double deactivated_general_avg);

DerivedMetrics derive_original(const BenchmarkResult& original);
DerivedMetrics derive(const BenchmarkResult& original, const BenchmarkResult& deactivated);

// Round half up (toward +inf) at the given number of decimals.
double round_half_up(double value, int decimals = 2);

// ---- published-table fixture ----

struct FixtureRow {
  std::string model;
  std::string condition;  // "original" or the deactivated percentage, e.g. "0.0025"
  BenchmarkResult result;
  double printed_avg_general = 0.0;
  std::optional<double> printed_gtc_percent;
  std::optional<double> printed_code_change_percent;
  std::optional<double> printed_m_s;
};

// CSV with header
//   model,condition,<general benchmark columns...>,code,avg_general,gtc_percent,code_change_percent,m_s
// '#' starts a comment line. Empty printed cells are allowed on original rows.
std::vector<FixtureRow> parse_table_fixture(std::string_view csv_text);
std::vector<FixtureRow> load_table_fixture(const std::filesystem::path& path);

struct ClosureCheck {
  std::string model;
  std::string condition;
  std::string metric;  // "avg_general", "gtc_percent", "code_change_percent" or "m_s"
  double printed = 0.0;
  double recomputed = 0.0;
  bool ok = false;
};

// Recomputes every printed derived value from the raw scores (relative to the
// model's "original" row) and compares after rounding to 2 decimals.
std::vector<ClosureCheck> check_table_closure(const std::vector<FixtureRow>& rows,
                                              double tolerance = 0.01);

// model,condition,avg_general,gtc_percent,code_score,code_change_percent,m_s
// with derived values rounded to 2 decimals and m_s empty for originals.
std::string render_derived_table_csv(const std::vector<FixtureRow>& rows);

}  // namespace codespot::metrics
