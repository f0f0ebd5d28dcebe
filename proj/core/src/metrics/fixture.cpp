#include <cmath>
#include <fmt/format.h>
#include <map>
#include <sstream>

#include "codespot/metrics/metrics.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::metrics {

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  for (auto& s : cells) {
    const auto b = s.find_first_not_of(' ');
    const auto e = s.find_last_not_of(' ');
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }
  return cells;
}

double parse_number(const std::string& text, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::kData, fmt::format("fixture line {}: '{}' is not a number", line_no, text));
  }
}

std::optional<double> parse_optional(const std::string& text, std::size_t line_no) {
  if (text.empty()) return std::nullopt;
  return parse_number(text, line_no);
}

constexpr std::size_t kTrailingColumns = 5;  // code, avg_general, gtc, code_change, m_s

}  // namespace

std::vector<FixtureRow> parse_table_fixture(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  std::string line;
  std::vector<std::string> header;
  std::vector<FixtureRow> rows;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    auto cells = split_csv_line(line);
    if (header.empty()) {
      header = std::move(cells);
      if (header.size() < 2 + 1 + kTrailingColumns || header[0] != "model" || header[1] != "condition") {
        fail(ErrorKind::kData, "fixture header must start with model,condition and hold at least one general column");
      }
      continue;
    }
    if (cells.size() != header.size()) {
      fail(ErrorKind::kData, fmt::format("fixture line {}: expected {} cells, got {}", line_no,
                                         header.size(), cells.size()));
    }
    FixtureRow row;
    row.model = cells[0];
    row.condition = cells[1];
    row.result.condition_tag = cells[1];
    const std::size_t general_end = header.size() - kTrailingColumns;
    for (std::size_t c = 2; c < general_end; ++c) {
      row.result.general_scores[header[c]] = parse_number(cells[c], line_no);
    }
    row.result.code_score = parse_number(cells[general_end], line_no);
    row.printed_avg_general = parse_number(cells[general_end + 1], line_no);
    row.printed_gtc_percent = parse_optional(cells[general_end + 2], line_no);
    row.printed_code_change_percent = parse_optional(cells[general_end + 3], line_no);
    row.printed_m_s = parse_optional(cells[general_end + 4], line_no);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(ErrorKind::kData, "fixture holds no rows");
  return rows;
}

std::vector<FixtureRow> load_table_fixture(const std::filesystem::path& path) {
  return parse_table_fixture(read_text_file(path));
}

namespace {

const FixtureRow& original_row(const std::vector<FixtureRow>& rows, const std::string& model) {
  for (const auto& r : rows) {
    if (r.model == model && r.condition == "original") return r;
  }
  fail(ErrorKind::kData, "fixture has no original row for model '" + model + "'");
}

}  // namespace

std::vector<ClosureCheck> check_table_closure(const std::vector<FixtureRow>& rows, double tolerance) {
  std::vector<ClosureCheck> checks;
  auto add = [&](const FixtureRow& r, std::string metric, double printed, double recomputed) {
    const double rounded = round_half_up(recomputed, 2);
    checks.push_back({r.model, r.condition, std::move(metric), printed, recomputed,
                      std::abs(rounded - printed) <= tolerance + 1e-9});
  };
  for (const auto& r : rows) {
    if (r.condition == "original") {
      add(r, "avg_general", r.printed_avg_general, derive_original(r.result).avg_general);
      continue;
    }
    const DerivedMetrics m = derive(original_row(rows, r.model).result, r.result);
    add(r, "avg_general", r.printed_avg_general, m.avg_general);
    if (r.printed_gtc_percent) add(r, "gtc_percent", *r.printed_gtc_percent, m.gtc_percent);
    if (r.printed_code_change_percent) {
      add(r, "code_change_percent", *r.printed_code_change_percent, m.code_change_percent);
    }
    if (r.printed_m_s) add(r, "m_s", *r.printed_m_s, *m.m_s);
  }
  return checks;
}

std::string render_derived_table_csv(const std::vector<FixtureRow>& rows) {
  std::string out = "model,condition,avg_general,gtc_percent,code_score,code_change_percent,m_s\n";
  for (const auto& r : rows) {
    if (r.condition == "original") {
      const auto m = derive_original(r.result);
      out += fmt::format("{},{},{:.2f},,{:.2f},,\n", r.model, r.condition,
                         round_half_up(m.avg_general), r.result.code_score);
      continue;
    }
    const auto m = derive(original_row(rows, r.model).result, r.result);
    out += fmt::format("{},{},{:.2f},{:.2f},{:.2f},{:.2f},{:.2f}\n", r.model, r.condition,
                       round_half_up(m.avg_general), round_half_up(m.gtc_percent),
                       r.result.code_score, round_half_up(m.code_change_percent),
                       round_half_up(*m.m_s));
  }
  return out;
}

}  // namespace codespot::metrics
