// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codespot/importance/importance.hpp"
#include "codespot/metrics/metrics.hpp"
#include "codespot/oracle/oracle.hpp"
#include "codespot/pipeline/pipeline.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace {

namespace fs = std::filesystem;
using namespace codespot;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

// 1: published table closure.
Outcome table_closure() {
  const auto t0 = Clock::now();
  const auto rows = metrics::load_table_fixture(CODESPOT_DATA_DIR "/table1_fixture.csv");
  const auto checks = metrics::check_table_closure(rows, 0.01);
  std::size_t failed = 0;
  std::size_t ms = 0;
  for (const auto& c : checks) {
    failed += !c.ok;
    ms += c.metric == "m_s";
  }
  const double dt = seconds_since(t0);
  return {failed == 0 && ms == 12 && checks.size() == 51 && dt < 1.0,
          std::to_string(checks.size()) + " values, " + std::to_string(ms) + " M_s, " +
              std::to_string(failed) + " off by more than 0.01, " + fmt_double(dt, 3) + " s"};
}

// 2: finite-difference checks of every op.
Outcome gradient_correctness(std::uint64_t seed, std::size_t per_op) {
  const auto t0 = Clock::now();
  const auto g = oracle::run_gradcheck(seed, per_op);
  const double dt = seconds_since(t0);
  return {g.all_ok() && g.cases.size() >= 100 && dt < 60.0,
          std::to_string(g.cases.size()) + " cases, " + std::to_string(g.failures()) +
              " above 1e-6, worst " + fmt_double(g.worst(), 3) + ", " + fmt_double(dt, 3) + " s"};
}

// 3: importance by hand and aggregation properties.
Outcome importance_faithfulness() {
  // pred = a*x1 + b*x2 + c, loss = (pred - t)^2 / 2, theta = (0.5, -1.5, 2).
  trainer::FinetuneOutput out;
  out.model.parameters = {0.5, -1.5, 2.0};
  out.accumulator = trainer::GradientAccumulator(3);
  const double x[2][2] = {{1.0, 2.0}, {-1.0, 0.5}};
  const double t[2] = {3.0, 0.5};
  for (int i = 0; i < 2; ++i) {
    const auto& p = out.model.parameters;
    const double r = p[0] * x[i][0] + p[1] * x[i][1] + p[2] - t[i];
    out.accumulator.add(std::vector<double>{r * x[i][0], r * x[i][1], r});
  }
  const auto map = importance::score_language(out, "lin");
  const double expected[3] = {0.9375, 5.34375, 3.75};
  double hand_err = 0.0;
  for (int j = 0; j < 3; ++j) hand_err = std::max(hand_err, std::abs(map.scores[j] - expected[j]));

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> ints(0, 1000);
  double perm_err = 0.0;
  bool integer_exact = true;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<importance::ImportanceMap> maps(4), int_maps(4);
    std::vector<double> int_sum(1000, 0.0);
    for (int l = 0; l < 4; ++l) {
      maps[l].language_tag = int_maps[l].language_tag = "l" + std::to_string(l);
      for (int j = 0; j < 1000; ++j) {
        maps[l].scores.push_back(u(rng) * std::pow(10.0, l - 2));
        int_maps[l].scores.push_back(ints(rng));
        int_sum[j] += int_maps[l].scores.back();
      }
    }
    for (bool normalize : {false, true}) {
      const auto ref = importance::aggregate(maps, normalize).scores;
      for (int k = 0; k < 5; ++k) {
        std::shuffle(maps.begin(), maps.end(), rng);
        const auto got = importance::aggregate(maps, normalize).scores;
        for (std::size_t j = 0; j < ref.size(); ++j) perm_err = std::max(perm_err, std::abs(got[j] - ref[j]));
      }
    }
    std::shuffle(int_maps.begin(), int_maps.end(), rng);
    integer_exact = integer_exact && importance::aggregate(int_maps, false).scores == int_sum;
  }
  return {hand_err <= 1e-12 && perm_err <= 1e-12 && integer_exact,
          "hand error " + fmt_double(hand_err, 3) + ", permutation error " + fmt_double(perm_err, 3) +
              ", integer sums " + (integer_exact ? "exact" : "inexact")};
}

// 4: selection against a full sort, and nesting.
Outcome topk_correctness() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> coarse(0, 40);
  const std::vector<double> ks{0.0025, 0.01, 0.09, 0.25, 1.0, 5.0, 25.0, 50.0, 99.0, 100.0};
  std::size_t compared = 0;
  std::size_t mismatches = 0;
  std::size_t nest_violations = 0;
  for (int variant = 0; variant < 3; ++variant) {
    importance::ImportanceMap m;
    m.language_tag = "total";
    m.scores.resize(10000);
    for (double& v : m.scores) v = variant == 0 ? u(rng) : static_cast<double>(coarse(rng));
    if (variant == 2) std::fill(m.scores.begin(), m.scores.begin() + 4000, 0.0);

    std::vector<std::size_t> order(m.scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m.scores[a] > m.scores[b]; });
    std::vector<importance::SpotMask> masks;
    for (double k : ks) {
      const auto mask = importance::select_top_k(m, k);
      std::vector<bool> ref(m.scores.size(), false);
      for (std::size_t i = 0; i < importance::spot_size(m.scores.size(), k); ++i) ref[order[i]] = true;
      mismatches += mask.selected != ref;
      ++compared;
      masks.push_back(mask);
    }
    for (std::size_t a = 0; a < masks.size(); ++a) {
      for (std::size_t b = a + 1; b < masks.size(); ++b) {
        for (std::size_t j = 0; j < m.scores.size(); ++j) {
          if (masks[a].selected[j] && !masks[b].selected[j]) {
            ++nest_violations;
            break;
          }
        }
      }
    }
  }
  return {mismatches == 0 && nest_violations == 0,
          std::to_string(compared) + " selections on 10000 scores, " + std::to_string(mismatches) +
              " differ from full sort, " + std::to_string(nest_violations) + " nesting violations"};
}

struct RunTimes {
  double pipeline = 0.0;
  double oracle = 0.0;
};

// Runs every stage in `work`, then moves the run directory to `keep` so the
// next run sees the identical config, run directory included.
RunTimes full_run(pipeline::PipelineConfig config, const fs::path& work, const fs::path& keep,
                  pipeline::StageResult& ablate, pipeline::StageResult& oracle_result) {
  fs::remove_all(work);
  fs::remove_all(keep);
  fs::create_directories(work);
  config.run_dir = work;
  write_text_file(work / "config.ini", config.to_ini());
  RunTimes t;
  const auto t0 = Clock::now();
  pipeline::cmd_pretrain(config);
  pipeline::cmd_spot(config);
  ablate = pipeline::cmd_ablate(config);
  const auto t1 = Clock::now();
  oracle_result = pipeline::cmd_oracle(config);
  t.oracle = seconds_since(t1);
  pipeline::cmd_report(config);
  t.pipeline = seconds_since(t0);
  fs::rename(work, keep);
  return t;
}

std::vector<fs::path> files_under(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  }
  std::sort(out.begin(), out.end());
  return out;
}

const nlohmann::json* summary_at(const nlohmann::json& ablate, double k) {
  for (const auto& s : ablate["per_k"]) {
    if (std::abs(s["k_percent"].get<double>() - k) < 1e-12) return &s;
  }
  return nullptr;
}

void print(int id, const std::string& name, const Outcome& o) {
  std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str());
  std::fflush(stdout);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"codespot acceptance criteria"};
  std::string work_dir = "acceptance_runs";
  std::string config_path = CODESPOT_CONFIG_DIR "/default.ini";
  app.add_option("--work-dir", work_dir, "scratch directory for the two pipeline runs");
  app.add_option("--config", config_path, "pipeline config");
  CLI11_PARSE(app, argc, argv);

  int failed = 0;
  auto guarded = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    print(id, name, o);
  };

  pipeline::PipelineConfig config;
  try {
    config = pipeline::load_config(config_path);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cannot load %s: %s\n", config_path.c_str(), e.what());
    return 2;
  }

  guarded(1, "published table closure", table_closure);
  guarded(2, "gradient correctness",
          [&] { return gradient_correctness(config.oracle.gradcheck_seed, config.oracle.gradcheck_cases_per_op); });
  guarded(3, "importance and aggregation", importance_faithfulness);
  guarded(4, "top-k selection", topk_correctness);

  const fs::path root(work_dir);
  pipeline::StageResult ablate_a, ablate_b, oracle_a, oracle_b;
  RunTimes ta, tb;
  std::string run_error;
  try {
    ta = full_run(config, root / "run", root / "run_a", ablate_a, oracle_a);
    tb = full_run(config, root / "run", root / "run_b", ablate_b, oracle_b);
  } catch (const std::exception& e) {
    run_error = e.what();
  }
  auto run_guard = [&](const std::function<Outcome()>& f) {
    return [&, f] { return run_error.empty() ? f() : Outcome{false, "pipeline error: " + run_error}; };
  };

  guarded(5, "leave-one-out rank agreement", run_guard([&] {
            const auto bounds = nlohmann::json::parse(read_text_file(root / "run_a/oracle/bounds.json"));
            const double rho = bounds["spearman"].get<double>();
            const double bound = bounds["spearman_threshold"].get<double>();
            return Outcome{rho > bound && ta.oracle < 600.0,
                           "spearman " + fmt_double(rho) + " vs bound " + fmt_double(bound) + " over " +
                               std::to_string(bounds["scalars"].get<std::size_t>()) + " scalars, " +
                               fmt_double(ta.oracle, 3) + " s"};
          }));

  const double k_spec = 0.25;
  guarded(6, "specialization at k=0.25%", run_guard([&] {
            const auto* s = summary_at(ablate_a.summary, k_spec);
            if (s == nullptr) return Outcome{false, "k=0.25 missing from the ablation"};
            const double code = (*s)["spot_code_drop"].get<double>();
            const double random = (*s)["random_mean_code_drop"].get<double>();
            const double general = (*s)["spot_general_drop"].get<double>();
            return Outcome{code > random && general < code,
                           "spot code drop " + fmt_double(code) + " vs random mean " + fmt_double(random) +
                               ", spot general drop " + fmt_double(general)};
          }));

  guarded(7, "hold-out generalization", run_guard([&] {
            const auto* s = summary_at(ablate_a.summary, k_spec);
            if (s == nullptr || (*s)["spot_holdout_drop"].is_null()) return Outcome{false, "no hold-out split"};
            const double spot = (*s)["spot_holdout_drop"].get<double>();
            const double random = (*s)["random_mean_holdout_drop"].get<double>();
            return Outcome{spot > random, "py_like drop " + fmt_double(spot) + " vs random mean " +
                                              fmt_double(random) + " at k=0.25"};
          }));

  guarded(8, "end-to-end reproducibility", run_guard([&] {
            const auto fa = files_under(root / "run_a");
            const auto fb = files_under(root / "run_b");
            std::size_t differing = fa == fb ? 0 : 1;
            std::string first;
            for (const auto& rel : fa) {
              if (!fs::exists(root / "run_b" / rel) ||
                  read_text_file(root / "run_a" / rel) != read_text_file(root / "run_b" / rel)) {
                if (first.empty()) first = rel.string();
                ++differing;
              }
            }
            return Outcome{differing == 0 && !fa.empty() && ta.pipeline < 600.0,
                           std::to_string(fa.size()) + " files compared, " + std::to_string(differing) +
                               " differ" + (first.empty() ? "" : " (first: " + first + ")") +
                               ", full pipeline " + fmt_double(ta.pipeline, 3) + " s"};
          }));

  std::printf("%d of 8 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
