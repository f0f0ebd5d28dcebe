// codespot: command-line driver for the importance / ablation pipeline.
#include <CLI11.hpp>

#include <cstdio>
#include <string>
#include <vector>

#include "codespot/pipeline/pipeline.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace {

using codespot::pipeline::PipelineConfig;
using codespot::pipeline::StageResult;

int report(const char* stage, const StageResult& r) {
  std::fputs((r.summary.dump(2) + "\n").c_str(), stdout);
  if (!r.ok) std::fprintf(stderr, "%s: checks failed\n", stage);
  return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coding Spot importance and ablation pipeline"};
  app.require_subcommand(1);

  std::string config_path = "configs/default.ini";
  std::vector<std::string> overrides;
  std::string run_dir;
  app.add_option("-c,--config", config_path, "INI config file")->capture_default_str();
  app.add_option("-s,--set", overrides, "override, section.key=value (repeatable)");
  app.add_option("-r,--run-dir", run_dir, "run directory (overrides config and CSPOT_RUN_DIR)");

  auto* pretrain = app.add_subcommand("pretrain", "train the base model");
  auto* spot = app.add_subcommand("spot", "fine-tune per language, score, aggregate, select masks");
  auto* ablate = app.add_subcommand("ablate", "run the ablation suite and write reports");
  std::string fixture;
  std::string fixture_out = ".";
  ablate->add_option("--fixture", fixture, "recompute a published-table fixture CSV instead");
  ablate->add_option("--fixture-out", fixture_out, "output directory for fixture mode");
  auto* oracle = app.add_subcommand("oracle", "gradient checks and leave-one-out calibration");
  auto* summary = app.add_subcommand("report", "collect stage reports into a summary");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (ablate->parsed() && !fixture.empty()) {
      return report("ablate", codespot::pipeline::cmd_ablate_fixture(fixture, fixture_out));
    }
    PipelineConfig config = codespot::pipeline::load_config(config_path, overrides);
    if (!run_dir.empty()) config.run_dir = run_dir;
    codespot::write_text_file(config.run_dir / "config.ini", config.to_ini());

    if (pretrain->parsed()) return report("pretrain", codespot::pipeline::cmd_pretrain(config));
    if (spot->parsed()) return report("spot", codespot::pipeline::cmd_spot(config));
    if (ablate->parsed()) return report("ablate", codespot::pipeline::cmd_ablate(config));
    if (oracle->parsed()) return report("oracle", codespot::pipeline::cmd_oracle(config));
    if (summary->parsed()) return report("report", codespot::pipeline::cmd_report(config));
  } catch (const codespot::Error& e) {
    std::fprintf(stderr, "error [%s]: %s\n", std::string(codespot::to_string(e.kind())).c_str(), e.what());
    return e.kind() == codespot::ErrorKind::kConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
