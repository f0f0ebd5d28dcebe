#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "codespot/corpus/corpus.hpp"
#include "codespot/pipeline/pipeline_config.hpp"

namespace codespot::pipeline {

// Run directory layout.
class RunLayout {
 public:
  explicit RunLayout(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path checkpoints() const { return root_ / "checkpoints"; }
  std::filesystem::path maps() const { return root_ / "maps"; }
  std::filesystem::path masks() const { return root_ / "masks"; }
  std::filesystem::path reports() const { return root_ / "reports"; }
  std::filesystem::path oracle() const { return root_ / "oracle"; }

  std::filesystem::path base_checkpoint() const { return checkpoints() / "base.ckpt"; }
  std::filesystem::path language_map(const std::string& language) const;
  std::filesystem::path total_map() const { return maps() / "total.imap"; }
  std::filesystem::path spot_mask(double k_percent) const;

 private:
  std::filesystem::path root_;
};

struct Corpora {
  std::map<std::string, corpus::CorpusSplits> code;  // included languages plus the hold-out
  corpus::CorpusSplits general;
};

// All languages render the same AST stream (one seed), so the eval programs
// of every language are the same held-back ASTs.
Corpora build_corpora(const PipelineConfig& config, std::size_t code_docs, std::size_t general_docs);

// Union of every training split, code languages first in name order.
corpus::Corpus pretraining_corpus(const Corpora& corpora);

// Outcome of one stage: a machine-readable summary and whether every check
// of the stage held.
struct StageResult {
  nlohmann::json summary;
  bool ok = true;
};

// Trains the base model on the union of all corpora and writes the
// checkpoint, the loss log and reports/pretrain.json.
StageResult cmd_pretrain(const PipelineConfig& config);

// Fine-tunes a copy of the base per included language, scores and
// aggregates importance, and writes one mask per k.
StageResult cmd_spot(const PipelineConfig& config);

// Runs the ablation suite on the base model and writes reports/ablation.json,
// reports/ablation_table.csv and reports/ablation_curves.csv.
StageResult cmd_ablate(const PipelineConfig& config);

// Recomputes a published-table fixture and writes the derived table and the
// closure checks to out_dir. Not ok when any printed value fails to close.
StageResult cmd_ablate_fixture(const std::filesystem::path& fixture, const std::filesystem::path& out_dir);

// Gradient checks plus reduced-model leave-one-out calibration. Writes
// oracle/gradcheck.json, oracle/leave_one_out.csv and oracle/bounds.json.
StageResult cmd_oracle(const PipelineConfig& config);

// Collects the stage reports into reports/summary.json.
StageResult cmd_report(const PipelineConfig& config);

}  // namespace codespot::pipeline
