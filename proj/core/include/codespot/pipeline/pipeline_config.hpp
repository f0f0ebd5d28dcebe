#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "codespot/importance/importance.hpp"
#include "codespot/model/model.hpp"
#include "codespot/trainer/trainer.hpp"

namespace codespot::pipeline {

inline constexpr const char* kRunDirEnv = "CSPOT_RUN_DIR";

struct CorpusSettings {
  std::uint64_t seed = 7;
  std::size_t code_docs = 400;  // per language, before the train/eval split
  std::size_t general_docs = 400;
  double split_ratio = 0.9;
};

struct AblationSettings {
  std::vector<double> k_list{0.0025, 0.01, 0.09, 0.25};
  std::size_t random_seeds = 10;
  std::uint64_t random_seed = 1000;
  bool bottom_k = true;
  std::size_t max_eval_docs = 40;  // per eval split, 0 keeps all
};

struct OracleSettings {
  model::ModelConfig model{64, 32, 16, 2, 1, 11};
  std::size_t code_docs = 160;
  std::size_t general_docs = 160;
  std::size_t pretrain_steps = 300;
  std::size_t finetune_steps = 20;
  std::size_t eval_docs = 12;
  std::uint64_t gradcheck_seed = 5;
  std::size_t gradcheck_cases_per_op = 10;
  double spearman_bound = 0.7;
};

struct PipelineConfig {
  model::ModelConfig model;
  CorpusSettings corpus;
  std::vector<std::string> include{"c_like", "lisp_like", "rpn_like"};
  std::string holdout = "py_like";
  trainer::PretrainConfig pretrain;
  trainer::TrainConfig finetune;
  importance::GradientMode gradient_mode = importance::GradientMode::kMeanOverSteps;
  bool normalize = false;
  AblationSettings ablation;
  OracleSettings oracle;
  std::filesystem::path run_dir = "run";

  // Config error on any inconsistency: hold-out among the included
  // languages, k outside (0, 100], unknown grammar, bad model shape.
  void validate() const;

  // Applies "section.key=value". Config error on unknown keys or bad values.
  void set(std::string_view dotted_key, std::string_view value);

  // Sectioned key-value text with every key, in a fixed order.
  std::string to_ini() const;
};

PipelineConfig default_config();

// Parses INI text; keys left out keep their defaults.
PipelineConfig parse_config(std::string_view ini_text);

// Reads the file, applies overrides in order, then the run-directory
// environment variable, then validates.
PipelineConfig load_config(const std::filesystem::path& path,
                           const std::vector<std::string>& overrides = {});

}  // namespace codespot::pipeline
