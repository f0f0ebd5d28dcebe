#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "codespot/corpus/corpus.hpp"
#include "codespot/model/model.hpp"

namespace codespot::trainer {

struct TrainConfig {
  std::size_t steps = 0;
  std::size_t batch_size = 8;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;

  // Config error unless batch_size > 0 and 0 < learning_rate < 1.
  void validate() const;
};

// Running per-scalar sum of |dL/dtheta_j| over the batches seen so far, plus
// the most recent batch's |gradient|.
class GradientAccumulator {
 public:
  GradientAccumulator() = default;
  explicit GradientAccumulator(std::size_t scalars);

  void add(std::span<const double> gradient);

  std::size_t count() const { return count_; }
  std::size_t size() const { return sum_abs_.size(); }
  bool empty() const { return count_ == 0; }
  const std::vector<double>& sum_abs() const { return sum_abs_; }
  const std::vector<double>& last_abs() const { return last_abs_; }
  std::vector<double> mean_abs() const;

 private:
  std::vector<double> sum_abs_;
  std::vector<double> last_abs_;
  std::size_t count_ = 0;
};

struct TrainLog {
  std::vector<double> losses;  // one entry per step

  std::string to_csv() const;
  void save_csv(const std::filesystem::path& path) const;
};

struct FinetuneOutput {
  model::ModelState model;
  GradientAccumulator accumulator;
  TrainLog log;
};

// Plain SGD on a copy of `base`. Each step's |gradient| is accumulated at the
// parameters current at that step, before the update. Training error naming
// the step if the loss or gradient becomes non-finite.
FinetuneOutput finetune(const model::ModelState& base, const corpus::Corpus& corpus,
                        const TrainConfig& cfg);

enum class Optimizer { kSgd, kAdam };

struct PretrainConfig {
  TrainConfig train;
  Optimizer optimizer = Optimizer::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-8;
  // Learning rate decays linearly to this fraction of its initial value.
  double final_lr_fraction = 0.1;
};

struct PretrainOutput {
  model::ModelState model;
  TrainLog log;
};

PretrainOutput pretrain(const model::ModelState& init, const corpus::Corpus& corpus,
                        const PretrainConfig& cfg);

}  // namespace codespot::trainer
