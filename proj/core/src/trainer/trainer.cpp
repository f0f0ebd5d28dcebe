#include "codespot/trainer/trainer.hpp"

#include <cmath>
#include <fmt/format.h>

#include "codespot/corpus/batching.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::trainer {

void TrainConfig::validate() const {
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  if (!(learning_rate > 0.0 && learning_rate < 1.0)) {
    fail(ErrorKind::kConfig, "learning_rate must lie in (0, 1)");
  }
}

GradientAccumulator::GradientAccumulator(std::size_t scalars)
    : sum_abs_(scalars, 0.0), last_abs_(scalars, 0.0) {}

void GradientAccumulator::add(std::span<const double> gradient) {
  if (gradient.size() != sum_abs_.size()) {
    fail(ErrorKind::kContract, "gradient length does not match the accumulator");
  }
  for (std::size_t j = 0; j < gradient.size(); ++j) {
    last_abs_[j] = std::abs(gradient[j]);
    sum_abs_[j] += last_abs_[j];
  }
  ++count_;
}

std::vector<double> GradientAccumulator::mean_abs() const {
  if (count_ == 0) fail(ErrorKind::kContract, "mean of an empty gradient accumulator");
  std::vector<double> out(sum_abs_.size());
  const double inv = 1.0 / static_cast<double>(count_);
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = sum_abs_[j] * inv;
  return out;
}

std::string TrainLog::to_csv() const {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) out += fmt::format("{},{:.17g}\n", i, losses[i]);
  return out;
}

void TrainLog::save_csv(const std::filesystem::path& path) const { write_text_file(path, to_csv()); }

namespace {

void check_vocab(const model::ModelState& m, const corpus::Corpus& c) {
  for (const auto& doc : c.documents) {
    for (int id : doc) {
      if (id < 0 || static_cast<std::size_t>(id) >= m.config.vocab_size) {
        fail(ErrorKind::kData, "corpus '" + c.language_tag + "' holds token id " +
                                   std::to_string(id) + " outside the model vocabulary");
      }
    }
  }
}

model::LossAndGradient checked_step(const model::ModelState& m, const corpus::TokenBatch& batch,
                                    std::size_t step) {
  model::LossAndGradient lg;
  try {
    lg = model::loss_and_gradient(m, batch);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kNumeric) throw;
    fail(ErrorKind::kTraining, fmt::format("training diverged at step {}: {}", step, e.what()));
  }
  for (double g : lg.gradient) {
    if (!std::isfinite(g)) {
      fail(ErrorKind::kTraining, fmt::format("non-finite gradient at step {}", step));
    }
  }
  return lg;
}

}  // namespace

FinetuneOutput finetune(const model::ModelState& base, const corpus::Corpus& corpus,
                        const TrainConfig& cfg) {
  cfg.validate();
  check_vocab(base, corpus);
  FinetuneOutput out{base, GradientAccumulator(base.parameters.size()), {}};
  if (cfg.steps == 0) return out;
  corpus::BatchStream stream(corpus, cfg.batch_size, base.config.context_len, cfg.seed);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const corpus::TokenBatch batch = stream.next();
    const auto lg = checked_step(out.model, batch, step);
    out.accumulator.add(lg.gradient);
    out.log.losses.push_back(lg.loss);
    auto& p = out.model.parameters;
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.learning_rate * lg.gradient[j];
  }
  return out;
}

PretrainOutput pretrain(const model::ModelState& init, const corpus::Corpus& corpus,
                        const PretrainConfig& cfg) {
  cfg.train.validate();
  check_vocab(init, corpus);
  PretrainOutput out{init, {}};
  if (cfg.train.steps == 0) return out;
  corpus::BatchStream stream(corpus, cfg.train.batch_size, init.config.context_len, cfg.train.seed);
  auto& p = out.model.parameters;
  std::vector<double> m1(p.size(), 0.0), m2(p.size(), 0.0);
  const double steps = static_cast<double>(cfg.train.steps);
  for (std::size_t step = 0; step < cfg.train.steps; ++step) {
    const corpus::TokenBatch batch = stream.next();
    const auto lg = checked_step(out.model, batch, step);
    out.log.losses.push_back(lg.loss);
    const double frac = static_cast<double>(step) / steps;
    const double lr = cfg.train.learning_rate * (1.0 - (1.0 - cfg.final_lr_fraction) * frac);
    if (cfg.optimizer == Optimizer::kSgd) {
      for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * lg.gradient[j];
      continue;
    }
    const double t = static_cast<double>(step + 1);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = lg.gradient[j];
      m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * g;
      m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * g * g;
      p[j] -= lr * (m1[j] / c1) / (std::sqrt(m2[j] / c2) + cfg.epsilon);
    }
  }
  return out;
}

}  // namespace codespot::trainer
