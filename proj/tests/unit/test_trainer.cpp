#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>

#include "codespot/corpus/batching.hpp"
#include "codespot/corpus/corpus.hpp"
#include "codespot/model/model.hpp"
#include "codespot/trainer/trainer.hpp"
#include "test_support.hpp"

namespace codespot::trainer {
namespace {

const model::ModelConfig kSmall{64, 32, 16, 2, 1, 4};

const corpus::Corpus& c_like_train() {
  static const corpus::Corpus c =
      corpus::generate_corpus({"c_like", corpus::GrammarId::kCLike, 7}, 120, 0.9).train;
  return c;
}

double mean(const std::vector<double>& v, std::size_t from, std::size_t to) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(from),
                         v.begin() + static_cast<std::ptrdiff_t>(to), 0.0) /
         static_cast<double>(to - from);
}

TEST(TrainConfig, Validation) {
  EXPECT_ERROR_KIND((TrainConfig{1, 0, 0.1, 0}.validate()), ErrorKind::kConfig);
  EXPECT_ERROR_KIND((TrainConfig{1, 4, 0.0, 0}.validate()), ErrorKind::kConfig);
  EXPECT_ERROR_KIND((TrainConfig{1, 4, 1.0, 0}.validate()), ErrorKind::kConfig);
  EXPECT_NO_THROW((TrainConfig{1, 4, 0.5, 0}.validate()));
}

TEST(Accumulator, SumsAbsoluteValues) {
  GradientAccumulator acc(3);
  EXPECT_TRUE(acc.empty());
  EXPECT_ERROR_KIND(acc.mean_abs(), ErrorKind::kContract);
  acc.add(std::vector<double>{1.0, -2.0, 0.0});
  acc.add(std::vector<double>{-3.0, 0.5, 0.0});
  EXPECT_EQ(acc.count(), 2U);
  EXPECT_EQ(acc.sum_abs(), (std::vector<double>{4.0, 2.5, 0.0}));
  EXPECT_EQ(acc.last_abs(), (std::vector<double>{3.0, 0.5, 0.0}));
  EXPECT_EQ(acc.mean_abs(), (std::vector<double>{2.0, 1.25, 0.0}));
  EXPECT_ERROR_KIND(acc.add(std::vector<double>{1.0}), ErrorKind::kContract);
}

TEST(Finetune, ZeroStepsIsIdentity) {
  const auto base = model::init_model(kSmall);
  const auto out = finetune(base, c_like_train(), TrainConfig{0, 4, 0.05, 1});
  EXPECT_EQ(out.model.parameters, base.parameters);
  EXPECT_TRUE(out.accumulator.empty());
  EXPECT_TRUE(out.log.losses.empty());
}

TEST(Finetune, DeterministicAndBaseUntouched) {
  const auto base = model::init_model(kSmall);
  const auto hash = base.content_hash();
  const TrainConfig cfg{5, 4, 0.05, 3};
  const auto a = finetune(base, c_like_train(), cfg);
  const auto b = finetune(base, c_like_train(), cfg);
  EXPECT_EQ(base.content_hash(), hash);
  EXPECT_EQ(a.model.parameters, b.model.parameters);
  EXPECT_EQ(a.accumulator.sum_abs(), b.accumulator.sum_abs());
  EXPECT_EQ(a.log.losses, b.log.losses);
  EXPECT_EQ(a.log.losses.size(), 5U);
  EXPECT_EQ(a.accumulator.count(), 5U);
  EXPECT_NE(a.model.parameters, base.parameters);
  for (double s : a.accumulator.sum_abs()) EXPECT_GE(s, 0.0);
}

TEST(Finetune, TwoStepReplayMatchesAccumulator) {
  const auto base = model::init_model(kSmall);
  const TrainConfig cfg{2, 4, 0.05, 9};
  const auto out = finetune(base, c_like_train(), cfg);

  corpus::BatchStream stream(c_like_train(), cfg.batch_size, kSmall.context_len, cfg.seed);
  model::ModelState m = base;
  std::vector<double> expected(m.parameters.size(), 0.0);
  for (int step = 0; step < 2; ++step) {
    const auto lg = model::loss_and_gradient(m, stream.next());
    EXPECT_EQ(lg.loss, out.log.losses[static_cast<std::size_t>(step)]);
    for (std::size_t j = 0; j < expected.size(); ++j) {
      expected[j] += std::abs(lg.gradient[j]);
      m.parameters[j] -= cfg.learning_rate * lg.gradient[j];
    }
  }
  EXPECT_EQ(out.accumulator.sum_abs(), expected);
  EXPECT_EQ(out.model.parameters, m.parameters);
}

TEST(Finetune, LossDecreases) {
  // Pretrained small base, then SGD on one language.
  PretrainConfig pc;
  pc.train = {80, 8, 3e-3, 21};
  const auto base = pretrain(model::init_model(kSmall), c_like_train(), pc).model;
  const auto out = finetune(base, c_like_train(), TrainConfig{40, 8, 0.05, 31});
  EXPECT_LT(mean(out.log.losses, 36, 40), mean(out.log.losses, 0, 4));
}

TEST(Finetune, DivergenceNamesStep) {
  auto base = model::init_model(kSmall);
  base.parameters[0] = std::numeric_limits<double>::infinity();
  try {
    finetune(base, c_like_train(), TrainConfig{3, 4, 0.05, 1});
    FAIL() << "expected a training error";
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::kTraining || e.kind() == ErrorKind::kNumeric) << e.what();
  }
}

TEST(Finetune, VocabularyMismatchIsDataError) {
  corpus::Corpus c;
  c.documents = {{1, 2, 3, 70, 4, 5}};
  EXPECT_ERROR_KIND(finetune(model::init_model(kSmall), c, TrainConfig{1, 1, 0.05, 1}), ErrorKind::kData);
}

TEST(Pretrain, ReducesLossAndIsDeterministic) {
  PretrainConfig pc;
  pc.train = {60, 8, 3e-3, 5};
  const auto init = model::init_model(kSmall);
  const auto a = pretrain(init, c_like_train(), pc);
  const auto b = pretrain(init, c_like_train(), pc);
  EXPECT_EQ(a.model.parameters, b.model.parameters);
  ASSERT_EQ(a.log.losses.size(), 60U);
  EXPECT_LT(mean(a.log.losses, 54, 60), mean(a.log.losses, 0, 6) - 0.5);
}

TEST(TrainLog, Csv) {
  TrainLog log{{1.5, 0.25}};
  EXPECT_EQ(log.to_csv(), "step,loss\n0,1.5\n1,0.25\n");
}

}  // namespace
}  // namespace codespot::trainer
