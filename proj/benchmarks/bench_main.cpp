#include <benchmark/benchmark.h>

#include <random>

#include "codespot/autodiff/ops.hpp"
#include "codespot/corpus/batching.hpp"
#include "codespot/corpus/corpus.hpp"
#include "codespot/importance/importance.hpp"
#include "codespot/model/model.hpp"

namespace {

using namespace codespot;

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

void BM_MatmulForwardBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a_data = random_values(n * n, 1);
  const auto b_data = random_values(n * n, 2);
  for (auto _ : state) {
    ad::Tape tape;
    auto a = ad::Tensor::from_data({n, n}, a_data, true);
    auto b = ad::Tensor::from_data({n, n}, b_data, true);
    auto c = ad::ops::sum(tape, ad::ops::matmul(tape, a, b));
    tape.backward(c);
    benchmark::DoNotOptimize(a.grad().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulForwardBackward)->Arg(32)->Arg(64)->Arg(128);

const corpus::TokenBatch& sample_batch() {
  static const corpus::TokenBatch b = [] {
    const auto c = corpus::generate_corpus({"c_like", corpus::GrammarId::kCLike, 7}, 64, 0.9).train;
    return corpus::BatchStream(c, 8, 64, 1).next();
  }();
  return b;
}

void BM_ModelForward(benchmark::State& state) {
  const auto m = model::init_model(model::ModelConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(model::evaluate_loss(m, sample_batch()));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelForwardBackward(benchmark::State& state) {
  const auto m = model::init_model(model::ModelConfig{});
  for (auto _ : state) benchmark::DoNotOptimize(model::loss_and_gradient(m, sample_batch()).loss);
}
BENCHMARK(BM_ModelForwardBackward)->Unit(benchmark::kMillisecond);

void BM_SelectTopK(benchmark::State& state) {
  importance::ImportanceMap map;
  map.scores = random_values(static_cast<std::size_t>(state.range(0)), 3);
  for (double& s : map.scores) s = std::abs(s);
  for (auto _ : state) benchmark::DoNotOptimize(importance::select_top_k(map, 0.25).count());
}
BENCHMARK(BM_SelectTopK)->Arg(112448)->Arg(1 << 20);

}  // namespace
BENCHMARK_MAIN();
