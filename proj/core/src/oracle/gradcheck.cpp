#include <cmath>
#include <fmt/format.h>
#include <functional>
#include <optional>
#include <random>

#include "codespot/autodiff/finite_difference.hpp"
#include "codespot/oracle/oracle.hpp"
#include "codespot/util/error.hpp"

namespace codespot::oracle {

namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::ops::OpKind;
namespace ops = ad::ops;

// Builds the op output from its differentiable inputs.
using OpBuilder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

struct CaseSpec {
  std::string description;
  std::vector<Tensor> inputs;
  OpBuilder build;
};

class CaseFactory {
 public:
  explicit CaseFactory(std::uint64_t seed) : rng_(seed) {}

  std::size_t dim(std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng_);
  }

  Tensor uniform(const Shape& shape, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(ad::numel(shape));
    for (double& x : v) x = u(rng_);
    return Tensor::from_data(shape, std::move(v));
  }

  Tensor normal(const Shape& shape, double stddev) {
    std::normal_distribution<double> n(0.0, stddev);
    std::vector<double> v(ad::numel(shape));
    for (double& x : v) x = n(rng_);
    return Tensor::from_data(shape, std::move(v));
  }

  std::vector<int> ids(std::size_t count, int upper) {
    std::uniform_int_distribution<int> u(0, upper - 1);
    std::vector<int> v(count);
    for (int& x : v) x = u(rng_);
    return v;
  }

  bool coin() { return std::bernoulli_distribution(0.5)(rng_); }
  std::mt19937_64& rng() { return rng_; }

  CaseSpec make(OpKind op) {
    switch (op) {
      case OpKind::kMatmul: {
        const std::size_t m = dim(1, 5), k = dim(1, 5), n = dim(1, 5);
        return {fmt::format("[{},{}]x[{},{}]", m, k, k, n),
                {normal({m, k}, 1.0), normal({k, n}, 1.0)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::matmul(t, in[0], in[1]); }};
      }
      case OpKind::kAdd: {
        const std::size_t m = dim(1, 5), n = dim(1, 5);
        if (coin()) {
          return {fmt::format("[{},{}]+[{}]", m, n, n), {normal({m, n}, 1.0), normal({n}, 1.0)},
                  [](Tape& t, const std::vector<Tensor>& in) { return ops::add(t, in[0], in[1]); }};
        }
        return {fmt::format("[{},{}]+[{},{}]", m, n, m, n), {normal({m, n}, 1.0), normal({m, n}, 1.0)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::add(t, in[0], in[1]); }};
      }
      case OpKind::kMul: {
        const Shape s{dim(1, 4), dim(1, 5)};
        return {fmt::format("{}*{}", ad::shape_string(s), ad::shape_string(s)),
                {normal(s, 1.0), normal(s, 1.0)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::mul(t, in[0], in[1]); }};
      }
      case OpKind::kScale: {
        const Shape s{dim(1, 4), dim(1, 5)};
        const double factor = std::uniform_real_distribution<double>(-2.0, 2.0)(rng_);
        return {fmt::format("{}*{:.3f}", ad::shape_string(s), factor), {normal(s, 1.0)},
                [factor](Tape& t, const std::vector<Tensor>& in) { return ops::scale(t, in[0], factor); }};
      }
      case OpKind::kSum: {
        const Shape s{dim(1, 4), dim(1, 5)};
        return {"sum" + ad::shape_string(s), {normal(s, 1.0)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::sum(t, in[0]); }};
      }
      case OpKind::kEmbeddingLookup: {
        const std::size_t v = dim(2, 6), d = dim(1, 4), count = dim(1, 8);
        auto table_ids = ids(count, static_cast<int>(v));
        return {fmt::format("table[{},{}] ids={}", v, d, count), {normal({v, d}, 1.0)},
                [table_ids](Tape& t, const std::vector<Tensor>& in) {
                  return ops::embedding_lookup(t, in[0], table_ids);
                }};
      }
      case OpKind::kLayerNorm: {
        // Width 2 rows normalise to +-1 whatever x is; the gradient then
        // lives entirely in the eps term and is below difference resolution.
        const std::size_t m = dim(1, 4), n = dim(3, 6);
        return {fmt::format("ln[{},{}]", m, n),
                {normal({m, n}, 1.0), uniform({n}, 0.5, 1.5), normal({n}, 0.5)},
                [](Tape& t, const std::vector<Tensor>& in) {
                  return ops::layer_norm(t, in[0], in[1], in[2]);
                }};
      }
      case OpKind::kSoftmax: {
        const std::size_t m = dim(1, 4), n = dim(2, 6);
        return {fmt::format("softmax[{},{}]", m, n), {normal({m, n}, 1.5)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::softmax(t, in[0]); }};
      }
      case OpKind::kGelu: {
        const Shape s{dim(1, 4), dim(1, 6)};
        return {"gelu" + ad::shape_string(s), {normal(s, 1.5)},
                [](Tape& t, const std::vector<Tensor>& in) { return ops::gelu(t, in[0]); }};
      }
      case OpKind::kCrossEntropy: {
        const std::size_t m = dim(2, 6), v = dim(2, 6);
        auto targets = ids(m, static_cast<int>(v));
        targets[dim(0, m - 1)] = ops::kIgnoreTarget;
        return {fmt::format("xent[{},{}]", m, v), {normal({m, v}, 1.5)},
                [targets](Tape& t, const std::vector<Tensor>& in) {
                  return ops::cross_entropy(t, in[0], targets);
                }};
      }
      case OpKind::kCausalSelfAttention: {
        const std::size_t batch = dim(1, 2), seq = dim(1, 4), heads = dim(1, 2), hd = dim(1, 3);
        const std::size_t d = heads * hd;
        return {fmt::format("attn b={} t={} h={} d={}", batch, seq, heads, d),
                {normal({batch * seq, 3 * d}, 1.0)},
                [batch, seq, heads](Tape& t, const std::vector<Tensor>& in) {
                  return ops::causal_self_attention(t, in[0], batch, seq, heads);
                }};
      }
    }
    fail(ErrorKind::kContract, "unhandled op kind");
  }

 private:
  std::mt19937_64 rng_;
};

// Scalar probe: sum(out * w) with w fixed per case, or out itself if scalar.
Tensor probe(Tape& tape, const Tensor& out, std::optional<Tensor>& weights, std::mt19937_64& rng) {
  if (out.size() == 1 && out.rank() == 0) return out;
  if (!weights) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    std::vector<double> w(out.size());
    for (double& x : w) x = sign(rng) ? u(rng) : -u(rng);
    weights = Tensor::from_data(out.shape(), std::move(w));
  }
  return ops::sum(tape, ops::mul(tape, out, *weights));
}

GradCheckCase check_case(OpKind op, std::size_t index, CaseSpec spec, std::mt19937_64& rng,
                         double epsilon, double tolerance) {
  std::optional<Tensor> weights;
  std::vector<Tensor> leaves;
  for (const auto& in : spec.inputs) {
    leaves.push_back(Tensor::from_data(in.shape(),
                                       std::vector<double>(in.data().begin(), in.data().end()), true));
  }
  Tape tape;
  Tensor loss = probe(tape, spec.build(tape, leaves), weights, rng);
  tape.backward(loss);

  GradCheckCase result;
  result.op = op;
  result.index = index;
  result.description = std::move(spec.description);
  for (std::size_t i = 0; i < spec.inputs.size(); ++i) {
    auto f = [&](const Tensor& x) {
      std::vector<Tensor> args = spec.inputs;
      args[i] = x;
      Tape scratch;
      return probe(scratch, spec.build(scratch, args), weights, rng).item();
    };
    const Tensor numeric = ad::finite_difference_grad(f, spec.inputs[i], epsilon);
    const std::vector<double> analytic = leaves[i].has_grad()
                                             ? std::vector<double>(leaves[i].grad().begin(), leaves[i].grad().end())
                                             : std::vector<double>(leaves[i].size(), 0.0);
    result.max_rel_error = std::max(result.max_rel_error, ad::max_relative_error(analytic, numeric.data()));
    result.max_normwise_error =
        std::max(result.max_normwise_error, ad::normwise_relative_error(analytic, numeric.data()));
    result.scalars += analytic.size();
  }
  result.ok = result.max_rel_error <= tolerance;
  return result;
}

}  // namespace

std::size_t GradCheckSummary::failures() const {
  std::size_t n = 0;
  for (const auto& c : cases) n += !c.ok;
  return n;
}

double GradCheckSummary::worst() const {
  double w = 0.0;
  for (const auto& c : cases) w = std::max(w, c.max_rel_error);
  return w;
}

nlohmann::json GradCheckSummary::to_json() const {
  nlohmann::json j;
  j["epsilon"] = epsilon;
  j["tolerance"] = tolerance;
  j["cases"] = cases.size();
  j["failures"] = failures();
  j["worst_rel_error"] = worst();
  double normwise = 0.0;
  for (const auto& c : cases) normwise = std::max(normwise, c.max_normwise_error);
  j["worst_normwise_rel_error"] = normwise;
  nlohmann::json per_op = nlohmann::json::object();
  for (OpKind op : ops::kAllOpKinds) {
    std::size_t n = 0, bad = 0;
    double w = 0.0;
    for (const auto& c : cases) {
      if (c.op != op) continue;
      ++n;
      bad += !c.ok;
      w = std::max(w, c.max_rel_error);
    }
    per_op[std::string(ops::to_string(op))] = {{"cases", n}, {"failures", bad}, {"worst_rel_error", w}};
  }
  j["per_op"] = per_op;
  return j;
}

GradCheckSummary run_gradcheck(std::uint64_t seed, std::size_t cases_per_op, double epsilon,
                               double tolerance) {
  GradCheckSummary summary;
  summary.epsilon = epsilon;
  summary.tolerance = tolerance;
  CaseFactory factory(seed);
  for (OpKind op : ops::kAllOpKinds) {
    for (std::size_t i = 0; i < cases_per_op; ++i) {
      CaseSpec spec = factory.make(op);
      summary.cases.push_back(check_case(op, i, std::move(spec), factory.rng(), epsilon, tolerance));
    }
  }
  return summary;
}

double model_gradcheck(const model::ModelState& model, const corpus::TokenBatch& batch,
                       std::span<const std::size_t> indices, double epsilon) {
  const auto analytic = model::loss_and_gradient(model, batch).gradient;
  model::ModelState work = model;
  std::vector<double> a, n;
  for (std::size_t j : indices) {
    if (j >= work.parameters.size()) fail(ErrorKind::kContract, "gradcheck index out of range");
    const double saved = work.parameters[j];
    work.parameters[j] = saved + epsilon;
    const double plus = model::evaluate_loss(work, batch);
    work.parameters[j] = saved - epsilon;
    const double minus = model::evaluate_loss(work, batch);
    work.parameters[j] = saved;
    a.push_back(analytic[j]);
    n.push_back((plus - minus) / (2.0 * epsilon));
  }
  return ad::normwise_relative_error(a, n);
}

}  // namespace codespot::oracle
