#include "codespot/model/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "codespot/autodiff/ops.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::model {

namespace {
constexpr double kInitStd = 0.02;
}

std::span<const double> ModelState::view(std::string_view name) const {
  const auto& e = registry.find(name);
  return std::span(parameters).subspan(e.offset, e.size);
}

std::span<double> ModelState::mutable_view(std::string_view name) {
  const auto& e = registry.find(name);
  return std::span(parameters).subspan(e.offset, e.size);
}

std::uint64_t ModelState::content_hash() const {
  Fnv1a64 h;
  h.update_u64(registry.digest());
  h.update_u64(hash_doubles(parameters));
  return h.digest();
}

ModelState init_model(const ModelConfig& config) {
  ModelState state{config, ParameterRegistry::for_config(config), {}};
  state.parameters.assign(state.registry.total_scalars(), 0.0);
  std::mt19937_64 rng(config.seed);
  // Residual output projections are scaled down with depth (GPT-2 style).
  const double residual_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config.n_layers));
  for (const auto& e : state.registry.entries()) {
    auto slot = std::span(state.parameters).subspan(e.offset, e.size);
    switch (e.role) {
      case ParamRole::kGain:
        std::fill(slot.begin(), slot.end(), 1.0);
        break;
      case ParamRole::kBias:
        break;
      case ParamRole::kEmbedding:
      case ParamRole::kWeight: {
        const bool residual = e.name.ends_with("proj.weight");
        std::normal_distribution<double> dist(0.0, residual ? residual_std : kInitStd);
        for (double& v : slot) v = dist(rng);
        break;
      }
    }
  }
  return state;
}

ParameterLeaves::ParameterLeaves(const ModelState& model, bool requires_grad)
    : registry_(&model.registry) {
  leaves_.reserve(model.registry.entries().size());
  for (const auto& e : model.registry.entries()) {
    const auto first = model.parameters.begin() + static_cast<std::ptrdiff_t>(e.offset);
    leaves_.push_back(ad::Tensor::from_data(
        e.shape, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(e.size)),
        requires_grad));
  }
}

std::vector<double> ParameterLeaves::gather_gradient() const {
  std::vector<double> grad(registry_->total_scalars(), 0.0);
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (!leaves_[i].has_grad()) continue;
    const auto g = leaves_[i].grad();
    std::copy(g.begin(), g.end(), grad.begin() + static_cast<std::ptrdiff_t>(registry_->entries()[i].offset));
  }
  return grad;
}

ad::Tensor forward_logits(ad::Tape& tape, const ModelState& model, const ParameterLeaves& leaves,
                          const corpus::TokenBatch& batch) {
  namespace ops = ad::ops;
  const ModelConfig& cfg = model.config;
  const auto& reg = model.registry;
  if (batch.rows == 0 || batch.seq_len == 0) fail(ErrorKind::kData, "empty batch");
  if (batch.seq_len > cfg.context_len) {
    fail(ErrorKind::kData, "sequence length " + std::to_string(batch.seq_len) +
                               " exceeds context_len " + std::to_string(cfg.context_len));
  }
  if (batch.inputs.size() != batch.rows * batch.seq_len) {
    fail(ErrorKind::kData, "batch inputs do not match its [rows, seq_len] shape");
  }
  auto p = [&](std::string_view name) -> const ad::Tensor& { return leaves[reg.index_of(name)]; };

  std::vector<int> positions(batch.inputs.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    positions[i] = static_cast<int>(i % batch.seq_len);
  }
  ad::Tensor x = ops::add(tape, ops::embedding_lookup(tape, p("tok_emb"), batch.inputs),
                          ops::embedding_lookup(tape, p("pos_emb"), positions));

  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string pre = "h" + std::to_string(l) + ".";
    ad::Tensor h = ops::layer_norm(tape, x, p(pre + "ln1.gain"), p(pre + "ln1.bias"));
    ad::Tensor qkv = ops::add(tape, ops::matmul(tape, h, p(pre + "attn.qkv.weight")),
                              p(pre + "attn.qkv.bias"));
    ad::Tensor att = ops::causal_self_attention(tape, qkv, batch.rows, batch.seq_len, cfg.n_heads);
    att = ops::add(tape, ops::matmul(tape, att, p(pre + "attn.proj.weight")),
                   p(pre + "attn.proj.bias"));
    x = ops::add(tape, x, att);

    h = ops::layer_norm(tape, x, p(pre + "ln2.gain"), p(pre + "ln2.bias"));
    ad::Tensor f = ops::add(tape, ops::matmul(tape, h, p(pre + "mlp.fc.weight")),
                            p(pre + "mlp.fc.bias"));
    f = ops::gelu(tape, f);
    f = ops::add(tape, ops::matmul(tape, f, p(pre + "mlp.proj.weight")),
                 p(pre + "mlp.proj.bias"));
    x = ops::add(tape, x, f);
  }
  x = ops::layer_norm(tape, x, p("ln_f.gain"), p("ln_f.bias"));
  return ops::add(tape, ops::matmul(tape, x, p("head.weight")), p("head.bias"));
}

ad::Tensor forward_loss(ad::Tape& tape, const ModelState& model, const ParameterLeaves& leaves,
                        const corpus::TokenBatch& batch) {
  ad::Tensor logits = forward_logits(tape, model, leaves, batch);
  return ad::ops::cross_entropy(tape, logits, batch.targets);
}

double evaluate_loss(const ModelState& model, const corpus::TokenBatch& batch) {
  ad::Tape tape;
  ParameterLeaves leaves(model, false);
  return forward_loss(tape, model, leaves, batch).item();
}

double evaluate_mean_loss(const ModelState& model, std::span<const corpus::TokenBatch> batches) {
  double weighted = 0.0;
  std::size_t count = 0;
  for (const auto& b : batches) {
    const std::size_t n = b.target_count();
    weighted += evaluate_loss(model, b) * static_cast<double>(n);
    count += n;
  }
  if (count == 0) fail(ErrorKind::kData, "no target positions in evaluation batches");
  return weighted / static_cast<double>(count);
}

LossAndGradient loss_and_gradient(const ModelState& model, const corpus::TokenBatch& batch) {
  ad::Tape tape;
  ParameterLeaves leaves(model, true);
  ad::Tensor loss = forward_loss(tape, model, leaves, batch);
  tape.backward(loss);
  return {loss.item(), leaves.gather_gradient()};
}

double AccuracyCount::percent() const {
  if (total == 0) fail(ErrorKind::kData, "accuracy over zero positions");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

AccuracyCount count_correct(const ModelState& model, const corpus::TokenBatch& batch) {
  ad::Tape tape;
  ParameterLeaves leaves(model, false);
  const ad::Tensor logits = forward_logits(tape, model, leaves, batch);
  const std::size_t vocab = logits.dim(1);
  const double* pl = logits.data().data();
  AccuracyCount acc;
  for (std::size_t i = 0; i < batch.targets.size(); ++i) {
    const int target = batch.targets[i];
    if (target < 0) continue;
    const double* row = pl + i * vocab;
    std::size_t best = 0;
    for (std::size_t j = 1; j < vocab; ++j) {
      if (row[j] > row[best]) best = j;
    }
    acc.total += 1;
    if (best == static_cast<std::size_t>(target)) acc.correct += 1;
  }
  return acc;
}

double eval_accuracy(const ModelState& model, std::span<const corpus::TokenBatch> batches) {
  AccuracyCount total;
  for (const auto& b : batches) {
    const AccuracyCount c = count_correct(model, b);
    total.correct += c.correct;
    total.total += c.total;
  }
  return total.percent();
}

double eval_accuracy(const ModelState& model, const corpus::Corpus& split, std::size_t batch_size) {
  if (split.empty()) fail(ErrorKind::kData, "cannot evaluate an empty split");
  const auto batches = corpus::sequential_batches(split, batch_size, model.config.context_len);
  return eval_accuracy(model, batches);
}

}  // namespace codespot::model
