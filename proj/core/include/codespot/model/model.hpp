#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codespot/autodiff/tape.hpp"
#include "codespot/autodiff/tensor.hpp"
#include "codespot/corpus/batching.hpp"
#include "codespot/corpus/corpus.hpp"

namespace codespot::model {

struct ModelConfig {
  std::size_t vocab_size = 64;
  std::size_t context_len = 64;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_layers = 2;
  std::uint64_t seed = 1;

  std::size_t mlp_width() const { return 4 * d_model; }
  // Config error when any size is zero or n_heads does not divide d_model.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class ParamRole { kEmbedding, kWeight, kBias, kGain };

struct RegistryEntry {
  std::string name;
  ad::Shape shape;
  std::size_t offset = 0;
  std::size_t size = 0;
  ParamRole role = ParamRole::kWeight;
};

// Ordered catalogue of every trainable scalar. Entry order is fixed by the
// config, and offsets tile [0, total_scalars) without gaps.
class ParameterRegistry {
 public:
  static ParameterRegistry for_config(const ModelConfig& config);

  const std::vector<RegistryEntry>& entries() const { return entries_; }
  std::size_t total_scalars() const { return total_; }
  std::uint64_t digest() const { return digest_; }

  std::size_t index_of(std::string_view name) const;
  const RegistryEntry& find(std::string_view name) const;
  // Entry owning flat scalar index j.
  const RegistryEntry& entry_for_scalar(std::size_t j) const;

 private:
  void add(std::string name, ad::Shape shape, ParamRole role);

  std::vector<RegistryEntry> entries_;
  std::size_t total_ = 0;
  std::uint64_t digest_ = 0;
};

// V*d + ctx*d + L*(12 d^2 + 13 d) + 2d + d*V + V
std::size_t closed_form_parameter_count(const ModelConfig& config);

// Config plus the flat parameter vector in registry order.
struct ModelState {
  ModelConfig config;
  ParameterRegistry registry;
  std::vector<double> parameters;

  std::span<const double> view(std::string_view name) const;
  std::span<double> mutable_view(std::string_view name);
  std::uint64_t content_hash() const;
};

// Scaled-normal weights and embeddings, zero biases, unit layer-norm gains.
ModelState init_model(const ModelConfig& config);

// One leaf tensor per registry entry, holding a copy of the parameters, for
// use on a single tape.
class ParameterLeaves {
 public:
  ParameterLeaves(const ModelState& model, bool requires_grad);

  const ad::Tensor& operator[](std::size_t entry) const { return leaves_[entry]; }
  // Flat gradient in registry order; zero where no gradient reached.
  std::vector<double> gather_gradient() const;

 private:
  const ParameterRegistry* registry_;
  std::vector<ad::Tensor> leaves_;
};

// Logits [rows * seq_len, vocab] for a batch. Data error when the sequence is
// longer than context_len or a token id is out of range.
ad::Tensor forward_logits(ad::Tape& tape, const ModelState& model, const ParameterLeaves& leaves,
                          const corpus::TokenBatch& batch);

// Mean next-token cross-entropy over every target position of the batch.
ad::Tensor forward_loss(ad::Tape& tape, const ModelState& model, const ParameterLeaves& leaves,
                        const corpus::TokenBatch& batch);

double evaluate_loss(const ModelState& model, const corpus::TokenBatch& batch);

// Target-weighted mean loss over several batches.
double evaluate_mean_loss(const ModelState& model, std::span<const corpus::TokenBatch> batches);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // registry order
};

LossAndGradient loss_and_gradient(const ModelState& model, const corpus::TokenBatch& batch);

struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;

  double percent() const;
};

// Greedy top-1 next-token hits; ties in the argmax go to the lowest id.
AccuracyCount count_correct(const ModelState& model, const corpus::TokenBatch& batch);

inline constexpr std::size_t kEvalBatchSize = 16;

// Greedy next-token top-1 accuracy in percent over every predicted position
// of the split. Data error on an empty split.
double eval_accuracy(const ModelState& model, const corpus::Corpus& split,
                     std::size_t batch_size = kEvalBatchSize);

// Same, over batches prepared in advance.
double eval_accuracy(const ModelState& model, std::span<const corpus::TokenBatch> batches);

}  // namespace codespot::model
