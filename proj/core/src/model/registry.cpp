#include <string>

#include "codespot/model/model.hpp"
#include "codespot/util/binary_io.hpp"
#include "codespot/util/error.hpp"

namespace codespot::model {

void ModelConfig::validate() const {
  if (vocab_size == 0 || context_len == 0 || d_model == 0 || n_heads == 0 || n_layers == 0) {
    fail(ErrorKind::kConfig, "model sizes must all be positive");
  }
  if (d_model % n_heads != 0) {
    fail(ErrorKind::kConfig, "n_heads (" + std::to_string(n_heads) + ") must divide d_model (" +
                                 std::to_string(d_model) + ")");
  }
}

void ParameterRegistry::add(std::string name, ad::Shape shape, ParamRole role) {
  RegistryEntry e;
  e.name = std::move(name);
  e.size = ad::numel(shape);
  e.shape = std::move(shape);
  e.offset = total_;
  e.role = role;
  total_ += e.size;
  entries_.push_back(std::move(e));
}

ParameterRegistry ParameterRegistry::for_config(const ModelConfig& config) {
  config.validate();
  const std::size_t v = config.vocab_size, d = config.d_model, ctx = config.context_len;
  const std::size_t hidden = config.mlp_width();
  ParameterRegistry reg;
  reg.add("tok_emb", {v, d}, ParamRole::kEmbedding);
  reg.add("pos_emb", {ctx, d}, ParamRole::kEmbedding);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = "h" + std::to_string(l) + ".";
    reg.add(p + "ln1.gain", {d}, ParamRole::kGain);
    reg.add(p + "ln1.bias", {d}, ParamRole::kBias);
    reg.add(p + "attn.qkv.weight", {d, 3 * d}, ParamRole::kWeight);
    reg.add(p + "attn.qkv.bias", {3 * d}, ParamRole::kBias);
    reg.add(p + "attn.proj.weight", {d, d}, ParamRole::kWeight);
    reg.add(p + "attn.proj.bias", {d}, ParamRole::kBias);
    reg.add(p + "ln2.gain", {d}, ParamRole::kGain);
    reg.add(p + "ln2.bias", {d}, ParamRole::kBias);
    reg.add(p + "mlp.fc.weight", {d, hidden}, ParamRole::kWeight);
    reg.add(p + "mlp.fc.bias", {hidden}, ParamRole::kBias);
    reg.add(p + "mlp.proj.weight", {hidden, d}, ParamRole::kWeight);
    reg.add(p + "mlp.proj.bias", {d}, ParamRole::kBias);
  }
  reg.add("ln_f.gain", {d}, ParamRole::kGain);
  reg.add("ln_f.bias", {d}, ParamRole::kBias);
  reg.add("head.weight", {d, v}, ParamRole::kWeight);
  reg.add("head.bias", {v}, ParamRole::kBias);

  Fnv1a64 h;
  h.update("codespot-registry-v1");
  for (const auto& e : reg.entries_) {
    h.update(e.name);
    h.update_u64(e.shape.size());
    for (std::size_t s : e.shape) h.update_u64(s);
    h.update_u64(e.offset);
  }
  reg.digest_ = h.digest();
  return reg;
}

std::size_t ParameterRegistry::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  fail(ErrorKind::kContract, "no parameter named '" + std::string(name) + "'");
}

const RegistryEntry& ParameterRegistry::find(std::string_view name) const {
  return entries_[index_of(name)];
}

const RegistryEntry& ParameterRegistry::entry_for_scalar(std::size_t j) const {
  if (j >= total_) fail(ErrorKind::kContract, "scalar index " + std::to_string(j) + " out of range");
  // Entries are sorted by offset.
  std::size_t lo = 0, hi = entries_.size();
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (entries_[mid].offset <= j) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return entries_[lo];
}

std::size_t closed_form_parameter_count(const ModelConfig& c) {
  const std::size_t v = c.vocab_size, d = c.d_model, ctx = c.context_len;
  return v * d + ctx * d + c.n_layers * (12 * d * d + 13 * d) + 2 * d + d * v + v;
}

}  // namespace codespot::model
