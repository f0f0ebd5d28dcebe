#pragma once

#include <array>
#include <span>
#include <string_view>

#include "codespot/autodiff/tape.hpp"
#include "codespot/autodiff/tensor.hpp"

// Differentiable operations. Every op validates its shape rule, checks its
// output for NaN/Inf, and records a backward closure on the tape when any
// input requires a gradient. Reductions run in a fixed sequential order.
namespace codespot::ad::ops {

enum class OpKind {
  kMatmul,
  kAdd,
  kMul,
  kScale,
  kSum,
  kEmbeddingLookup,
  kLayerNorm,
  kSoftmax,
  kGelu,
  kCrossEntropy,
  kCausalSelfAttention,
};

inline constexpr std::array kAllOpKinds = {
    OpKind::kMatmul,         OpKind::kAdd,       OpKind::kMul,
    OpKind::kScale,          OpKind::kSum,       OpKind::kEmbeddingLookup,
    OpKind::kLayerNorm,      OpKind::kSoftmax,   OpKind::kGelu,
    OpKind::kCrossEntropy,   OpKind::kCausalSelfAttention,
};

std::string_view to_string(OpKind kind);

// [m, k] x [k, n] -> [m, n]
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// Same-shape elementwise sum, or [m, n] + [n] with the vector broadcast over
// rows (bias add).
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);

// Same-shape elementwise product.
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& a, double factor);

// Sum of all elements -> scalar.
Tensor sum(Tape& tape, const Tensor& a);

// table [V, d], ids in [0, V) -> [ids.size(), d]. Out-of-range ids are a
// data error.
Tensor embedding_lookup(Tape& tape, const Tensor& table, std::span<const int> ids);

// Normalises each row of x [m, n] over its last axis, then applies the
// per-feature gain [n] and bias [n].
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain, const Tensor& bias,
                  double eps = 1e-5);

// Row-wise softmax over the last axis of a rank >= 1 tensor.
Tensor softmax(Tape& tape, const Tensor& x);

// tanh-approximated GELU, elementwise.
Tensor gelu(Tape& tape, const Tensor& x);

inline constexpr int kIgnoreTarget = -1;

// Mean next-token cross-entropy of logits [m, V] against targets (size m).
// Positions with target kIgnoreTarget are skipped; at least one must remain.
Tensor cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> targets);

// Multi-head causal scaled-dot-product attention.
// qkv is [batch * seq, 3 * d] holding the query, key and value projections
// side by side; the result is [batch * seq, d] with heads concatenated.
Tensor causal_self_attention(Tape& tape, const Tensor& qkv, std::size_t batch,
                             std::size_t seq, std::size_t heads);

}  // namespace codespot::ad::ops
