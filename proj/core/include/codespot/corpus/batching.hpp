#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "codespot/corpus/corpus.hpp"

namespace codespot::corpus {

// A batch of windows laid out as a [rows, seq_len] matrix. targets[i] is the
// token following inputs[i] in the same window; padded positions carry the
// padding id as input and -1 as target.
struct TokenBatch {
  std::size_t rows = 0;
  std::size_t seq_len = 0;
  std::vector<int> inputs;
  std::vector<int> targets;
  std::vector<std::size_t> window_lengths;  // tokens per row, including the final target

  std::size_t target_count() const;
  // The original window tokens of row r (inputs followed by the last target).
  std::vector<int> row_tokens(std::size_t r) const;
};

// Cuts each document into ceil(L / (context_len + 1)) contiguous,
// non-overlapping windows of near-equal length. Documents shorter than two
// tokens are skipped. Data error when context_len + 1 exceeds every document
// length.
std::vector<std::vector<int>> split_windows(const Corpus& corpus, std::size_t context_len);

TokenBatch make_batch(std::span<const std::vector<int>* const> windows);

// Deterministic shuffled batching. Each epoch visits every window once, in an
// order derived from (seed, epoch).
class BatchStream {
 public:
  BatchStream(const Corpus& corpus, std::size_t batch_size, std::size_t context_len,
              std::uint64_t seed);

  // Next batch of the current epoch, or nullopt once the epoch is exhausted.
  std::optional<TokenBatch> next_in_epoch();
  // Next batch, rolling over into a freshly shuffled epoch when needed.
  TokenBatch next();

  std::size_t epoch() const { return epoch_; }
  std::size_t batches_per_epoch() const;
  std::size_t window_count() const { return windows_.size(); }

 private:
  void shuffle_epoch();

  std::vector<std::vector<int>> windows_;
  std::vector<std::size_t> order_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
  std::size_t cursor_ = 0;
};

// All windows of the corpus, in document order, grouped into batches.
std::vector<TokenBatch> sequential_batches(const Corpus& corpus, std::size_t batch_size,
                                           std::size_t context_len);

}  // namespace codespot::corpus
