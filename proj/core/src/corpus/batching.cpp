#include "codespot/corpus/batching.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "codespot/corpus/vocabulary.hpp"
#include "codespot/util/error.hpp"

namespace codespot::corpus {

std::size_t TokenBatch::target_count() const {
  return static_cast<std::size_t>(
      std::count_if(targets.begin(), targets.end(), [](int t) { return t >= 0; }));
}

std::vector<int> TokenBatch::row_tokens(std::size_t r) const {
  const std::size_t len = window_lengths.at(r);
  std::vector<int> out(inputs.begin() + static_cast<std::ptrdiff_t>(r * seq_len),
                       inputs.begin() + static_cast<std::ptrdiff_t>(r * seq_len + len - 1));
  out.push_back(targets[r * seq_len + len - 2]);
  return out;
}

std::vector<std::vector<int>> split_windows(const Corpus& corpus, std::size_t context_len) {
  if (corpus.empty()) fail(ErrorKind::kData, "cannot batch an empty corpus");
  if (context_len == 0) fail(ErrorKind::kConfig, "context_len must be positive");
  std::size_t longest = 0;
  for (const auto& doc : corpus.documents) longest = std::max(longest, doc.size());
  if (context_len + 1 > longest) {
    fail(ErrorKind::kData, "context_len " + std::to_string(context_len) +
                               " exceeds every document length in corpus '" +
                               corpus.language_tag + "'");
  }
  const std::size_t cap = context_len + 1;
  std::vector<std::vector<int>> windows;
  for (const auto& doc : corpus.documents) {
    const std::size_t len = doc.size();
    if (len < 2) continue;
    const std::size_t pieces = (len + cap - 1) / cap;
    const std::size_t base = len / pieces, extra = len % pieces;
    std::size_t start = 0;
    for (std::size_t p = 0; p < pieces; ++p) {
      const std::size_t size = base + (p < extra ? 1 : 0);
      windows.emplace_back(doc.begin() + static_cast<std::ptrdiff_t>(start),
                           doc.begin() + static_cast<std::ptrdiff_t>(start + size));
      start += size;
    }
  }
  return windows;
}

TokenBatch make_batch(std::span<const std::vector<int>* const> windows) {
  TokenBatch batch;
  batch.rows = windows.size();
  for (const auto* w : windows) batch.seq_len = std::max(batch.seq_len, w->size() - 1);
  batch.inputs.assign(batch.rows * batch.seq_len, Vocabulary::kPad);
  batch.targets.assign(batch.rows * batch.seq_len, -1);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    const auto& w = *windows[r];
    for (std::size_t t = 0; t + 1 < w.size(); ++t) {
      batch.inputs[r * batch.seq_len + t] = w[t];
      batch.targets[r * batch.seq_len + t] = w[t + 1];
    }
    batch.window_lengths.push_back(w.size());
  }
  return batch;
}

BatchStream::BatchStream(const Corpus& corpus, std::size_t batch_size, std::size_t context_len,
                         std::uint64_t seed)
    : windows_(split_windows(corpus, context_len)), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  if (windows_.empty()) fail(ErrorKind::kData, "corpus yields no windows");
  shuffle_epoch();
}

void BatchStream::shuffle_epoch() {
  order_.resize(windows_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(epoch_)};
  std::mt19937_64 rng(seq);
  std::shuffle(order_.begin(), order_.end(), rng);
  cursor_ = 0;
}

std::size_t BatchStream::batches_per_epoch() const {
  return (windows_.size() + batch_size_ - 1) / batch_size_;
}

std::optional<TokenBatch> BatchStream::next_in_epoch() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<const std::vector<int>*> picked;
  for (std::size_t i = cursor_; i < end; ++i) picked.push_back(&windows_[order_[i]]);
  cursor_ = end;
  return make_batch(picked);
}

TokenBatch BatchStream::next() {
  if (cursor_ >= order_.size()) {
    ++epoch_;
    shuffle_epoch();
  }
  return *next_in_epoch();
}

std::vector<TokenBatch> sequential_batches(const Corpus& corpus, std::size_t batch_size,
                                           std::size_t context_len) {
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be positive");
  const auto windows = split_windows(corpus, context_len);
  std::vector<TokenBatch> out;
  for (std::size_t start = 0; start < windows.size(); start += batch_size) {
    std::vector<const std::vector<int>*> picked;
    for (std::size_t i = start; i < std::min(windows.size(), start + batch_size); ++i) {
      picked.push_back(&windows[i]);
    }
    out.push_back(make_batch(picked));
  }
  return out;
}

}  // namespace codespot::corpus
