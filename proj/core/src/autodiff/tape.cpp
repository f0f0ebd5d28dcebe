#include "codespot/autodiff/tape.hpp"

#include <atomic>
#include <string>

#include "codespot/util/error.hpp"

namespace codespot::ad {

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
}

Tape::Tape() : id_(next_tape_id.fetch_add(1)) {}

void Tape::record(std::string_view kind, Tensor& output, BackwardFn backward) {
  if (consumed_) fail(ErrorKind::kContract, "cannot record on a consumed tape");
  auto& impl = output.impl();
  impl.producer_tape = id_;
  impl.producer_node = nodes_.size();
  nodes_.push_back(Node{kind, output, std::move(backward)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined()) fail(ErrorKind::kContract, "backward on an undefined tensor");
  if (loss.size() != 1) {
    fail(ErrorKind::kContract,
         "backward requires a scalar loss, got shape " + shape_string(loss.shape()));
  }
  if (consumed_) fail(ErrorKind::kContract, "tape already consumed by an earlier backward");
  const auto& impl = loss.impl();
  if (impl.producer_tape != id_ || impl.producer_node >= nodes_.size() ||
      !nodes_[impl.producer_node].output.same_as(loss)) {
    fail(ErrorKind::kContract, "loss was not produced on this tape (detached)");
  }

  Tensor seed = loss;
  seed.grad_buffer()[0] += 1.0;
  for (std::size_t i = impl.producer_node + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.output.has_grad()) continue;  // not upstream of the loss
    node.backward();
  }
  nodes_.clear();
  consumed_ = true;
}

}  // namespace codespot::ad
