#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "codespot/autodiff/tensor.hpp"

namespace codespot::ad {

// Define-by-run record of differentiable operations.
//
// Ops append a node only when their output requires a gradient, so a forward
// pass over constant tensors records nothing. A tape is single-use: backward()
// consumes it. Tapes are confined to one thread.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  // Appends a node whose closure propagates output.grad() into its inputs.
  void record(std::string_view kind, Tensor& output, BackwardFn backward);

  // Seeds d(loss)/d(loss) = 1 and replays every node in reverse order.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  std::uint64_t id() const { return id_; }

 private:
  struct Node {
    std::string_view kind;
    Tensor output;
    BackwardFn backward;
  };

  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace codespot::ad
