#pragma once

#include <functional>
#include <initializer_list>
#include <utility>
#include <vector>

#include "s2bnet/tensor.hpp"

namespace s2b {

/// Records the forward pass as an ordered list of backward hooks and replays
/// them in exact reverse order. Single-writer: one tape per training step.
template <class T>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(std::function<void()> backward_fn) {
    records_.push_back(std::move(backward_fn));
  }

  size_t size() const { return records_.size(); }
  const void* tag() const { return this; }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every requires_grad tensor
  /// touched by this tape. Gradients accumulate into existing buffers.
  void backward(const TensorT<T>& loss) {
    check_value(loss.tape_tag() == tag(),
                "backward() requires a scalar produced by this tape");
    check_shape(loss.numel() == 1, "backward() requires a scalar loss");
    auto* impl = loss.raw();
    impl->ensure_grad();
    impl->grad[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) (*it)();
  }

 private:
  std::vector<std::function<void()>> records_;
};

using Tape = TapeT<float>;

namespace detail {

// An op output participates in autograd iff a tape is active and at least one
// input is on the gradient path.
template <class T>
bool wants_grad(const TapeT<T>* tape,
                std::initializer_list<const TensorT<T>*> inputs) {
  if (!tape) return false;
  for (const auto* in : inputs)
    if ((*in).requires_grad()) return true;
  return false;
}

template <class T>
void mark_output(TapeT<T>* tape, TensorT<T>& out) {
  out.raw()->requires_grad = true;
  out.raw()->tape_tag = tape->tag();
}

}  // namespace detail

}  // namespace s2b
