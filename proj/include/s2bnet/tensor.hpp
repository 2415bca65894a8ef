#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "s2bnet/common.hpp"
#include "s2bnet/rng.hpp"

namespace s2b {

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    check_shape(d >= 0, "tensor dimensions must be nonnegative");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

template <class T>
struct TensorImplT {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until the first backward touches it
  const void* tape_tag = nullptr;

  std::vector<T>& ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T(0));
    return grad;
  }
};

/// Dense N-dimensional array, NCHW layout for feature maps. Copies alias the
/// same storage; gradients accumulate in the shared impl so a tensor used
/// twice in a graph receives both contributions.
template <class T>
class TensorT {
 public:
  using value_type = T;
  using Impl = TensorImplT<T>;

  TensorT() : impl_(std::make_shared<Impl>()) {}
  explicit TensorT(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

  static TensorT zeros(Shape shape) {
    TensorT t;
    t.impl_->data.assign(static_cast<size_t>(shape_numel(shape)), T(0));
    t.impl_->shape = std::move(shape);
    return t;
  }

  static TensorT full(Shape shape, T value) {
    TensorT t = zeros(std::move(shape));
    for (T& v : t.impl_->data) v = value;
    return t;
  }

  static TensorT from(Shape shape, std::vector<T> data) {
    check_shape(shape_numel(shape) == static_cast<int64_t>(data.size()),
                "data length does not match shape " + shape_str(shape));
    TensorT t;
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    return t;
  }

  static TensorT scalar(T value) { return from({1}, {value}); }

  static TensorT randn(rng::Engine& g, Shape shape, T stdev = T(1), T mean = T(0)) {
    TensorT t = zeros(std::move(shape));
    for (T& v : t.impl_->data)
      v = mean + stdev * static_cast<T>(rng::normal(g));
    return t;
  }

  static TensorT uniform(rng::Engine& g, Shape shape, T lo, T hi) {
    TensorT t = zeros(std::move(shape));
    for (T& v : t.impl_->data)
      v = static_cast<T>(rng::uniform(g, static_cast<double>(lo), static_cast<double>(hi)));
    return t;
  }

  const Shape& shape() const { return impl_->shape; }
  int64_t rank() const { return static_cast<int64_t>(impl_->shape.size()); }
  int64_t dim(int64_t i) const { return impl_->shape[static_cast<size_t>(i)]; }
  int64_t numel() const { return static_cast<int64_t>(impl_->data.size()); }

  T* data() { return impl_->data.data(); }
  const T* data() const { return impl_->data.data(); }
  std::vector<T>& vec() { return impl_->data; }
  const std::vector<T>& vec() const { return impl_->data; }

  T item() const {
    check_shape(numel() == 1, "item() requires a single-element tensor");
    return impl_->data[0];
  }

  // Checked element access, row-major.
  T& at(std::initializer_list<int64_t> idx) {
    return impl_->data[static_cast<size_t>(offset(idx))];
  }
  T at(std::initializer_list<int64_t> idx) const {
    return impl_->data[static_cast<size_t>(offset(idx))];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::vector<T>& grad() { return impl_->ensure_grad(); }
  const std::vector<T>& grad_view() const { return impl_->grad; }
  void zero_grad() {
    if (!impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  }

  const void* tape_tag() const { return impl_->tape_tag; }

  TensorT clone() const {
    TensorT t;
    t.impl_->shape = impl_->shape;
    t.impl_->data = impl_->data;
    return t;
  }

  bool same_shape(const TensorT& o) const { return impl_->shape == o.impl_->shape; }

  bool all_finite() const {
    for (T v : impl_->data)
      if (!std::isfinite(static_cast<double>(v))) return false;
    return true;
  }

  std::shared_ptr<Impl> impl() const { return impl_; }
  Impl* raw() const { return impl_.get(); }

 private:
  int64_t offset(std::initializer_list<int64_t> idx) const {
    check_shape(static_cast<int64_t>(idx.size()) == rank(),
                "index rank mismatch for shape " + shape_str(impl_->shape));
    int64_t off = 0;
    int64_t i = 0;
    for (int64_t v : idx) {
      const int64_t d = impl_->shape[static_cast<size_t>(i)];
      check_shape(v >= 0 && v < d, "index out of range");
      off = off * d + v;
      ++i;
    }
    return off;
  }

  std::shared_ptr<Impl> impl_;
};

using Tensor = TensorT<float>;
using IntTensor = TensorT<int32_t>;

}  // namespace s2b
