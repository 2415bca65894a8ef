#pragma once

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace s2b {

// Shape/contract violations (wrong rank, mismatched channels, ...).
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Domain violations on values (non-binary input to the packer, lambda <= 0, ...).
class ValueError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// File format / filesystem failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void check_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

inline void check_value(bool cond, const std::string& msg) {
  if (!cond) throw ValueError(msg);
}

// Worker count: hardware concurrency capped by the S2B_THREADS env var.
inline int thread_cap() {
  static const int cap = [] {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("S2B_THREADS")) {
      int v = std::atoi(env);
      if (v >= 1 && v < hw) hw = v;
      if (v == 1) hw = 1;
    }
    return hw;
  }();
  return cap;
}

// Splits [begin, end) into contiguous chunks, one worker per chunk.
// Only used for loops whose iterations write disjoint outputs, so results
// are bit-identical for any worker count.
inline void parallel_for(int64_t begin, int64_t end,
                         const std::function<void(int64_t, int64_t)>& body) {
  const int64_t n = end - begin;
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<int64_t>(thread_cap(), n));
  if (workers <= 1 || n < 4) {
    body(begin, end);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers) - 1);
  const int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    const int64_t lo = begin + w * chunk;
    const int64_t hi = std::min(end, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(begin, std::min(end, begin + chunk));
  for (auto& t : pool) t.join();
}

}  // namespace s2b
