#pragma once

// Deterministic Monte Carlo plumbing: index-ordered parallel map over paths and
// compensated reductions.

#include "msde/wiener.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace msde {

class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Sample mean and standard error of the mean, reduced in index order.
inline Estimate mean_and_se(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return {};
  KahanSum s;
  for (double v : values) s.add(v);
  const double mean = s.value() / n;
  if (values.size() < 2) return {mean, 0.0};
  KahanSum sq;
  for (double v : values) sq.add((v - mean) * (v - mean));
  return {mean, std::sqrt(sq.value() / (n - 1.0) / n)};
}

/// Evaluates fn(i) for i in [0, count) on up to `threads` workers and returns
/// the results in index order. If any evaluation throws, the exception of the
/// lowest failing index is rethrown after all workers have joined.
template <typename Fn>
auto parallel_map(Index count, unsigned threads, Fn&& fn) {
  using Result = decltype(fn(Index{0}));
  std::vector<Result> out(static_cast<std::size_t>(count));
  const unsigned workers =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<Index>(count, 1))));
  if (workers == 1) {
    for (Index i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = fn(i);
    return out;
  }
  std::exception_ptr error;
  Index error_index = count;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      // Strided assignment; results land in fixed slots so scheduling does
      // not affect the reduction.
      for (Index i = w; i < count; i += workers) {
        try {
          out[static_cast<std::size_t>(i)] = fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

}  // namespace msde
