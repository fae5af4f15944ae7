#pragma once

// Deterministic parallel primitives. Every reduction here sums in a fixed
// order that depends only on the input length, never on the worker count,
// so results are bitwise identical for any OMP_NUM_THREADS.

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace homoglab::par {

/// Fixed block length for blocked reductions.
inline constexpr std::size_t kBlock = 2048;

/// Neumaier-compensated accumulator.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if ((sum >= 0 ? sum : -sum) >= (x >= 0 ? x : -x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

int max_threads();
void set_threads(int n);
bool in_parallel();

/// Sum of f(i) for i in [0, n), blocked and compensated.
template <class F>
double reduce_sum(std::size_t n, F&& f) {
  const std::size_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<double> partial(nblocks, 0.0);
  const auto nb = static_cast<long long>(nblocks);
#pragma omp parallel for schedule(static) if (nblocks > 1 && !in_parallel())
  for (long long b = 0; b < nb; ++b) {
    CompensatedSum acc;
    const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
    const std::size_t hi = lo + kBlock < n ? lo + kBlock : n;
    for (std::size_t i = lo; i < hi; ++i) acc.add(f(i));
    partial[static_cast<std::size_t>(b)] = acc.value();
  }
  CompensatedSum total;
  for (double v : partial) total.add(v);
  return total.value();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  return reduce_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

/// Runs f(i) for i in [0, n) across the worker pool; results must be
/// written by index so that the outcome is schedule independent. The
/// exception of the lowest failing index is rethrown after the loop.
template <class F>
void for_each_index(std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
  const auto nn = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 1) if (n > 1 && !in_parallel())
  for (long long i = 0; i < nn; ++i) {
    try {
      f(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace homoglab::par
