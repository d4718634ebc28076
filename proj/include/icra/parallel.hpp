#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace icra {

/// Selects the serial reference loop or the OpenMP loop for a kernel.
enum class Exec { serial, parallel };

/// Fixed work-unit size for chunked reductions. Chunk boundaries depend only
/// on the problem size, so results are bit-identical for any thread count.
inline constexpr std::size_t kChunk = 256;

inline std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Calls body(i) for i in [0, n). Iterations must be independent.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
  if (exec == Exec::serial) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const auto count = static_cast<long long>(n);
  // Exceptions may not cross the parallel region; the first one is rethrown.
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 16)
  for (long long i = 0; i < count; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(icra_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

/// Deterministic map-reduce: each fixed-size chunk is reduced in index order
/// into its own partial (possibly on different threads), then partials are
/// folded in chunk order. `make` builds a zero accumulator; `accumulate(acc,
/// i)` adds item i; `merge(acc, part)` folds a partial.
template <class Acc, class Make, class Accumulate, class Merge>
Acc chunked_reduce(std::size_t n, Exec exec, Make&& make, Accumulate&& accumulate, Merge&& merge) {
  const std::size_t chunks = chunk_count(n);
  std::vector<Acc> partials;
  partials.reserve(chunks);
  for (std::size_t c = 0; c < chunks; ++c) partials.push_back(make());
  for_each_index(chunks, exec, [&](std::size_t c) {
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) accumulate(partials[c], i);
  });
  Acc total = make();
  for (const auto& p : partials) merge(total, p);
  return total;
}

}  // namespace icra
