#pragma once

#include <cstdlib>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sepfilter {

enum class RunMode { Serial, Parallel };

/// Worker cap: SEPFILTER_THREADS env var, else the OpenMP default.
inline int configured_threads() {
#ifdef _OPENMP
  if (const char* env = std::getenv("SEPFILTER_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return omp_get_max_threads();
#else
  return 1;
#endif
}

/// Runs fn(i) for i in [0, n). Each iteration must own its random stream and
/// write only to its own output slot, so the serial and parallel schedules
/// produce bit-identical results.
template <class Fn>
void parallel_for_paths(std::size_t n, Fn&& fn,
                        RunMode mode = RunMode::Parallel) {
#ifdef _OPENMP
  if (mode == RunMode::Parallel) {
    const int threads = configured_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(threads)
    for (long long i = 0; i < static_cast<long long>(n); ++i)
      fn(static_cast<std::size_t>(i));
    return;
  }
#else
  (void)mode;
#endif
  for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace sepfilter
