#pragma once

#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mocap/types.hpp"

namespace mocap {

// Global worker cap for the OpenMP kernels. 0 means "hardware default".
void set_max_threads(int n);
int max_threads();

// Static-schedule parallel loop. The body must only write state owned by its
// own index; cross-index reductions are summed by the caller in index order
// so results do not depend on the thread count.
template <class F>
void parallel_for(Index n, F&& fn) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (Index i = 0; i < n; ++i) fn(i);
#else
  for (Index i = 0; i < n; ++i) fn(i);
#endif
}

// Serial twin of parallel_for, kept as the reference path for equality tests
// and benchmarks.
template <class F>
void serial_for(Index n, F&& fn) {
  for (Index i = 0; i < n; ++i) fn(i);
}

}  // namespace mocap
