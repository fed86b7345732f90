#include "mocap/parallel.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mocap {

namespace {
int g_max_threads = 0;
}

void set_max_threads(int n) { g_max_threads = std::max(0, n); }

int max_threads() {
#ifdef _OPENMP
  if (g_max_threads > 0) return g_max_threads;
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace mocap
