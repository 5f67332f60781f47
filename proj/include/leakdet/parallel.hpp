#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace leakdet::parallel {

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

// Sets the worker count used by every OpenMP region; 0 keeps the runtime default.
inline void set_workers(int workers) {
#ifdef _OPENMP
  if (workers > 0) omp_set_num_threads(workers);
#else
  (void)workers;
#endif
}

}  // namespace leakdet::parallel
