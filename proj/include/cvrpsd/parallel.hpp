#pragma once

#include <omp.h>

namespace cvrpsd {

/// Worker count used when a caller passes 0: the OpenMP default.
inline int max_workers() { return omp_get_max_threads(); }

inline int resolve_workers(int requested) { return requested > 0 ? requested : max_workers(); }

}  // namespace cvrpsd
