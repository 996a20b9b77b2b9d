#pragma once

#include <cstdint>

#include "percolab/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace percolab {

// Replica loops: fn(replica_index, rng) writes any output into slots owned by
// the replica, and reductions happen afterwards in replica order. Replicas
// draw from disjoint RNG streams keyed by (seed, replica), so the parallel
// loop and the serial reference below produce bit-identical slot contents for
// any worker count.
template <class Fn>
void for_each_replica_serial(std::uint64_t n, std::uint64_t seed, Fn&& fn) {
  for (std::uint64_t i = 0; i < n; ++i) {
    Rng rng(seed, i);
    fn(i, rng);
  }
}

template <class Fn>
void for_each_replica(std::uint64_t n, std::uint64_t seed, int workers, Fn&& fn) {
#ifdef _OPENMP
  if (workers > 1) {
#pragma omp parallel for schedule(dynamic, 8) num_threads(workers)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
      Rng rng(seed, static_cast<std::uint64_t>(i));
      fn(static_cast<std::uint64_t>(i), rng);
    }
    return;
  }
#endif
  for_each_replica_serial(n, seed, fn);
}

}  // namespace percolab
