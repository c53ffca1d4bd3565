#pragma once

#include <cstdint>

namespace ergo {

// Resolve the worker count for a parallel section:
//   requested > 0  -> requested
//   requested == 0 -> ERGO_JOBS env var if set, else OpenMP's default
int resolve_jobs(int requested = 0);

// Static-schedule parallel loop over [0, n). Each index writes only its own
// slot of preallocated output, so results are identical for any job count.
// With jobs <= 1 this is a plain serial loop (the reference path).
template <typename Fn>
void parallel_for(std::int64_t n, int jobs, Fn&& fn) {
    if (jobs > 1) {
#pragma omp parallel for schedule(static) num_threads(jobs)
        for (std::int64_t i = 0; i < n; ++i) fn(i);
    } else {
        for (std::int64_t i = 0; i < n; ++i) fn(i);
    }
}

}  // namespace ergo
