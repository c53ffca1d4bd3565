#include "ergo/parallel.hpp"

#include <omp.h>

#include <cstdlib>

namespace ergo {

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("ERGO_JOBS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    return omp_get_max_threads();
}

}  // namespace ergo
