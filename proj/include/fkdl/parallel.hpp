#pragma once

#include <functional>

namespace fkdl {

// Worker count from FKDL_WORKERS (default 1).
int default_workers();

// Runs f(0..n-1) on up to `workers` threads. Results must be written to
// per-index slots so the outcome does not depend on the worker count.
void parallel_for(int n, const std::function<void(int)>& f, int workers = default_workers());

}  // namespace fkdl
