#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace dcopt {

/// Worker threads for scenario-parallel loops: DCOPT_WORKERS when set to a
/// positive integer, otherwise the hardware concurrency.
std::size_t worker_count();

/// Runs body(i) for i in [0, n) on up to `workers` threads (0 means
/// worker_count()). Each index runs exactly once. If any call throws, the
/// exception from the lowest failing index is rethrown after all threads join.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body, std::size_t workers = 0);

}  // namespace dcopt
