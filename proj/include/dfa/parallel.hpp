#pragma once

#include <functional>

namespace dfa {

// Calls task(0..n-1) on up to `workers` threads. The first exception thrown by
// a task (lowest index) is rethrown after all threads join.
void parallel_for(int n, int workers, const std::function<void(int)>& task);

// Worker count from DFA_WORKERS, else the hardware concurrency (at least 1).
int default_workers();

}  // namespace dfa
