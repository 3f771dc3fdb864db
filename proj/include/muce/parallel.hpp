// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace muce {

// Worker count: MUCE_THREADS environment variable when set (>= 1),
// otherwise the hardware concurrency.
int thread_count();

// Runs fn(0..count-1) across `threads` workers (dynamic scheduling). The
// first exception thrown by any item is rethrown after all workers join.
void parallel_for(int count, const std::function<void(int)>& fn,
                  int threads = 0);

}  // namespace muce
