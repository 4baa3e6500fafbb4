// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace mixbit {

// Kernel thread cap. Defaults to MIXBIT_THREADS from the environment, else 1.
int thread_count();
void set_thread_count(int n);

// Runs fn(i) for i in [0, n), partitioned into contiguous chunks across
// thread_count() threads. Each index is processed by exactly one thread, so
// callers that write disjoint outputs per index stay deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

} // namespace mixbit
