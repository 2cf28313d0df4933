#pragma once

#include <cstddef>
#include <functional>

namespace allwas {

/// Worker count: ALLWAS_THREADS when set and positive, else hardware concurrency.
std::size_t thread_budget();

/// Runs body(i) for i in [0, n) over up to thread_budget() threads in
/// contiguous chunks. Calls nested inside a parallel region run serially.
/// The first exception thrown by any body is rethrown on the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

}  // namespace allwas
