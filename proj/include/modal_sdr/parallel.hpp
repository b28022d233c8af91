#pragma once

#include <cstddef>
#include <functional>

namespace modal_sdr {

/// Worker count from MODAL_SDR_THREADS, else the hardware concurrency.
int default_thread_count();

/// Calls body(i) for i in [0, count) on up to `threads` workers (0 means the
/// default). Each index runs exactly once; the first exception thrown by any
/// body is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& body);

}  // namespace modal_sdr
