#pragma once

#include <cstddef>
#include <functional>

namespace decamp {

// Runs fn(i) for i in [0, n) on a small thread team. Each index is handled by
// exactly one thread with a fixed inner order, so results are bit-identical
// to the serial loop as long as fn writes only index-local output.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

// Thread count used by parallel_for (hardware concurrency, overridable via
// the DECAMP_THREADS environment variable).
unsigned thread_count();

}  // namespace decamp
