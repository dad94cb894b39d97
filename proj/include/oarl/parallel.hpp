#pragma once

#include <cstddef>
#include <functional>

namespace oarl {

// Worker count for data-parallel loops. Defaults to hardware_concurrency,
// overridable with OARL_THREADS.
size_t worker_count();

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
// depend only on n and chunk_size, never on the worker count, so per-chunk
// reductions merged in chunk order are deterministic no matter how many
// threads execute them.
void parallel_for_chunks(size_t n, size_t chunk_size, const std::function<void(size_t, size_t)>& fn);

}  // namespace oarl
