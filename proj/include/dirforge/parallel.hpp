#pragma once

#include <cstddef>
#include <functional>

namespace dirforge {

// Worker cap from DIRFORGE_THREADS (default 1, minimum 1).
std::size_t thread_count();
void set_thread_count(std::size_t n);

// Splits [0, rows) into contiguous chunks across threads when `work` (a rough
// multiply-add count) is large enough to amortize thread start-up. Callers
// must only write rows inside their chunk.
void parallel_rows(std::size_t rows, std::size_t work,
                   const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace dirforge
