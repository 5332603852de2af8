#include "dirforge/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace dirforge {
namespace {

std::size_t from_env() {
  const char* env = std::getenv("DIRFORGE_THREADS");
  if (env == nullptr) return 1;
  try {
    const long v = std::stol(env);
    return v < 1 ? 1 : static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    return 1;
  }
}

std::atomic<std::size_t>& cap() {
  static std::atomic<std::size_t> value{from_env()};
  return value;
}

constexpr std::size_t kMinWorkPerThread = std::size_t{1} << 21;

}  // namespace

std::size_t thread_count() { return cap().load(); }

void set_thread_count(std::size_t n) { cap().store(std::max<std::size_t>(n, 1)); }

void parallel_rows(std::size_t rows, std::size_t work,
                   const std::function<void(std::size_t, std::size_t)>& fn) {
  std::size_t threads = std::min(thread_count(), rows);
  threads = std::min(threads, std::max<std::size_t>(work / kMinWorkPerThread, 1));
  if (threads <= 1) {
    if (rows > 0) fn(0, rows);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (rows + threads - 1) / threads;
  for (std::size_t t = 1; t < threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(rows, lo + chunk);
    if (lo < hi) pool.emplace_back(fn, lo, hi);
  }
  fn(0, std::min(rows, chunk));
  for (auto& th : pool) th.join();
}

}  // namespace dirforge
