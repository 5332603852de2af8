#include <atomic>
#include <cstdlib>
#include <string_view>

#include "dirforge/kernels.hpp"

namespace dirforge::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* detect() {
  const char* env = std::getenv("DIRFORGE_KERNELS");
  if (env != nullptr && std::string_view(env) == "scalar") return &scalar_table();
  const KernelTable* simd = avx2_table();
  if (simd != nullptr && cpu_has_avx2_fma()) return simd;
  return &scalar_table();
}

std::atomic<const KernelTable*> g_forced{nullptr};

}  // namespace

const KernelTable& active() {
  if (const KernelTable* f = g_forced.load(std::memory_order_acquire)) return *f;
  static const KernelTable* detected = detect();
  return *detected;
}

void force(const KernelTable& table) { g_forced.store(&table, std::memory_order_release); }

void reset_selection() { g_forced.store(nullptr, std::memory_order_release); }

}  // namespace dirforge::kernels
