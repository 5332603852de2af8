#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dirforge {

std::uint64_t splitmix64(std::uint64_t x);

// Seeded stream. The engine is std::mt19937_64; uniform and normal
// transforms are written out here rather than taken from <random>
// distributions, whose outputs differ between standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Integer in [0, n).
  std::size_t below(std::size_t n);
  // Integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller; the second value of each pair is cached.
  double normal();
  void fill_normal(double* out, std::size_t n);
  std::vector<double> normals(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dirforge
