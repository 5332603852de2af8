#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dirforge/kernels.hpp"
#include "dirforge/rng.hpp"

using namespace dirforge;

namespace {

std::vector<double> rand_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

class KernelEquivalence : public ::testing::Test {
 protected:
  void SetUp() override {
    simd = kernels::avx2_table();
    if (!simd) GTEST_SKIP() << "no AVX2/FMA on this machine";
  }
  const kernels::KernelTable* simd = nullptr;
  const kernels::KernelTable& ref = kernels::scalar_table();
};

TEST_F(KernelEquivalence, GemmMatchesScalarOnAwkwardShapes) {
  Rng rng(1);
  for (std::size_t m : {1u, 3u, 4u, 5u, 17u})
    for (std::size_t n : {1u, 7u, 12u, 13u, 40u})
      for (std::size_t k : {1u, 2u, 9u, 64u}) {
        const auto a = rand_vec(rng, m * k), b = rand_vec(rng, k * n), c0 = rand_vec(rng, m * n);
        auto c1 = c0, c2 = c0;
        ref.gemm(m, n, k, a.data(), k, 1, b.data(), n, c1.data(), n);
        simd->gemm(m, n, k, a.data(), k, 1, b.data(), n, c2.data(), n);
        for (std::size_t i = 0; i < m * n; ++i) ASSERT_LT(rel(c1[i], c2[i]), 1e-13) << m << "x" << n << "x" << k;
        // Transposed A through strides.
        auto c3 = c0, c4 = c0;
        ref.gemm(m, n, k, a.data(), 1, m, b.data(), n, c3.data(), n);
        simd->gemm(m, n, k, a.data(), 1, m, b.data(), n, c4.data(), n);
        for (std::size_t i = 0; i < m * n; ++i) ASSERT_LT(rel(c3[i], c4[i]), 1e-13);
      }
}

TEST_F(KernelEquivalence, GemmRowsDoNotDependOnBatch) {
  Rng rng(2);
  const std::size_t n = 21, k = 33;
  const auto a = rand_vec(rng, 9 * k), b = rand_vec(rng, k * n);
  std::vector<double> full(9 * n, 0.0), one(n, 0.0);
  simd->gemm(9, n, k, a.data(), k, 1, b.data(), n, full.data(), n);
  simd->gemm(1, n, k, a.data() + 6 * k, k, 1, b.data(), n, one.data(), n);
  for (std::size_t j = 0; j < n; ++j) EXPECT_EQ(full[6 * n + j], one[j]);
}

TEST_F(KernelEquivalence, VectorOpsMatchScalar) {
  Rng rng(3);
  for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 31u, 256u}) {
    const auto x = rand_vec(rng, n), y = rand_vec(rng, n);
    EXPECT_LT(rel(ref.dot(x.data(), y.data(), n), simd->dot(x.data(), y.data(), n)), 1e-13);
    EXPECT_LT(rel(ref.sum(x.data(), n), simd->sum(x.data(), n)), 1e-13);
    EXPECT_LT(rel(ref.sum_sq(x.data(), n), simd->sum_sq(x.data(), n)), 1e-13);
    auto a1 = y, a2 = y;
    ref.axpy(0.37, x.data(), a1.data(), n);
    simd->axpy(0.37, x.data(), a2.data(), n);
    std::vector<double> s1(n), s2(n), d1(n), d2(n), m1(n), m2(n);
    ref.add(x.data(), y.data(), s1.data(), n);
    simd->add(x.data(), y.data(), s2.data(), n);
    ref.sub(x.data(), y.data(), d1.data(), n);
    simd->sub(x.data(), y.data(), d2.data(), n);
    ref.mul(x.data(), y.data(), m1.data(), n);
    simd->mul(x.data(), y.data(), m2.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_LT(rel(a1[i], a2[i]), 1e-15);
      EXPECT_EQ(s1[i], s2[i]);
      EXPECT_EQ(d1[i], d2[i]);
      EXPECT_EQ(m1[i], m2[i]);
    }
  }
}

TEST(KernelDispatch, ForceSelectsTable) {
  kernels::force(kernels::scalar_table());
  EXPECT_EQ(&kernels::active(), &kernels::scalar_table());
  kernels::reset_selection();
  if (kernels::avx2_table()) EXPECT_EQ(&kernels::active(), kernels::avx2_table());
}
