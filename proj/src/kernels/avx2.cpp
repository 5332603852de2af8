#include "dirforge/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define DIRFORGE_HAVE_AVX2 1
#include <immintrin.h>
#endif

namespace dirforge::kernels {

#ifdef DIRFORGE_HAVE_AVX2
namespace {

#define DF_TARGET __attribute__((target("avx2,fma")))

// 4 rows x 12 columns of C held in 12 registers; k innermost.
DF_TARGET void block_4x12(std::size_t k, const double* a, std::size_t a_row, std::size_t a_col,
                          const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  __m256d acc[4][3];
  for (int r = 0; r < 4; ++r)
    for (int q = 0; q < 3; ++q) acc[r][q] = _mm256_loadu_pd(c + r * ldc + 4 * q);
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    const __m256d b2 = _mm256_loadu_pd(brow + 8);
    for (int r = 0; r < 4; ++r) {
      const __m256d av = _mm256_broadcast_sd(a + r * a_row + p * a_col);
      acc[r][0] = _mm256_fmadd_pd(av, b0, acc[r][0]);
      acc[r][1] = _mm256_fmadd_pd(av, b1, acc[r][1]);
      acc[r][2] = _mm256_fmadd_pd(av, b2, acc[r][2]);
    }
  }
  for (int r = 0; r < 4; ++r)
    for (int q = 0; q < 3; ++q) _mm256_storeu_pd(c + r * ldc + 4 * q, acc[r][q]);
}

// One row, columns [j0, n): 4-wide vectors then a scalar tail.
DF_TARGET void row_tail(std::size_t j0, std::size_t n, std::size_t k, const double* a,
                        std::size_t a_col, const double* b, std::size_t ldb, double* c) {
  std::size_t j = j0;
  for (; j + 4 <= n; j += 4) {
    __m256d acc = _mm256_loadu_pd(c + j);
    for (std::size_t p = 0; p < k; ++p)
      acc = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * a_col), _mm256_loadu_pd(b + p * ldb + j), acc);
    _mm256_storeu_pd(c + j, acc);
  }
  for (; j < n; ++j) {
    double acc = c[j];
    for (std::size_t p = 0; p < k; ++p) acc = __builtin_fma(a[p * a_col], b[p * ldb + j], acc);
    c[j] = acc;
  }
}

DF_TARGET void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
                         std::size_t a_row, std::size_t a_col, const double* b, std::size_t ldb,
                         double* c, std::size_t ldc) {
  const std::size_t n12 = n - n % 12;
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    for (std::size_t j = 0; j < n12; j += 12)
      block_4x12(k, a + i * a_row, a_row, a_col, b + j, ldb, c + i * ldc + j, ldc);
    if (n12 < n)
      for (std::size_t r = 0; r < 4; ++r)
        row_tail(n12, n, k, a + (i + r) * a_row, a_col, b, ldb, c + (i + r) * ldc);
  }
  for (; i < m; ++i) row_tail(0, n, k, a + i * a_row, a_col, b, ldb, c + i * ldc);
}

DF_TARGET double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

DF_TARGET double dot_avx2(const double* x, const double* y, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

DF_TARGET void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

DF_TARGET double sum_avx2(const double* x, std::size_t n) {
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    a0 = _mm256_add_pd(a0, _mm256_loadu_pd(x + i));
    a1 = _mm256_add_pd(a1, _mm256_loadu_pd(x + i + 4));
  }
  double s = hsum(_mm256_add_pd(a0, a1));
  for (; i < n; ++i) s += x[i];
  return s;
}

DF_TARGET double sum_sq_avx2(const double* x, std::size_t n) { return dot_avx2(x, x, n); }

DF_TARGET void add_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

DF_TARGET void sub_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] - y[i];
}

DF_TARGET void mul_avx2(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

#undef DF_TARGET

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable table{"avx2",      gemm_avx2, dot_avx2, axpy_avx2, sum_avx2,
                                 sum_sq_avx2, add_avx2,  sub_avx2, mul_avx2};
  return &table;
}

#else

const KernelTable* avx2_table() { return nullptr; }

#endif

}  // namespace dirforge::kernels
