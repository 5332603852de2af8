#pragma once

#include <cstddef>
#include <string_view>

namespace dirforge::kernels {

// C[m x n] += A[m x k] * B[k x n].
// A element (i, p) lives at a[i * a_row + p * a_col], so a transposed view
// is just a stride swap. B and C are row-major with leading dims ldb / ldc.
// Every output row is accumulated over p in ascending order, so a row's bits
// never depend on how many other rows share the call.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k,
                        const double* a, std::size_t a_row, std::size_t a_col,
                        const double* b, std::size_t ldb,
                        double* c, std::size_t ldc);
using DotFn = double (*)(const double* x, const double* y, std::size_t n);
using AxpyFn = void (*)(double alpha, const double* x, double* y, std::size_t n);
using SumFn = double (*)(const double* x, std::size_t n);
using BinaryFn = void (*)(const double* x, const double* y, double* out, std::size_t n);

struct KernelTable {
  std::string_view name;
  GemmFn gemm;
  DotFn dot;
  AxpyFn axpy;
  SumFn sum;
  SumFn sum_sq;
  BinaryFn add;
  BinaryFn sub;
  BinaryFn mul;
};

const KernelTable& scalar_table();
// nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

// Selected once: AVX2+FMA when the CPU reports both, scalar otherwise.
// DIRFORGE_KERNELS=scalar forces the reference path.
const KernelTable& active();

// Overrides the runtime choice; used by equivalence tests and benchmarks.
void force(const KernelTable& table);
void reset_selection();

}  // namespace dirforge::kernels
