#pragma once

// Dense float kernels used by the network layers. Every kernel has a scalar
// reference implementation and, on x86-64, an AVX2+FMA variant. The variant
// is picked once at startup from CPUID; GLEE_KERNELS=scalar forces the
// reference path.

#include <cstddef>
#include <string_view>

namespace glee::kernels {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  float (*dot)(const float* a, const float* b, std::size_t n);

  // y += alpha * x
  void (*axpy)(float alpha, const float* x, float* y, std::size_t n);

  // C[m x n] += A[m x k] * B[k x n]. A is addressed through explicit row and
  // column strides so a transposed view needs no copy; B and C are row-major
  // with leading dimensions ldb / ldc.
  void (*gemm_acc)(std::size_t m, std::size_t n, std::size_t k, const float* a,
                   std::ptrdiff_t a_row_stride, std::ptrdiff_t a_col_stride,
                   const float* b, std::size_t ldb, float* c, std::size_t ldc);
};

bool supported(Isa isa);
const KernelTable& table(Isa isa);

// Kernel table used by the library.
const KernelTable& active();

// Switch the active table (tests, benchmarking). Throws if unsupported.
void select(Isa isa);

// Row-major convenience wrappers over the active table.

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c);
// C[m x n] += A^T * B with A stored [k x m]
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c);
// C[m x n] += A * B^T with B stored [n x k]
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c);

namespace detail {
const KernelTable& scalar_table();
const KernelTable* avx2_table();  // nullptr when not compiled in
}  // namespace detail

}  // namespace glee::kernels
