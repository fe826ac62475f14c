// Compiled with -mavx2 -mfma. Only reached through the dispatch table after
// the CPUID check, so nothing here may be called unconditionally.

#include "glee/kernels/kernels.hpp"

#if defined(GLEE_HAVE_AVX2)

#include <immintrin.h>

namespace glee::kernels {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

float dot_avx2(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(float alpha, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// 4 x 16 register block: 8 accumulators, two B loads and one broadcast per k.
inline void block_4x16(std::size_t k, const float* a, std::ptrdiff_t rs, std::ptrdiff_t cs,
                       const float* b, std::size_t ldb, float* c, std::size_t ldc) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  const float* a0 = a;
  const float* a1 = a + rs;
  const float* a2 = a + 2 * rs;
  const float* a3 = a + 3 * rs;
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    const __m256 b0 = _mm256_loadu_ps(brow);
    const __m256 b1 = _mm256_loadu_ps(brow + 8);
    const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(p) * cs;
    __m256 av = _mm256_broadcast_ss(a0 + off);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a1 + off);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a2 + off);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a3 + off);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
  }
  float* r0 = c;
  float* r1 = c + ldc;
  float* r2 = c + 2 * ldc;
  float* r3 = c + 3 * ldc;
  _mm256_storeu_ps(r0, _mm256_add_ps(_mm256_loadu_ps(r0), c00));
  _mm256_storeu_ps(r0 + 8, _mm256_add_ps(_mm256_loadu_ps(r0 + 8), c01));
  _mm256_storeu_ps(r1, _mm256_add_ps(_mm256_loadu_ps(r1), c10));
  _mm256_storeu_ps(r1 + 8, _mm256_add_ps(_mm256_loadu_ps(r1 + 8), c11));
  _mm256_storeu_ps(r2, _mm256_add_ps(_mm256_loadu_ps(r2), c20));
  _mm256_storeu_ps(r2 + 8, _mm256_add_ps(_mm256_loadu_ps(r2 + 8), c21));
  _mm256_storeu_ps(r3, _mm256_add_ps(_mm256_loadu_ps(r3), c30));
  _mm256_storeu_ps(r3 + 8, _mm256_add_ps(_mm256_loadu_ps(r3 + 8), c31));
}

// One row, `width` (< 16) trailing columns handled with masked loads.
inline void row_tail(std::size_t k, const float* a, std::ptrdiff_t cs, const float* b,
                     std::size_t ldb, float* c, std::size_t width) {
  alignas(32) static constexpr int kMaskSrc[16] = {-1, -1, -1, -1, -1, -1, -1, -1,
                                                   0,  0,  0,  0,  0,  0,  0,  0};
  const std::size_t w0 = width < 8 ? width : 8;
  const std::size_t w1 = width - w0;
  const __m256i m0 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskSrc + 8 - w0));
  const __m256i m1 = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(kMaskSrc + 8 - w1));
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(p) * cs);
    acc0 = _mm256_fmadd_ps(av, _mm256_maskload_ps(brow, m0), acc0);
    if (w1 > 0) acc1 = _mm256_fmadd_ps(av, _mm256_maskload_ps(brow + 8, m1), acc1);
  }
  _mm256_maskstore_ps(c, m0, _mm256_add_ps(_mm256_maskload_ps(c, m0), acc0));
  if (w1 > 0) _mm256_maskstore_ps(c + 8, m1, _mm256_add_ps(_mm256_maskload_ps(c + 8, m1), acc1));
}

// One row, full 16-column block.
inline void row_16(std::size_t k, const float* a, std::ptrdiff_t cs, const float* b,
                   std::size_t ldb, float* c) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  for (std::size_t p = 0; p < k; ++p) {
    const float* brow = b + p * ldb;
    const __m256 av = _mm256_broadcast_ss(a + static_cast<std::ptrdiff_t>(p) * cs);
    acc0 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow), acc0);
    acc1 = _mm256_fmadd_ps(av, _mm256_loadu_ps(brow + 8), acc1);
  }
  _mm256_storeu_ps(c, _mm256_add_ps(_mm256_loadu_ps(c), acc0));
  _mm256_storeu_ps(c + 8, _mm256_add_ps(_mm256_loadu_ps(c + 8), acc1));
}

void gemm_acc_avx2(std::size_t m, std::size_t n, std::size_t k, const float* a,
                   std::ptrdiff_t rs, std::ptrdiff_t cs, const float* b, std::size_t ldb,
                   float* c, std::size_t ldc) {
  // Block K so the 16-wide B panel stays cache resident.
  constexpr std::size_t kBlock = 256;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlock) {
    const std::size_t kb = (k - p0) < kBlock ? (k - p0) : kBlock;
    const float* ap = a + static_cast<std::ptrdiff_t>(p0) * cs;
    const float* bp = b + p0 * ldb;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      std::size_t i = 0;
      for (; i + 4 <= m; i += 4) {
        block_4x16(kb, ap + static_cast<std::ptrdiff_t>(i) * rs, rs, cs, bp + j, ldb,
                   c + i * ldc + j, ldc);
      }
      for (; i < m; ++i) {
        row_16(kb, ap + static_cast<std::ptrdiff_t>(i) * rs, cs, bp + j, ldb, c + i * ldc + j);
      }
    }
    if (j < n) {
      for (std::size_t i = 0; i < m; ++i) {
        row_tail(kb, ap + static_cast<std::ptrdiff_t>(i) * rs, cs, bp + j, ldb, c + i * ldc + j,
                 n - j);
      }
    }
  }
}

const KernelTable kAvx2{Isa::avx2, &dot_avx2, &axpy_avx2, &gemm_acc_avx2};

}  // namespace

const KernelTable* detail::avx2_table() { return &kAvx2; }

}  // namespace glee::kernels

#else

namespace glee::kernels {
const KernelTable* detail::avx2_table() { return nullptr; }
}  // namespace glee::kernels

#endif
