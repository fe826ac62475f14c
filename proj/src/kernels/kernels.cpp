#include "glee/kernels/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <vector>

namespace glee::kernels {

namespace {

float dot_scalar(const float* a, const float* b, std::size_t n) {
  float acc = 0.0f;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(float alpha, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_acc_scalar(std::size_t m, std::size_t n, std::size_t k, const float* a,
                     std::ptrdiff_t a_rs, std::ptrdiff_t a_cs, const float* b,
                     std::size_t ldb, float* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    float* crow = c + i * ldc;
    const float* arow = a + static_cast<std::ptrdiff_t>(i) * a_rs;
    for (std::size_t p = 0; p < k; ++p) {
      const float aip = arow[static_cast<std::ptrdiff_t>(p) * a_cs];
      const float* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

const KernelTable kScalar{Isa::scalar, &dot_scalar, &axpy_scalar, &gemm_acc_scalar};

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("GLEE_KERNELS")) {
    if (std::string(env) == "scalar") return &kScalar;
  }
  if (detail::avx2_table() != nullptr && cpu_has_avx2()) return detail::avx2_table();
  return &kScalar;
}

const KernelTable*& current() {
  static const KernelTable* tbl = initial_table();
  return tbl;
}

}  // namespace

const KernelTable& detail::scalar_table() { return kScalar; }

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
  }
  return "unknown";
}

bool supported(Isa isa) {
  if (isa == Isa::scalar) return true;
  return detail::avx2_table() != nullptr && cpu_has_avx2();
}

const KernelTable& table(Isa isa) {
  if (!supported(isa)) {
    throw std::runtime_error("kernel set not supported on this CPU: " +
                             std::string(isa_name(isa)));
  }
  return isa == Isa::scalar ? kScalar : *detail::avx2_table();
}

const KernelTable& active() { return *current(); }

void select(Isa isa) { current() = &table(isa); }

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c) {
  active().gemm_acc(m, n, k, a, static_cast<std::ptrdiff_t>(k), 1, b, n, c, n);
}

void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c) {
  active().gemm_acc(m, n, k, a, 1, static_cast<std::ptrdiff_t>(m), b, n, c, n);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const float* a,
             const float* b, float* c) {
  // Transpose B once so the inner loop runs along contiguous rows.
  thread_local std::vector<float> bt;
  bt.resize(k * n);
  for (std::size_t j = 0; j < n; ++j) {
    const float* brow = b + j * k;
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = brow[p];
  }
  active().gemm_acc(m, n, k, a, static_cast<std::ptrdiff_t>(k), 1, bt.data(), n, c, n);
}

}  // namespace glee::kernels
