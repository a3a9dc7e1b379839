#include "pee/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define PEE_HAVE_X86 1
#include <immintrin.h>
#else
#define PEE_HAVE_X86 0
#endif

namespace pee::kernels {

#if PEE_HAVE_X86
namespace {

#define PEE_AVX2 __attribute__((target("avx2,fma")))

PEE_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

PEE_AVX2 double avx2_dot(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

PEE_AVX2 void avx2_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d a = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

PEE_AVX2 void avx2_gemv(const double* a, const double* x, double* y, std::size_t rows,
                        std::size_t cols, bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = avx2_dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + v : v;
  }
}

PEE_AVX2 void avx2_gemv_t(const double* a, const double* x, double* y, std::size_t rows,
                          std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) avx2_axpy(x[r], a + r * cols, y, cols);
}

PEE_AVX2 void avx2_ger(const double* x, const double* y, double* a, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) avx2_axpy(x[r], y, a + r * cols, cols);
}

#undef PEE_AVX2

}  // namespace

const KernelTable* avx2_table() {
  static const bool supported = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  static const KernelTable table{"avx2", avx2_dot, avx2_axpy, avx2_gemv, avx2_gemv_t, avx2_ger};
  return supported ? &table : nullptr;
}
#else
const KernelTable* avx2_table() { return nullptr; }
#endif

}  // namespace pee::kernels
