#include "pee/kernels.hpp"

#if defined(__aarch64__)
#include <arm_neon.h>
#endif

namespace pee::kernels {

#if defined(__aarch64__)
namespace {

double neon_dot(const double* x, const double* y, std::size_t n) {
  float64x2_t acc0 = vdupq_n_f64(0.0);
  float64x2_t acc1 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 = vfmaq_f64(acc0, vld1q_f64(x + i), vld1q_f64(y + i));
    acc1 = vfmaq_f64(acc1, vld1q_f64(x + i + 2), vld1q_f64(y + i + 2));
  }
  double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void neon_axpy(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t a = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), a, vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void neon_gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols,
               bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = neon_dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + v : v;
  }
}

void neon_gemv_t(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) neon_axpy(x[r], a + r * cols, y, cols);
}

void neon_ger(const double* x, const double* y, double* a, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) neon_axpy(x[r], y, a + r * cols, cols);
}

}  // namespace

const KernelTable* neon_table() {
  static const KernelTable table{"neon", neon_dot, neon_axpy, neon_gemv, neon_gemv_t, neon_ger};
  return &table;
}
#else
const KernelTable* neon_table() { return nullptr; }
#endif

}  // namespace pee::kernels
