#include "pee/kernels.hpp"

namespace pee::kernels {
namespace {

double scalar_dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void scalar_axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scalar_gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols,
                 bool accumulate) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double v = scalar_dot(a + r * cols, x, cols);
    y[r] = accumulate ? y[r] + v : v;
  }
}

void scalar_gemv_t(const double* a, const double* x, double* y, std::size_t rows,
                   std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) scalar_axpy(x[r], a + r * cols, y, cols);
}

void scalar_ger(const double* x, const double* y, double* a, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) scalar_axpy(x[r], y, a + r * cols, cols);
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{"scalar", scalar_dot, scalar_axpy, scalar_gemv, scalar_gemv_t,
                                 scalar_ger};
  return table;
}

}  // namespace pee::kernels
