#pragma once
// Dense double-precision kernels behind every tensor primitive.
//
// Each kernel has a scalar reference implementation plus vectorized variants
// (AVX2+FMA on x86-64, NEON on aarch64). The variant is picked once at
// startup from CPU feature detection; PEE_KERNELS=scalar forces the
// reference path. All matrices are row-major.

#include <cstddef>
#include <string_view>

namespace pee::kernels {

struct KernelTable {
  std::string_view name;

  // sum_i x[i] * y[i]
  double (*dot)(const double* x, const double* y, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y[r] (+)= sum_c A[r, c] * x[c], A is rows x cols
  void (*gemv)(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols,
               bool accumulate);
  // y[c] += sum_r A[r, c] * x[r], A is rows x cols
  void (*gemv_t)(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
  // A[r, c] += x[r] * y[c]
  void (*ger)(const double* x, const double* y, double* a, std::size_t rows, std::size_t cols);
};

const KernelTable& scalar_table();
// nullptr when the build or the host lacks the instruction set.
const KernelTable* avx2_table();
const KernelTable* neon_table();

// The table selected for this process.
const KernelTable& active();

// Overrides the process-wide selection. Intended for tests and benchmarks.
void set_active(const KernelTable& table);

inline double dot(const double* x, const double* y, std::size_t n) { return active().dot(x, y, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) {
  active().axpy(alpha, x, y, n);
}
inline void gemv(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols,
                 bool accumulate = false) {
  active().gemv(a, x, y, rows, cols, accumulate);
}
inline void gemv_t(const double* a, const double* x, double* y, std::size_t rows,
                   std::size_t cols) {
  active().gemv_t(a, x, y, rows, cols);
}
inline void ger(const double* x, const double* y, double* a, std::size_t rows, std::size_t cols) {
  active().ger(x, y, a, rows, cols);
}

}  // namespace pee::kernels
