// Scalar reference kernels vs whichever vectorized tables this host supports.

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "pee/kernels.hpp"

namespace {

using pee::kernels::KernelTable;

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-2.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a)); }

void check_equivalent(const KernelTable& simd) {
  const KernelTable& ref = pee::kernels::scalar_table();
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 9u, 16u, 31u, 64u, 67u}) {
    const auto x = random_vec(n, rng);
    const auto y = random_vec(n, rng);
    CHECK(close(ref.dot(x.data(), y.data(), n), simd.dot(x.data(), y.data(), n)));

    auto y1 = y;
    auto y2 = y;
    ref.axpy(0.37, x.data(), y1.data(), n);
    simd.axpy(0.37, x.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(close(y1[i], y2[i]));
  }
  for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{1, 1}, {3, 5}, {8, 4}, {13, 17}, {5, 33}}) {
    const auto a = random_vec(rows * cols, rng);
    const auto xc = random_vec(cols, rng);
    const auto xr = random_vec(rows, rng);

    for (bool acc : {false, true}) {
      std::vector<double> o1(rows, 0.5), o2(rows, 0.5);
      ref.gemv(a.data(), xc.data(), o1.data(), rows, cols, acc);
      simd.gemv(a.data(), xc.data(), o2.data(), rows, cols, acc);
      for (std::size_t i = 0; i < rows; ++i) CHECK(close(o1[i], o2[i]));
    }

    std::vector<double> t1(cols, 0.25), t2(cols, 0.25);
    ref.gemv_t(a.data(), xr.data(), t1.data(), rows, cols);
    simd.gemv_t(a.data(), xr.data(), t2.data(), rows, cols);
    for (std::size_t i = 0; i < cols; ++i) CHECK(close(t1[i], t2[i]));

    auto g1 = a;
    auto g2 = a;
    ref.ger(xr.data(), xc.data(), g1.data(), rows, cols);
    simd.ger(xr.data(), xc.data(), g2.data(), rows, cols);
    for (std::size_t i = 0; i < g1.size(); ++i) CHECK(close(g1[i], g2[i]));
  }
}

}  // namespace

TEST_CASE("scalar gemv matches hand arithmetic") {
  const KernelTable& ref = pee::kernels::scalar_table();
  const std::vector<double> a{1, 2, 3, 4, 5, 6};  // 2x3
  const std::vector<double> x{1, 0, -1};
  std::vector<double> y(2);
  ref.gemv(a.data(), x.data(), y.data(), 2, 3, false);
  CHECK(y[0] == -2.0);
  CHECK(y[1] == -2.0);
  std::vector<double> t(3, 0.0);
  const std::vector<double> xr{1, 1};
  ref.gemv_t(a.data(), xr.data(), t.data(), 2, 3);
  CHECK(t == std::vector<double>{5, 7, 9});
}

TEST_CASE("avx2 kernels are equivalent to scalar") {
  if (const KernelTable* t = pee::kernels::avx2_table()) {
    check_equivalent(*t);
  } else {
    MESSAGE("avx2 not available on this host");
  }
}

TEST_CASE("neon kernels are equivalent to scalar") {
  if (const KernelTable* t = pee::kernels::neon_table()) {
    check_equivalent(*t);
  } else {
    MESSAGE("neon not available on this host");
  }
}

TEST_CASE("active table can be switched") {
  const KernelTable& before = pee::kernels::active();
  pee::kernels::set_active(pee::kernels::scalar_table());
  CHECK(pee::kernels::active().name == "scalar");
  pee::kernels::set_active(before);
  CHECK(pee::kernels::active().name == before.name);
}
