#include <random>

#include "doctest.h"
#include "lyap/kernels.hpp"
#include "test_support.hpp"

using namespace lyap;
using lyap::kernels::KernelTable;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

void check_equivalent(const KernelTable& simd, const KernelTable& ref, std::size_t rows,
                      std::size_t cols, std::mt19937_64& rng) {
  const Matrix a = testing::random_matrix(rows, cols, rng);
  const Vector x = testing::random_vector(cols, rng);
  const Vector xr = testing::random_vector(rows, rng);

  CHECK(rel(simd.dot(x.data(), x.data(), cols), ref.dot(x.data(), x.data(), cols)) < 1e-13);

  Vector y1 = xr, y2 = xr;
  simd.axpy(0.37, xr.data(), y1.data(), rows);
  ref.axpy(0.37, xr.data(), y2.data(), rows);
  CHECK(testing::max_rel_error(y1, y2) < 1e-14);

  simd.scale(-1.7, y1.data(), rows);
  ref.scale(-1.7, y2.data(), rows);
  CHECK(testing::max_rel_error(y1, y2) < 1e-14);

  Vector g1(rows), g2(rows);
  simd.gemv(a.data(), rows, cols, x.data(), g1.data());
  ref.gemv(a.data(), rows, cols, x.data(), g2.data());
  CHECK(testing::max_rel_error(g1, g2) < 1e-13);

  Vector t1(cols), t2(cols);
  simd.gemv_t(a.data(), rows, cols, xr.data(), t1.data());
  ref.gemv_t(a.data(), rows, cols, xr.data(), t2.data());
  CHECK(testing::max_rel_error(t1, t2) < 1e-13);

  Matrix m1 = a, m2 = a;
  simd.ger(0.5, xr.data(), x.data(), m1.data(), rows, cols);
  ref.ger(0.5, xr.data(), x.data(), m2.data(), rows, cols);
  CHECK(testing::max_rel_error(m1, m2) < 1e-14);
}

}  // namespace

TEST_CASE("scalar kernels match naive loops") {
  const auto& s = kernels::scalar_table();
  const Vector a{1, 2, 3}, b{4, 5, 6};
  CHECK(s.dot(a.data(), b.data(), 3) == 32.0);
  Matrix m(2, 3);
  m.values() = {1, 2, 3, 4, 5, 6};
  Vector y(2);
  s.gemv(m.data(), 2, 3, a.data(), y.data());
  CHECK(y == Vector{14, 32});
  Vector yt(3);
  s.gemv_t(m.data(), 2, 3, Vector{1, -1}.data(), yt.data());
  CHECK(yt == Vector{-3, -3, -3});
}

TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
  const KernelTable* simd = kernels::avx2_table();
  if (simd == nullptr) {
    MESSAGE("AVX2 unavailable on this CPU; equivalence check skipped");
    return;
  }
  std::mt19937_64 rng(7);
  // Sizes straddle the 4- and 8-wide unrolls and their tails.
  for (std::size_t rows : {1u, 3u, 4u, 5u, 8u, 13u, 64u, 101u})
    for (std::size_t cols : {1u, 2u, 4u, 7u, 8u, 9u, 33u, 128u})
      check_equivalent(*simd, kernels::scalar_table(), rows, cols, rng);
}

TEST_CASE("backend selection") {
  const auto before = kernels::active().backend;
  kernels::set_backend(kernels::Backend::Scalar);
  CHECK(kernels::active().backend == kernels::Backend::Scalar);
  if (kernels::backend_available(kernels::Backend::Avx2)) {
    kernels::set_backend(kernels::Backend::Avx2);
    CHECK(kernels::active().backend == kernels::Backend::Avx2);
  } else {
    CHECK_THROWS_AS(kernels::set_backend(kernels::Backend::Avx2), ContractError);
  }
  kernels::set_backend(before);
}
