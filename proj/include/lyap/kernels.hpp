#pragma once

// Dense inner-loop kernels with a scalar reference path and an AVX2/FMA path.
// The active backend is chosen once at startup from CPU features and may be
// overridden with LYAP_SIMD=scalar|avx2 or set_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace lyap::kernels {

enum class Backend { Scalar, Avx2 };

struct KernelTable {
  Backend backend;
  // sum_i a[i]*b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha*x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  // y = A x, A row-major rows x cols
  void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // y = A^T x, A row-major rows x cols, y has cols entries
  void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
  // a += alpha * x y^T, a row-major rows x cols
  void (*ger)(double alpha, const double* x, const double* y, double* a, std::size_t rows,
              std::size_t cols);
};

const KernelTable& scalar_table();
// nullptr when the CPU lacks AVX2+FMA.
const KernelTable* avx2_table();

const KernelTable& active();
void set_backend(Backend b);
bool backend_available(Backend b);
std::string_view backend_name(Backend b);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void scale(double alpha, std::span<double> x) { active().scale(alpha, x.data(), x.size()); }

}  // namespace lyap::kernels
