#pragma once

#include <cstddef>

namespace lyap::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void scale_scalar(double alpha, double* x, std::size_t n);
void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger_scalar(double alpha, const double* x, const double* y, double* a, std::size_t rows,
                std::size_t cols);

#if defined(__x86_64__) || defined(_M_X64)
#define LYAP_HAVE_AVX2_KERNELS 1
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void scale_avx2(double alpha, double* x, std::size_t n);
void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger_avx2(double alpha, const double* x, const double* y, double* a, std::size_t rows,
              std::size_t cols);
#endif

}  // namespace lyap::kernels::detail
