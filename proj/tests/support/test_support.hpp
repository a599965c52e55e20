#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "lyap/cells.hpp"
#include "lyap/matrix.hpp"

namespace lyap::testing {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("lyap-test-" + std::to_string(std::random_device{}()) + "-" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng,
                            double scale = 1.0) {
  Matrix m(r, c);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& x : m.values()) x = u(rng);
  return m;
}

// Central-difference Jacobian in the J(i, j) = d f_j / d x_i convention.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                          double eps = 1e-5) {
  const std::size_t n = x.size();
  const std::size_t m = f(x).size();
  Matrix j(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    Vector xp = x, xm = x;
    xp[i] += eps;
    xm[i] -= eps;
    const Vector fp = f(xp), fm = f(xm);
    for (std::size_t k = 0; k < m; ++k) j(i, k) = (fp[k] - fm[k]) / (2.0 * eps);
  }
  return j;
}

// max |a - b| / max |b|
inline double max_rel_error(const Matrix& a, const Matrix& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a.values()[i] - b.values()[i]));
    den = std::max(den, std::abs(b.values()[i]));
  }
  return den == 0.0 ? num : num / den;
}

inline double max_rel_error(const Vector& a, const Vector& b) {
  Matrix ma(1, a.size()), mb(1, b.size());
  ma.values() = a;
  mb.values() = b;
  return max_rel_error(ma, mb);
}

inline Cell zero_cell(CellSpec spec) { return Cell(spec, param_layout(spec)); }

}  // namespace lyap::testing
