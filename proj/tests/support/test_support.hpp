#pragma once

#include "viscoflow/grid.hpp"
#include "viscoflow/small_matrix.hpp"

#include <cmath>
#include <functional>
#include <random>

namespace viscoflow::testing {

inline std::mt19937& rng() {
  static std::mt19937 gen(0x5eed2024u);
  return gen;
}

inline double uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng());
}

inline Mat random_matrix(int d, double scale = 1.0) {
  Mat m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = uniform(-scale, scale);
  return m;
}

inline Mat random_symmetric(int d, double scale = 1.0) {
  const Mat m = random_matrix(d, scale);
  return 0.5 * (m + m.transpose());
}

inline Mat random_rotation(int d) {
  if (d == 1) return Mat::Ones(1, 1);
  if (d == 2) {
    const double a = uniform(-3.2, 3.2);
    Mat q(2, 2);
    q << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
    return q;
  }
  // Random axis-angle via normalized quaternion.
  double w = uniform(-1, 1), x = uniform(-1, 1), y = uniform(-1, 1), z = uniform(-1, 1);
  const double n = std::sqrt(w * w + x * x + y * y + z * z);
  w /= n; x /= n; y /= n; z /= n;
  Mat q(3, 3);
  q << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return q;
}

/// Random deformation gradient with determinant in [0.5, 2].
inline Mat random_admissible(int d) {
  for (;;) {
    const Mat f = Mat::Identity(d, d) + random_matrix(d, 0.3);
    const double det = f.determinant();
    if (det >= 0.5 && det <= 2.0) return f;
  }
}

inline Tensor3 random_tensor3(int d, double scale = 1.0) {
  Tensor3 t(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) t(i, j, k) = uniform(-scale, scale);
  return t;
}

/// Central finite difference of a scalar function of a matrix, entrywise.
inline Mat fd_matrix_gradient(const std::function<double(const Mat&)>& f, const Mat& at,
                              double step = 1e-5) {
  const int d = static_cast<int>(at.rows());
  Mat g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Mat hi = at, lo = at;
      hi(i, j) += step;
      lo(i, j) -= step;
      g(i, j) = (f(hi) - f(lo)) / (2.0 * step);
    }
  return g;
}

inline Tensor3 fd_tensor3_gradient(const std::function<double(const Tensor3&)>& f,
                                   const Tensor3& at, double step = 1e-5) {
  Tensor3 g(at.d);
  for (int i = 0; i < at.d; ++i)
    for (int j = 0; j < at.d; ++j)
      for (int k = 0; k < at.d; ++k) {
        Tensor3 hi = at, lo = at;
        hi(i, j, k) += step;
        lo(i, j, k) -= step;
        g(i, j, k) = (f(hi) - f(lo)) / (2.0 * step);
      }
  return g;
}

inline double rel_error(double got, double want) {
  return std::abs(got - want) / std::max(1e-300, std::abs(want));
}

inline double rel_error(const Mat& got, const Mat& want) {
  return (got - want).norm() / std::max(1e-300, want.norm());
}

/// Nodal samples of a smooth closed-form vector field.
inline Field sample_field(std::shared_ptr<const Grid> grid,
                          const std::function<void(const Vec&, double*)>& fn) {
  Field f(grid);
  const int d = grid->dim();
  std::vector<double> vals(d);
  for (int node = 0; node < grid->node_count(); ++node) {
    const Vec x = grid->node_position(node);
    fn(x, vals.data());
    for (int c = 0; c < d; ++c) f.at(node, c) = vals[c];
  }
  return f;
}

/// Random zero-boundary field with entries in [-scale, scale].
inline Field random_interior_field(std::shared_ptr<const Grid> grid, double scale) {
  Field f(grid);
  for (int node : grid->interior_nodes())
    for (int c = 0; c < grid->dim(); ++c) f.at(node, c) = uniform(-scale, scale);
  return f;
}

}  // namespace viscoflow::testing
