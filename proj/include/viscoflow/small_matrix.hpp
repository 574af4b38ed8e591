#pragma once

#include <Eigen/Core>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <array>
#include <cmath>
#include <stdexcept>

namespace viscoflow {

// Small dense matrices/vectors with runtime dimension d <= 3, stack allocated.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 3, 3>;
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 3, 1>;

inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }

inline double frobenius_dot(const Mat& a, const Mat& b) {
  return (a.array() * b.array()).sum();
}

/// Cofactor matrix, cof(F)_{ij} = d(det F)/dF_{ij}. Polynomial in F, valid for
/// singular F as well.
Mat cofactor(const Mat& f);

/// Directional derivative of the cofactor map at f in direction h.
Mat cofactor_derivative(const Mat& f, const Mat& h);

/// Third-order array, entry (i,j,k) with i the vector component and (j,k) the
/// two derivative directions. Placeholder for second gradients.
struct Tensor3 {
  int d = 0;
  std::array<double, 27> a{};

  Tensor3() = default;
  explicit Tensor3(int dim) : d(dim) { a.fill(0.0); }

  double& operator()(int i, int j, int k) { return a[(i * d + j) * d + k]; }
  double operator()(int i, int j, int k) const { return a[(i * d + j) * d + k]; }

  int size() const { return d * d * d; }
  double squared_norm() const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += a[i] * a[i];
    return s;
  }
  double norm() const { return std::sqrt(squared_norm()); }
  double dot(const Tensor3& o) const {
    double s = 0.0;
    for (int i = 0; i < size(); ++i) s += a[i] * o.a[i];
    return s;
  }
  Tensor3& operator+=(const Tensor3& o) {
    for (int i = 0; i < size(); ++i) a[i] += o.a[i];
    return *this;
  }
  Tensor3& operator-=(const Tensor3& o) {
    for (int i = 0; i < size(); ++i) a[i] -= o.a[i];
    return *this;
  }
  Tensor3& operator*=(double c) {
    for (int i = 0; i < size(); ++i) a[i] *= c;
    return *this;
  }
  friend Tensor3 operator*(double c, Tensor3 t) { return t *= c; }
  friend Tensor3 operator+(Tensor3 l, const Tensor3& r) { return l += r; }
  friend Tensor3 operator-(Tensor3 l, const Tensor3& r) { return l -= r; }
};

/// Fourth-order tensor acting on matrices, entry (i,j,k,l).
struct Tensor4 {
  int d = 0;
  std::array<double, 81> a{};

  Tensor4() = default;
  explicit Tensor4(int dim) : d(dim) { a.fill(0.0); }

  double& operator()(int i, int j, int k, int l) {
    return a[((i * d + j) * d + k) * d + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return a[((i * d + j) * d + k) * d + l];
  }

  // Contraction over the trailing index pair: (T m)_{ij} = T_{ijkl} m_{kl}.
  Mat apply(const Mat& m) const {
    Mat out = Mat::Zero(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double s = 0.0;
        for (int k = 0; k < d; ++k)
          for (int l = 0; l < d; ++l) s += (*this)(i, j, k, l) * m(k, l);
        out(i, j) = s;
      }
    return out;
  }
};

struct RotationDistance {
  double distance = 0.0;  // Frobenius distance of F to SO(d)
  Mat nearest;            // the closest rotation
};

/// Distance of F to the rotation group via SVD, with the determinant sign of
/// the factor pair folded into the last singular direction so that the
/// nearest matrix is always a proper rotation.
RotationDistance rotation_distance(const Mat& f);

}  // namespace viscoflow
