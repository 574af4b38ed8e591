#include "viscoflow/small_matrix.hpp"

namespace viscoflow {

Mat cofactor(const Mat& f) {
  const int d = static_cast<int>(f.rows());
  Mat c = Mat::Zero(d, d);
  switch (d) {
    case 1:
      c(0, 0) = 1.0;
      break;
    case 2:
      c(0, 0) = f(1, 1);
      c(0, 1) = -f(1, 0);
      c(1, 0) = -f(0, 1);
      c(1, 1) = f(0, 0);
      break;
    case 3:
      for (int j = 0; j < 3; ++j) {
        const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
        c(0, j) = f(1, j1) * f(2, j2) - f(1, j2) * f(2, j1);
        c(1, j) = f(2, j1) * f(0, j2) - f(2, j2) * f(0, j1);
        c(2, j) = f(0, j1) * f(1, j2) - f(0, j2) * f(1, j1);
      }
      break;
    default:
      throw std::invalid_argument("cofactor: dimension must be 1, 2 or 3");
  }
  return c;
}

Mat cofactor_derivative(const Mat& f, const Mat& h) {
  const int d = static_cast<int>(f.rows());
  switch (d) {
    case 1:
      return Mat::Zero(1, 1);
    case 2:
      return cofactor(h);  // cofactor is linear in two dimensions
    case 3: {
      Mat c = Mat::Zero(3, 3);
      for (int j = 0; j < 3; ++j) {
        const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
        c(0, j) = h(1, j1) * f(2, j2) + f(1, j1) * h(2, j2) - h(1, j2) * f(2, j1) -
                  f(1, j2) * h(2, j1);
        c(1, j) = h(2, j1) * f(0, j2) + f(2, j1) * h(0, j2) - h(2, j2) * f(0, j1) -
                  f(2, j2) * h(0, j1);
        c(2, j) = h(0, j1) * f(1, j2) + f(0, j1) * h(1, j2) - h(0, j2) * f(1, j1) -
                  f(0, j2) * h(1, j1);
      }
      return c;
    }
    default:
      throw std::invalid_argument("cofactor_derivative: dimension must be 1, 2 or 3");
  }
}

RotationDistance rotation_distance(const Mat& f) {
  const int d = static_cast<int>(f.rows());
  if (d < 1 || d > 3 || f.cols() != d)
    throw std::invalid_argument("rotation_distance: dimension must be 1, 2 or 3");
  if (!f.allFinite()) throw std::invalid_argument("rotation_distance: non-finite input");

  RotationDistance out;
  if (d == 1) {
    out.nearest = Mat::Ones(1, 1);
    out.distance = std::abs(f(0, 0) - 1.0);
    return out;
  }

  Eigen::JacobiSVD<Mat> svd(f, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat u = svd.matrixU();
  Mat v = svd.matrixV();
  Vec sigma = svd.singularValues();
  // Fold an improper factor pair into the weakest singular direction.
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(d - 1) *= -1.0;
    sigma(d - 1) *= -1.0;
  }
  out.nearest = u * v.transpose();
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += (sigma(i) - 1.0) * (sigma(i) - 1.0);
  out.distance = std::sqrt(s);
  return out;
}

}  // namespace viscoflow
