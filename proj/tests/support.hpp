#pragma once

#include "varcara/linalg.hpp"
#include "varcara/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace testing {

using varcara::Matrix;
using varcara::Vector;

// Weekly five-index fit used in the empirical study (intercepts, slopes,
// innovation covariance); the last series is the US index.
inline Vector weekly_nu() {
  Vector v(5);
  v << 4.83e-04, 1.20e-03, 6.74e-04, 5.54e-04, 2.79e-05;
  return v;
}

inline Matrix weekly_phi() {
  Matrix m(5, 5);
  m << 0.2011, -0.1592, 0.01892, -0.196, 0.455,
       0.3139, -0.1231, -0.00191, -0.511, 0.434,
       0.0487, 0.0888, -0.12131, -0.224, 0.343,
       0.1829, -0.0889, 0.00988, -0.441, 0.382,
       0.0766, -0.0643, -0.03049, -0.114, 0.133;
  return m;
}

inline Matrix weekly_sigma() {
  Matrix m(5, 5);
  m << 0.0013085186, 0.0010544496, 0.0004365753, 0.0009120373, 0.0006781289,
       0.0010544496, 0.0013833540, 0.0005648237, 0.0010218539, 0.0008332314,
       0.0004365753, 0.0005648237, 0.0007994341, 0.0004733366, 0.0003667012,
       0.0009120373, 0.0010218539, 0.0004733366, 0.0010176793, 0.0006927251,
       0.0006781289, 0.0008332314, 0.0003667012, 0.0006927251, 0.0007242233;
  return m;
}

inline varcara::VarModel weekly_model(int k = 4, int p = 1) {
  return varcara::VarModel(k, p, weekly_nu(), weekly_phi(), weekly_sigma());
}

inline double rel_err(const Vector& a, const Vector& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline Matrix gaussian(std::mt19937_64& rng, int rows, int cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Matrix m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Vector gaussian_vector(std::mt19937_64& rng, int n, double sd = 1.0) {
  return gaussian(rng, n, 1, sd);
}

inline Matrix random_spd(std::mt19937_64& rng, int n, double ridge = 0.2) {
  const Matrix a = gaussian(rng, n, n);
  Matrix s = a * a.transpose() / n + ridge * Matrix::Identity(n, n);
  return 0.5 * (s + s.transpose());
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Random model with ||Phi|| small enough to keep it stationary.
inline varcara::VarModel random_var(std::mt19937_64& rng, int k, int p, double phi_scale = 0.3) {
  const int n = k + p;
  return varcara::VarModel(k, p, gaussian_vector(rng, n, 0.1),
                           gaussian(rng, n, n, phi_scale / std::sqrt(double(n))),
                           random_spd(rng, n));
}

}  // namespace testing
