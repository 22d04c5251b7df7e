#pragma once

#include <random>

#include <Eigen/Dense>

#include "pmest/linalg.hpp"
#include "pmest/rng.hpp"

namespace testutil {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  auto e = pmest::RngStream{seed, 99}.engine();
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(e);
  return m;
}

inline pmest::SpdMatrix random_spd(Eigen::Index d, std::uint64_t seed, double ridge = 0.1) {
  const Eigen::MatrixXd a = gaussian(d, d, seed);
  return pmest::SpdMatrix(a * a.transpose() / static_cast<double>(d) +
                          ridge * Eigen::MatrixXd::Identity(d, d));
}

// Plain LU inverse, independent of the library's spectral path.
inline Eigen::MatrixXd lu_inverse(const Eigen::MatrixXd& a) { return a.fullPivLu().inverse(); }

inline double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace testutil
