#pragma once

// Dense symmetric linear algebra shared by every estimator: sample
// covariances, resolvents (C + shift)^{-1}, spectra and norms.

#include <memory>
#include <mutex>

#include <Eigen/Dense>

#include "pmest/errors.hpp"

namespace pmest {

using Index = Eigen::Index;

/// d x n matrix whose columns are samples.
class SampleMatrix {
 public:
  /// Requires d >= 1, n >= 1 and finite entries.
  explicit SampleMatrix(Eigen::MatrixXd data);

  /// A d x 0 matrix: the "no augmentation" set G with m = 0.
  static SampleMatrix empty(Index d);

  Index dim() const noexcept { return data_.rows(); }
  Index samples() const noexcept { return data_.cols(); }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  auto column(Index j) const { return data_.col(j); }

 private:
  struct Unchecked {};
  SampleMatrix(Eigen::MatrixXd data, Unchecked) : data_(std::move(data)) {}

  Eigen::MatrixXd data_;
};

/// Eigenvalues ascending, eigenvectors orthonormal (columns).
struct EigenDecomposition {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;
};

/// Symmetric d x d matrix. Symmetrised as (A + A^T) / 2 on construction;
/// immutable afterwards. The eigendecomposition is computed at most once and
/// shared between copies.
class SpdMatrix {
 public:
  explicit SpdMatrix(Eigen::MatrixXd data);

  static SpdMatrix identity(Index d);
  static SpdMatrix scaled_identity(Index d, double scale);
  static SpdMatrix zero(Index d);
  static SpdMatrix diagonal(const Eigen::VectorXd& diag);

  Index dim() const noexcept { return data_.rows(); }
  const Eigen::MatrixXd& data() const noexcept { return data_; }
  double operator()(Index i, Index j) const { return data_(i, j); }

  const EigenDecomposition& eigen() const;
  double min_eigenvalue() const { return eigen().values(0); }
  double max_eigenvalue() const { return eigen().values(dim() - 1); }

  /// Eigenvalues >= -rel_tol * max(|lambda|).
  bool is_psd(double rel_tol = 1e-10) const;

 private:
  struct Cache {
    std::once_flag once;
    EigenDecomposition value;
  };

  Eigen::MatrixXd data_;
  std::shared_ptr<Cache> cache_;
};

/// Threshold below which C + shift counts as singular.
inline constexpr double kSingularTol = 1e-12;

/// X X^T (deterministic parallel accumulation).
Eigen::MatrixXd gram(const SampleMatrix& x);

/// C_X = X X^T / n.
SpdMatrix sample_covariance(const SampleMatrix& x);

/// (C + lambda I)^{-1} through the eigendecomposition of C. Throws
/// SingularShift when lambda_min(C) + lambda <= kSingularTol.
SpdMatrix resolvent(const SpdMatrix& c, double lambda);

/// (C + D)^{-1} for a matrix shift D.
SpdMatrix resolvent(const SpdMatrix& c, const SpdMatrix& shift);

/// Cholesky fast path for a single resolvent. Falls back to the spectral path
/// (and its singularity check) when the factorization fails or lambda is tiny.
SpdMatrix resolvent_fast(const SpdMatrix& c, double lambda);

/// Covariance of X with column `column` (0-based) zeroed: (X X^T - x x^T) / n.
SpdMatrix leave_one_out_covariance(const SampleMatrix& x, Index column = 0);

double min_eigenvalue(const SpdMatrix& a);

/// sum_ij (A_ij - B_ij)^2.
double frobenius_sq_distance(const SpdMatrix& a, const SpdMatrix& b);

/// Pairwise-summed trace.
double trace(const Eigen::Ref<const Eigen::MatrixXd>& a);

/// tr(A B) = sum_ij A_ij B_ji, pairwise-summed.
double trace_product(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b);

/// V f(w) V^T for the eigendecomposition A = V diag(w) V^T.
template <class F>
SpdMatrix spectral_map(const SpdMatrix& a, F&& f) {
  const auto& e = a.eigen();
  Eigen::VectorXd w = e.values.unaryExpr(f);
  return SpdMatrix(e.vectors * w.asDiagonal() * e.vectors.transpose());
}

/// PSD square root; negative round-off eigenvalues are clamped to zero.
SpdMatrix matrix_sqrt(const SpdMatrix& a);

/// A^{-1}; throws SingularSigma when lambda_min(A) <= kSingularTol.
SpdMatrix inverse(const SpdMatrix& a);

/// Sherman-Morrison: given R = A^{-1}, returns (A + scale * x x^T)^{-1}.
SpdMatrix rank_one_update(const SpdMatrix& r, const Eigen::Ref<const Eigen::VectorXd>& x, double scale);

}  // namespace pmest
