#include "pmest/linalg.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "pmest/parallel.hpp"

namespace pmest {

namespace {

void require_finite(const Eigen::MatrixXd& m, const char* what) {
  if (!m.allFinite()) throw InvalidInput(std::string(what) + ": non-finite entry");
}

void require_same_dim(const SpdMatrix& a, const SpdMatrix& b) {
  if (a.dim() != b.dim())
    throw DimensionMismatch("dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
}

SpdMatrix spectral_resolvent(const EigenDecomposition& e, double lambda) {
  const double lo = e.values(0) + lambda;
  if (!(lo > kSingularTol))
    throw SingularShift("resolvent: lambda_min(C + lambda I) = " + std::to_string(lo) + " is not positive");
  Eigen::VectorXd inv = (e.values.array() + lambda).inverse();
  return SpdMatrix(e.vectors * inv.asDiagonal() * e.vectors.transpose());
}

}  // namespace

SampleMatrix::SampleMatrix(Eigen::MatrixXd data) : data_(std::move(data)) {
  if (data_.rows() < 1 || data_.cols() < 1) throw InvalidInput("SampleMatrix: need d >= 1 and n >= 1");
  require_finite(data_, "SampleMatrix");
}

SampleMatrix SampleMatrix::empty(Index d) {
  if (d < 1) throw InvalidInput("SampleMatrix: need d >= 1");
  return SampleMatrix(Eigen::MatrixXd(d, 0), Unchecked{});
}

SpdMatrix::SpdMatrix(Eigen::MatrixXd data) : cache_(std::make_shared<Cache>()) {
  if (data.rows() != data.cols()) throw DimensionMismatch("SpdMatrix: matrix is not square");
  if (data.rows() < 1) throw InvalidInput("SpdMatrix: empty matrix");
  require_finite(data, "SpdMatrix");
  data_ = 0.5 * (data + data.transpose());
}

SpdMatrix SpdMatrix::identity(Index d) { return SpdMatrix(Eigen::MatrixXd::Identity(d, d)); }

SpdMatrix SpdMatrix::scaled_identity(Index d, double scale) {
  return SpdMatrix(scale * Eigen::MatrixXd::Identity(d, d));
}

SpdMatrix SpdMatrix::zero(Index d) { return SpdMatrix(Eigen::MatrixXd::Zero(d, d)); }

SpdMatrix SpdMatrix::diagonal(const Eigen::VectorXd& diag) { return SpdMatrix(Eigen::MatrixXd(diag.asDiagonal())); }

const EigenDecomposition& SpdMatrix::eigen() const {
  std::call_once(cache_->once, [this] {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(data_);
    if (solver.info() != Eigen::Success) throw NoConvergence("eigendecomposition failed");
    cache_->value.values = solver.eigenvalues();
    cache_->value.vectors = solver.eigenvectors();
  });
  return cache_->value;
}

bool SpdMatrix::is_psd(double rel_tol) const {
  const auto& w = eigen().values;
  const double scale = std::max(std::abs(w(0)), std::abs(w(w.size() - 1)));
  return w(0) >= -rel_tol * scale;
}

Eigen::MatrixXd gram(const SampleMatrix& x) { return par::gram(x.data()); }

SpdMatrix sample_covariance(const SampleMatrix& x) {
  if (x.samples() < 1) throw InvalidInput("sample_covariance: no samples");
  return SpdMatrix(gram(x) / static_cast<double>(x.samples()));
}

SpdMatrix resolvent(const SpdMatrix& c, double lambda) {
  if (!std::isfinite(lambda)) throw InvalidInput("resolvent: non-finite lambda");
  return spectral_resolvent(c.eigen(), lambda);
}

SpdMatrix resolvent(const SpdMatrix& c, const SpdMatrix& shift) {
  require_same_dim(c, shift);
  const SpdMatrix sum(c.data() + shift.data());
  return spectral_resolvent(sum.eigen(), 0.0);
}

SpdMatrix resolvent_fast(const SpdMatrix& c, double lambda) {
  if (lambda > 1e-8) {
    Eigen::MatrixXd a = c.data();
    a.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(c.dim(), c.dim()));
      return SpdMatrix(inv);
    }
  }
  return resolvent(c, lambda);
}

SpdMatrix leave_one_out_covariance(const SampleMatrix& x, Index column) {
  if (column < 0 || column >= x.samples()) throw InvalidInput("leave_one_out_covariance: column out of range");
  Eigen::MatrixXd zeroed = x.data();
  zeroed.col(column).setZero();
  return SpdMatrix(par::gram(zeroed) / static_cast<double>(x.samples()));
}

double min_eigenvalue(const SpdMatrix& a) { return a.min_eigenvalue(); }

double frobenius_sq_distance(const SpdMatrix& a, const SpdMatrix& b) {
  require_same_dim(a, b);
  const Eigen::Index size = a.dim() * a.dim();
  std::vector<double> sq(static_cast<std::size_t>(size));
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (Eigen::Index i = 0; i < size; ++i) {
    const double diff = pa[i] - pb[i];
    sq[static_cast<std::size_t>(i)] = diff * diff;
  }
  return pairwise_sum(sq);
}

double trace(const Eigen::Ref<const Eigen::MatrixXd>& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("trace: matrix is not square");
  std::vector<double> diag(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) diag[static_cast<std::size_t>(i)] = a(i, i);
  return pairwise_sum(diag);
}

double trace_product(const Eigen::Ref<const Eigen::MatrixXd>& a, const Eigen::Ref<const Eigen::MatrixXd>& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols()) throw DimensionMismatch("trace_product: shapes differ");
  std::vector<double> terms(static_cast<std::size_t>(a.rows() * a.cols()));
  std::size_t k = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) terms[k++] = a(i, j) * b(j, i);
  return pairwise_sum(terms);
}

SpdMatrix matrix_sqrt(const SpdMatrix& a) {
  return spectral_map(a, [](double w) { return w > 0.0 ? std::sqrt(w) : 0.0; });
}

SpdMatrix inverse(const SpdMatrix& a) {
  if (!(a.min_eigenvalue() > kSingularTol))
    throw SingularSigma("inverse: matrix is not strictly positive definite");
  return spectral_map(a, [](double w) { return 1.0 / w; });
}

SpdMatrix rank_one_update(const SpdMatrix& r, const Eigen::Ref<const Eigen::VectorXd>& x, double scale) {
  if (x.size() != r.dim()) throw DimensionMismatch("rank_one_update: vector length differs");
  const Eigen::VectorXd rx = r.data() * x;
  const double denom = 1.0 + scale * x.dot(rx);
  if (!(std::abs(denom) > kSingularTol)) throw SingularShift("rank_one_update: singular update");
  return SpdMatrix(r.data() - (scale / denom) * rx * rx.transpose());
}

}  // namespace pmest
