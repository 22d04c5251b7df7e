#pragma once

// Linear-shrinkage precision estimator R_X(lambda) = (C_X + lambda I)^{-1},
// its data-driven quadratic-error estimate, and the fixed-point
// deterministic equivalent (Sigma / b* + lambda I)^{-1}.

#include <optional>

#include "pmest/linalg.hpp"

namespace pmest {

/// How eta (the leave-one-out conditioning threshold) is chosen.
struct EtaPolicy {
  /// nullopt selects the automatic policy (see default_eta).
  std::optional<double> value;

  static EtaPolicy automatic() { return {}; }
  static EtaPolicy fixed(double eta) { return {eta}; }
};

/// The terms of the shrinkage error estimate. `total()` sums the present
/// parts; without an oracle Sigma it is the estimate up to an additive
/// constant that does not depend on lambda.
struct ShrinkageErrorParts {
  double tr_r2_term = 0.0;    // (1/d) tr R(lambda)^2
  double loo_term = 0.0;      // -2 (1 - d/n) tr R(0) / (lambda d) * 1{indicator}
  double cross_term = 0.0;    // 2 tr R(lambda) / (lambda b_hat d)
  std::optional<double> constant_term;  // (1/d) tr Sigma^{-2}, oracle mode only
  double b_hat = 1.0;
  bool indicator = false;
  double eta = 0.0;
  /// Indicator held but C_X was numerically singular; loo_term forced to 0.
  bool singular_r0 = false;

  double total() const { return tr_r2_term + loo_term + cross_term + constant_term.value_or(0.0); }
};

struct FixedPointOptions {
  double tol = 1e-12;
  int max_iter = 500;
  double damping = 0.5;
};

struct FixedPointResult {
  double value = 1.0;
  int iterations = 0;
  double residual = 0.0;
  bool used_bisection = false;
};

/// (C_X + lambda I)^{-1}. lambda = 0 needs lambda_min(C_X) > 1e-12.
SpdMatrix shrinkage_precision(const SampleMatrix& x, double lambda);

/// lambda_min(C_X^-) >= eta, where C_X^- drops the first sample. Always false
/// when d > n - 1.
bool indicator_eta(const SampleMatrix& x, double eta);

/// 1 / (1 - d/n + (lambda/n) tr R_X(lambda)).
double b_hat(const SampleMatrix& x, double lambda);

/// safety * lambda_min(Sigma) * (sqrt((n-1)/n) - sqrt(d/n))^2. Throws
/// InvalidRegime when d >= n or the gap vanishes (d = n - 1).
double suggest_eta(double lambda_min_sigma, Index n, Index d, double safety = 0.5);

/// Automatic eta: min(suggest_eta(lambda_min(C_X), n, d), lambda_min(C_X^-)),
/// skipping whichever is undefined. nullopt when neither is (the indicator is
/// then false).
std::optional<double> default_eta(const SampleMatrix& x);

/// Precomputes the spectrum of C_X once so that lambda sweeps cost O(d) per
/// point. Immutable after construction; parts() may be called concurrently.
class ShrinkageEstimator {
 public:
  ShrinkageEstimator(const SampleMatrix& x, EtaPolicy eta, std::optional<SpdMatrix> oracle_sigma = std::nullopt);

  ShrinkageErrorParts parts(double lambda) const;
  SpdMatrix precision(double lambda) const { return resolvent(covariance_, lambda); }

  const SpdMatrix& covariance() const { return covariance_; }
  bool indicator() const { return indicator_; }
  double eta() const { return eta_; }
  Index dim() const { return d_; }
  Index samples() const { return n_; }

 private:
  SpdMatrix covariance_;
  Index d_;
  Index n_;
  double eta_ = 0.0;
  bool indicator_ = false;
  bool singular_r0_ = false;
  double tr_r0_ = 0.0;
  std::optional<double> constant_;
};

/// Shrinkage error estimate at one lambda. Pass `oracle_sigma` for the
/// oracle mode (adds (1/d) tr Sigma^{-2}).
ShrinkageErrorParts error_estimate_shrinkage(const SampleMatrix& x, double lambda, EtaPolicy eta,
                                             const std::optional<SpdMatrix>& oracle_sigma = std::nullopt);

/// f_lambda(b) = 1 + tr(Sigma (Sigma / b + lambda I)^{-1}) / n.
double b_star_map(const SpdMatrix& sigma, Index n, double lambda, double b);

/// Unique fixed point of f_lambda on [1, inf): damped iteration from b = 1,
/// bisection on f_lambda(b) - b when the iteration stalls.
FixedPointResult solve_b_star(const SpdMatrix& sigma, Index n, double lambda, FixedPointOptions options = {});

/// (Sigma / b* + lambda I)^{-1}.
SpdMatrix det_equiv_shrinkage(const SpdMatrix& sigma, Index n, double lambda, FixedPointOptions options = {});
SpdMatrix det_equiv_shrinkage(const SpdMatrix& sigma, double b_star, double lambda);

}  // namespace pmest
