#pragma once

// Precision estimation on an augmented sample [X, G]:
//   R_Aug(lambda) = ((XX^T + GG^T) / (n + m) + lambda I)^{-1},
// the dilation factors a_x(X), a_g(X), the Phi functionals, the resulting
// error estimate, and the coupled deterministic-equivalent solver.

#include <optional>

#include "pmest/augmentation.hpp"
#include "pmest/linalg.hpp"
#include "pmest/rng.hpp"
#include "pmest/shrinkage.hpp"

namespace pmest {

/// Which leave-one-out quadratic form enters a_x.
enum class LooQuadratic {
  /// X_1^T E[R_{X^- u G} | X] X_1 with an explicit leave-one-out resolvent.
  first_column,
  /// Average over all columns i of X_i^T E[R_{X^{-i} u G} | X] X_i, each
  /// leave-one-out form obtained exactly from the full resolvent by
  /// Sherman-Morrison: q_i^- = q_i / (1 - q_i / (n + m)).
  all_columns,
};

struct DilationOptions {
  LooQuadratic quadratic = LooQuadratic::all_columns;
};

struct DilationFactors {
  double a_x = 1.0;
  double a_g = 1.0;
  Index mc_replicates = 0;  // replicates that entered the averages
  Index dropped = 0;        // replicates dropped on SingularShift
  double stderr_a_x = 0.0;
  double stderr_a_g = 0.0;
};

struct AugmentedErrorParts {
  double tr_r2_term = 0.0;  // (1/d) tr R_Aug(lambda)^2, one concrete draw of G
  double phi1 = 0.0;
  double phi2 = 0.0;
  std::optional<double> constant_term;
  DilationFactors dilation;
  bool indicator = false;
  double eta = 0.0;
  bool singular_r0 = false;
  Index m = 0;
  /// The R_Aug(lambda) behind tr_r2_term; lets callers evaluate the true error.
  std::optional<SpdMatrix> precision;

  double total() const { return tr_r2_term - 2.0 * (phi1 - phi2) + constant_term.value_or(0.0); }
};

struct PhiValues {
  double phi1 = 0.0;
  double phi2 = 0.0;
  bool indicator = false;
  double eta = 0.0;
  bool singular_r0 = false;
};

struct AugmentedDetEquiv {
  double a_x_star = 1.0;
  double a_g_star = 1.0;
  SpdMatrix d_bar = SpdMatrix::zero(1);
  double residual_x = 0.0;
  double residual_g = 0.0;
  int iterations = 0;
  bool used_bisection = false;
};

/// alpha = m / (n + m).
double augmentation_ratio(Index n, Index m);

/// m = round(alpha n / (1 - alpha)), alpha in [0, 1).
Index samples_for_ratio(double alpha, Index n);

SpdMatrix augmented_precision(const SampleMatrix& x, const SampleMatrix& g, double lambda);

/// Monte Carlo estimate of (a_x, a_g) over k_mc independent draws of G;
/// replicate k uses rng.child(k).
DilationFactors dilation_factors(const SampleMatrix& x, const DaScheme& s, Index m, double lambda, Index k_mc,
                                 const RngStream& rng, DilationOptions options = {});

/// Phi_1 and Phi_2. Throws SingularM when alpha Lambda_G / a_g + lambda I is
/// singular.
PhiValues phi_functionals(const SampleMatrix& x, const DaScheme& s, Index m, double lambda,
                          const DilationFactors& dil, EtaPolicy eta);

/// tr_r2_term uses G drawn from rng.child(0); the dilation factors use
/// rng.child(1).
AugmentedErrorParts error_estimate_augmented(const SampleMatrix& x, const DaScheme& s, Index m, double lambda,
                                             EtaPolicy eta, const std::optional<SpdMatrix>& oracle_sigma,
                                             Index k_mc, const RngStream& rng, DilationOptions options = {});

/// ((1 - (1 - beta/a_g) alpha) / a_x * Sigma + alpha / a_g * Lambda_bar + lambda I)^{-1}
SpdMatrix det_equiv_augmented(const SpdMatrix& sigma, const SpdMatrix& lambda_bar, double beta, double alpha,
                              double a_x, double a_g, double lambda);

/// Self-consistent (a_x*, a_g*): damped alternating iteration from (1, 1),
/// bisection on a_g (with an inner solve for a_x) when it stalls.
AugmentedDetEquiv solve_augmented_det_equiv(const SpdMatrix& sigma, const SpdMatrix& lambda_bar, double beta,
                                            double alpha, Index n, Index m, double lambda,
                                            FixedPointOptions options = {1e-12, 1000, 0.5});

}  // namespace pmest
