#pragma once

// Data-augmentation schemes: sampling G | X and the exact second-moment
// decomposition E[C_G | X] = beta C_X + Lambda_G(X).

#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pmest/linalg.hpp"
#include "pmest/rng.hpp"

namespace pmest {

namespace scheme {

/// G_j ~ N(0, Lambda).
struct FixedGaussianGda {
  SpdMatrix lambda;
};

/// G_j ~ sum_i w_i N(mu_i, Lambda_i); must be centred (sum_i w_i mu_i = 0).
struct GaussianMixtureGda {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<SpdMatrix> covariances;
};

/// G_j = X_{I_j} + Z_j, Z_j ~ N(0, Lambda).
struct FixedGaussianTda {
  SpdMatrix lambda;
};

/// G_j = X_{I_j} (.) Z_j, Z_j ~ Ber(keep_prob)^d.
struct RandomMaskTda {
  double keep_prob = 1.0;
};

/// Masked entries are replaced by N(0, noise_var) draws.
struct SaltPepperTda {
  double keep_prob = 1.0;
  double noise_var = 0.0;
};

}  // namespace scheme

using DaScheme = std::variant<scheme::FixedGaussianGda, scheme::GaussianMixtureGda, scheme::FixedGaussianTda,
                              scheme::RandomMaskTda, scheme::SaltPepperTda>;

std::string scheme_name(const DaScheme& s);
bool is_generative(const DaScheme& s);

/// Throws InvalidScheme when a parameter invariant is violated or the scheme
/// dimension differs from d.
void validate_scheme(const DaScheme& s, Index d);

struct MomentDecomposition {
  double beta = 0.0;
  SpdMatrix lambda_g;
  /// (lambda_min, lambda_max) of Lambda_G; diagnostic only.
  std::pair<double, double> kappa_bounds;
};

/// m i.i.d. columns drawn from nu_X. Column j uses sub-stream rng.child(j);
/// TDA columns draw the source index first, then the transformation noise.
SampleMatrix sample_augmented(const DaScheme& s, const SampleMatrix& x, Index m, const RngStream& rng);

/// Exact (beta, Lambda_G(X)) for the scheme. For masking schemes beta is
/// keep_prob^2 (see README).
MomentDecomposition moment_decomposition(const DaScheme& s, const SampleMatrix& x);

/// Population counterpart E[Lambda_G(X)] when X has covariance sigma.
SpdMatrix population_lambda_g(const DaScheme& s, const SpdMatrix& sigma);

/// ||C_hat_G - (beta C_X + Lambda_G)||_F / ||beta C_X + Lambda_G||_F with
/// C_hat_G = G G^T / m_mc. Requires m_mc >= 1000.
double verify_decomposition(const DaScheme& s, const SampleMatrix& x, Index m_mc, const RngStream& rng);

}  // namespace pmest
