#pragma once

// Oracles, curves, tuning and the Monte Carlo experiments used to check the
// estimators against known ground truth.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmest/augmented.hpp"
#include "pmest/augmentation.hpp"
#include "pmest/shrinkage.hpp"
#include "pmest/synth.hpp"

namespace pmest {

/// (1/d) ||R - Sigma^{-1}||_F^2.
double oracle_error(const SpdMatrix& r, const SpdMatrix& sigma);

/// (1/d) ||R - Sigma_full^{-1}||_F^2 with Sigma_full the covariance of a
/// much larger sample.
double proxy_error(const SpdMatrix& r, const SpdMatrix& sigma_full);

/// What a curve is evaluated against.
struct CurveOptions {
  EtaPolicy eta;
  /// True covariance. Fills the oracle column.
  std::optional<SpdMatrix> sigma;
  /// Add (1/d) tr Sigma^{-2} to every estimate (needs `sigma`).
  bool oracle_constant = false;
  /// Full-data covariance. Fills the proxy column.
  std::optional<SpdMatrix> full_covariance;
};

enum class CurveAxis { lambda, alpha };

struct CurvePoint {
  double hyperparam = 0.0;
  std::optional<double> estimate;
  std::optional<double> oracle;
  std::optional<double> proxy;
  /// Per-point flags (indicator state, eta, dilation factors, errors).
  std::string flags;
  Index m = 0;  // augmentation size for alpha curves
};

struct ErrorCurve {
  CurveAxis axis = CurveAxis::lambda;
  std::vector<CurvePoint> points;
  std::optional<std::size_t> argmin_estimate;
  std::optional<std::size_t> argmin_oracle;
  std::optional<std::size_t> argmin_proxy;
};

std::string to_string(CurveAxis axis);
nlohmann::json to_json(const ErrorCurve& curve);

/// Smallest index of the minimum among present values (first occurrence).
std::optional<std::size_t> first_argmin(const std::vector<std::optional<double>>& values);

/// Shrinkage estimate over a lambda grid (sorted ascending).
ErrorCurve lambda_curve(const SampleMatrix& x, std::vector<double> lambda_grid, const CurveOptions& options);

/// Augmented estimate over augmentation sizes. Every point draws from the
/// same stream, so G for a smaller m is a prefix of G for a larger one.
ErrorCurve alpha_curve_m(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<Index> m_grid,
                         const CurveOptions& options, Index k_mc, const RngStream& rng,
                         DilationOptions dilation = {});

/// alpha values map to m = round(alpha n / (1 - alpha)).
ErrorCurve alpha_curve(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<double> alpha_grid,
                       const CurveOptions& options, Index k_mc, const RngStream& rng, DilationOptions dilation = {});

/// Minimiser of f on [lo, hi] by golden-section search.
double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-8,
                               int max_iter = 200);

struct TuneResult {
  ErrorCurve curve;
  double best = 0.0;        // grid minimiser, or the refined value
  double best_value = 0.0;  // estimate at `best`
  bool refined = false;
};

/// Grid search over lambda; with `refine`, golden-section search in log lambda
/// on the triple bracketing the grid minimiser.
TuneResult tune_lambda(const SampleMatrix& x, std::vector<double> lambda_grid, const CurveOptions& options,
                       bool refine = true);

/// Grid search over alpha.
TuneResult tune_alpha(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<double> alpha_grid,
                      const CurveOptions& options, Index k_mc, const RngStream& rng, DilationOptions dilation = {});

/// One pass/fail verdict. `comparison` is "<=" or ">=".
struct Check {
  std::string name;
  double value = 0.0;
  std::string comparison = "<=";
  double threshold = 0.0;
  bool passed = false;
};

Check make_check(std::string name, double value, std::string comparison, double threshold);

struct ExperimentReport {
  std::string name;
  nlohmann::json config = nlohmann::json::object();
  std::vector<nlohmann::json> records;
  nlohmann::json summary = nlohmann::json::object();
  std::vector<Check> checks;

  bool passed() const;
  nlohmann::json to_json() const;
};

struct ConcentrationConfig {
  SigmaSpec sigma;
  Index n = 0;
  double lambda = 0.1;
  EtaPolicy eta;
  Index replicates = 20;
  NoiseSpec noise;
  /// Pass when the 95th percentile of |E_hat - E| is at most this.
  double bound = 0.1;
  std::uint64_t seed = 0;
};

/// Per replicate: the oracle-mode shrinkage estimate against the true error.
ExperimentReport concentration_experiment(const ConcentrationConfig& config);

enum class TestMatrix {
  /// Sigma^{-1} / ||Sigma^{-1}||_F
  sigma_inverse_normalized,
  /// I / sqrt(d)
  identity_normalized,
};

struct AugmentedVariant {
  /// Scheme for a given dimension d.
  std::function<DaScheme(Index)> scheme;
  std::string label;
  double alpha = 0.0;
};

struct DetEquivConfig {
  SigmaSpec sigma;  // dim is replaced by round(ratio * n)
  double ratio = 0.25;
  std::vector<Index> n_list;
  double lambda = 0.2;
  TestMatrix test_matrix = TestMatrix::sigma_inverse_normalized;
  /// Absent: shrinkage R_X. Present: R_Aug with this scheme and alpha.
  std::optional<AugmentedVariant> augmented;
  Index replicates = 200;
  NoiseSpec noise;
  double factor = 0.6;
  std::uint64_t seed = 0;
};

/// |(1/d) tr(B (mean_r R_r - D_bar))| for each n in the list.
ExperimentReport det_equiv_convergence(const DetEquivConfig& config);

struct MixtureFit {
  scheme::GaussianMixtureGda mixture;
  /// sum_i w_i mu_i before recentring; add it back to recover the fitted means.
  Eigen::VectorXd shift;
  std::vector<double> variances;  // isotropic sigma_i^2
  int restarts = 0;
  int iterations = 0;
  double log_likelihood = 0.0;
};

/// k-means++ seeding followed by EM with isotropic components. Restarts on an
/// empty component, at most 5 times.
MixtureFit fit_mixture(const SampleMatrix& x, Index k, const RngStream& rng, int iters = 200);

}  // namespace pmest
