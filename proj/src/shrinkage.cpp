#include "pmest/shrinkage.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fixed_point.hpp"
#include "pmest/parallel.hpp"

namespace pmest {

namespace {

void require_positive_lambda(double lambda, const char* what) {
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw InvalidInput(std::string(what) + ": lambda must be positive and finite");
}

// sum_i 1 / (w_i + lambda)^power
double inverse_power_sum(const Eigen::VectorXd& w, double lambda, int power) {
  std::vector<double> terms(static_cast<std::size_t>(w.size()));
  for (Index i = 0; i < w.size(); ++i) {
    const double s = w(i) + lambda;
    if (!(s > kSingularTol)) throw SingularShift("resolvent trace: lambda_min(C + lambda I) is not positive");
    terms[static_cast<std::size_t>(i)] = power == 1 ? 1.0 / s : 1.0 / (s * s);
  }
  return pairwise_sum(terms);
}

}  // namespace

SpdMatrix shrinkage_precision(const SampleMatrix& x, double lambda) {
  if (!(lambda >= 0.0)) throw InvalidInput("shrinkage_precision: lambda must be >= 0");
  return resolvent(sample_covariance(x), lambda);
}

bool indicator_eta(const SampleMatrix& x, double eta) {
  if (!(eta > 0.0)) throw InvalidInput("indicator_eta: eta must be positive");
  // C_X^- has rank at most n - 1.
  if (x.dim() > x.samples() - 1) return false;
  return leave_one_out_covariance(x, 0).min_eigenvalue() >= eta;
}

double b_hat(const SampleMatrix& x, double lambda) {
  require_positive_lambda(lambda, "b_hat");
  const SpdMatrix c = sample_covariance(x);
  const double d = static_cast<double>(x.dim());
  const double n = static_cast<double>(x.samples());
  const double denom = 1.0 - d / n + (lambda / n) * inverse_power_sum(c.eigen().values, lambda, 1);
  if (!(denom > 1e-12)) throw DegenerateDenominator("b_hat: denominator " + std::to_string(denom) + " <= 1e-12");
  return 1.0 / denom;
}

double suggest_eta(double lambda_min_sigma, Index n, Index d, double safety) {
  if (!(lambda_min_sigma > 0.0)) throw InvalidInput("suggest_eta: lambda_min must be positive");
  if (!(safety > 0.0 && safety <= 1.0)) throw InvalidInput("suggest_eta: safety must lie in (0, 1]");
  if (d >= n) throw InvalidRegime("suggest_eta: requires d < n");
  const double nn = static_cast<double>(n);
  const double gap = std::sqrt((nn - 1.0) / nn) - std::sqrt(static_cast<double>(d) / nn);
  const double eta = safety * lambda_min_sigma * gap * gap;
  if (!(gap > 0.0) || !(eta > 0.0)) throw InvalidRegime("suggest_eta: vanishing gap (d = n - 1)");
  return eta;
}

std::optional<double> default_eta(const SampleMatrix& x) {
  const Index d = x.dim();
  const Index n = x.samples();
  std::optional<double> eta;
  if (d <= n - 1) {
    const double loo_min = leave_one_out_covariance(x, 0).min_eigenvalue();
    if (loo_min > kSingularTol) eta = loo_min;
  }
  if (d < n) {
    const double c_min = sample_covariance(x).min_eigenvalue();
    if (c_min > 0.0) {
      try {
        const double s = suggest_eta(c_min, n, d, 0.5);
        eta = eta ? std::min(*eta, s) : s;
      } catch (const InvalidRegime&) {
      }
    }
  }
  return eta;
}

ShrinkageEstimator::ShrinkageEstimator(const SampleMatrix& x, EtaPolicy eta, std::optional<SpdMatrix> oracle_sigma)
    : covariance_(sample_covariance(x)), d_(x.dim()), n_(x.samples()) {
  if (eta.value) {
    eta_ = *eta.value;
    indicator_ = indicator_eta(x, eta_);
  } else if (auto chosen = default_eta(x)) {
    eta_ = *chosen;
    indicator_ = indicator_eta(x, eta_);
  } else {
    eta_ = std::nan("");
    indicator_ = false;
  }

  if (indicator_) {
    const auto& w = covariance_.eigen().values;
    if (w(0) > kSingularTol)
      tr_r0_ = inverse_power_sum(w, 0.0, 1);
    else
      singular_r0_ = true;
  }

  if (oracle_sigma) {
    if (oracle_sigma->dim() != d_) throw DimensionMismatch("oracle sigma dimension differs from data");
    const auto& s = oracle_sigma->eigen().values;
    if (!(s(0) > kSingularTol)) throw SingularSigma("oracle sigma is not strictly positive definite");
    constant_ = inverse_power_sum(s, 0.0, 2) / static_cast<double>(d_);
  }
}

ShrinkageErrorParts ShrinkageEstimator::parts(double lambda) const {
  require_positive_lambda(lambda, "error_estimate_shrinkage");
  const auto& w = covariance_.eigen().values;
  const double d = static_cast<double>(d_);
  const double n = static_cast<double>(n_);
  const double tr_r = inverse_power_sum(w, lambda, 1);
  const double tr_r2 = inverse_power_sum(w, lambda, 2);

  const double denom = 1.0 - d / n + (lambda / n) * tr_r;
  if (!(denom > 1e-12)) throw DegenerateDenominator("b_hat: denominator " + std::to_string(denom) + " <= 1e-12");

  ShrinkageErrorParts p;
  p.b_hat = 1.0 / denom;
  p.indicator = indicator_;
  p.eta = eta_;
  p.singular_r0 = singular_r0_;
  p.tr_r2_term = tr_r2 / d;
  p.loo_term = (indicator_ && !singular_r0_) ? -2.0 * (1.0 - d / n) * tr_r0_ / (lambda * d) : 0.0;
  p.cross_term = 2.0 * tr_r / (lambda * p.b_hat * d);
  p.constant_term = constant_;
  return p;
}

ShrinkageErrorParts error_estimate_shrinkage(const SampleMatrix& x, double lambda, EtaPolicy eta,
                                             const std::optional<SpdMatrix>& oracle_sigma) {
  return ShrinkageEstimator(x, eta, oracle_sigma).parts(lambda);
}

double b_star_map(const SpdMatrix& sigma, Index n, double lambda, double b) {
  const auto& s = sigma.eigen().values;
  std::vector<double> terms(static_cast<std::size_t>(s.size()));
  for (Index i = 0; i < s.size(); ++i) terms[static_cast<std::size_t>(i)] = b * s(i) / (s(i) + lambda * b);
  return 1.0 + pairwise_sum(terms) / static_cast<double>(n);
}

FixedPointResult solve_b_star(const SpdMatrix& sigma, Index n, double lambda, FixedPointOptions options) {
  if (n < 1) throw InvalidInput("solve_b_star: n must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidInput("solve_b_star: lambda must be >= 0");
  const auto& s = sigma.eigen().values;
  if (!(s(0) > 0.0)) throw InvalidInput("solve_b_star: sigma must be strictly positive definite");
  const Index d = sigma.dim();
  if (lambda == 0.0 && d >= n)
    throw NoConvergence("solve_b_star: lambda = 0 with d >= n has no fixed point on [1, inf)");

  // f(b) <= 1 + tr(Sigma) / (n lambda), and for lambda = 0, b* = n / (n - d).
  double upper = INFINITY;
  if (lambda > 0.0) upper = 1.0 + trace(sigma.data()) / (static_cast<double>(n) * lambda);
  if (d < n) upper = std::min(upper, 2.0 * static_cast<double>(n) / static_cast<double>(n - d));

  return detail::solve_scalar_fixed_point([&](double b) { return b_star_map(sigma, n, lambda, b); }, upper, options,
                                          "solve_b_star");
}

SpdMatrix det_equiv_shrinkage(const SpdMatrix& sigma, double b_star, double lambda) {
  return spectral_map(sigma, [&](double s) { return 1.0 / (s / b_star + lambda); });
}

SpdMatrix det_equiv_shrinkage(const SpdMatrix& sigma, Index n, double lambda, FixedPointOptions options) {
  const FixedPointResult b = solve_b_star(sigma, n, lambda, options);
  return det_equiv_shrinkage(sigma, b.value, lambda);
}

}  // namespace pmest
