#include "pmest/augmented.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fixed_point.hpp"
#include "pmest/parallel.hpp"

namespace pmest {

namespace {

struct Replicate {
  double trace_term = 0.0;  // tr((beta C_X + Lambda_G) R_k)
  double quad_term = 0.0;   // leave-one-out quadratic form
};

double mean_of(const std::vector<double>& v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

double stderr_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - mean) * (v[i] - mean);
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  return std::sqrt(var / static_cast<double>(v.size()));
}

// Leave-one-out quadratic form for one replicate. `a` is X X^T + G G^T and
// `r` the full resolvent ((a / total) + lambda I)^{-1}.
double loo_quadratic(const SampleMatrix& x, const Eigen::MatrixXd& a, const SpdMatrix& r, double total,
                     double lambda, LooQuadratic mode) {
  if (mode == LooQuadratic::first_column) {
    const auto x1 = x.column(0);
    const Eigen::MatrixXd a_minus = a - x1 * x1.transpose();
    const SpdMatrix r_minus = resolvent_fast(SpdMatrix(a_minus / total), lambda);
    return x1.dot(r_minus.data() * x1);
  }
  const Eigen::VectorXd q = par::column_quadratic_forms(x.data(), r.data());
  std::vector<double> loo(static_cast<std::size_t>(q.size()));
  for (Index i = 0; i < q.size(); ++i) {
    const double denom = 1.0 - q(i) / total;
    if (!(denom > kSingularTol)) throw SingularShift("leave-one-out resolvent is singular");
    loo[static_cast<std::size_t>(i)] = q(i) / denom;
  }
  return pairwise_sum(loo) / static_cast<double>(loo.size());
}

void require_lambda(double lambda, const char* what) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda))
    throw InvalidInput(std::string(what) + ": lambda must be >= 0 and finite");
}

// Inverse of a symmetric positive definite matrix; SingularShift otherwise.
Eigen::MatrixXd pd_inverse(const Eigen::MatrixXd& a) {
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) {
    const SpdMatrix s(a);
    if (!(s.min_eigenvalue() > kSingularTol)) throw SingularShift("deterministic equivalent: matrix is singular");
    return inverse(s).data();
  }
  return llt.solve(Eigen::MatrixXd::Identity(a.rows(), a.cols()));
}

}  // namespace

double augmentation_ratio(Index n, Index m) {
  if (n < 1 || m < 0) throw InvalidInput("augmentation_ratio: need n >= 1 and m >= 0");
  return static_cast<double>(m) / static_cast<double>(n + m);
}

Index samples_for_ratio(double alpha, Index n) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidInput("alpha must lie in [0, 1)");
  return static_cast<Index>(std::llround(alpha * static_cast<double>(n) / (1.0 - alpha)));
}

SpdMatrix augmented_precision(const SampleMatrix& x, const SampleMatrix& g, double lambda) {
  require_lambda(lambda, "augmented_precision");
  if (g.dim() != x.dim()) throw DimensionMismatch("augmented_precision: X and G differ in dimension");
  if (g.samples() == 0) return resolvent(sample_covariance(x), lambda);
  const double total = static_cast<double>(x.samples() + g.samples());
  return resolvent(SpdMatrix((gram(x) + gram(g)) / total), lambda);
}

DilationFactors dilation_factors(const SampleMatrix& x, const DaScheme& s, Index m, double lambda, Index k_mc,
                                 const RngStream& rng, DilationOptions options) {
  require_lambda(lambda, "dilation_factors");
  if (k_mc < 1) throw InvalidInput("dilation_factors: K_mc must be >= 1");
  if (m < 0) throw InvalidInput("dilation_factors: m must be >= 0");
  const Index n = x.samples();
  const MomentDecomposition md = moment_decomposition(s, x);
  const Eigen::MatrixXd gx = gram(x);

  DilationFactors out;
  if (m == 0) {
    // No G to average over: one deterministic pass, a_g = 1.
    const double total = static_cast<double>(n);
    const SpdMatrix r = resolvent(SpdMatrix(gx / total), lambda);
    const double q = loo_quadratic(x, gx, r, total, lambda, options.quadratic);
    out.a_x = 1.0 + q / total;
    out.mc_replicates = 1;
    return out;
  }

  const double total = static_cast<double>(n + m);
  const double alpha = augmentation_ratio(n, m);
  const Eigen::MatrixXd target = md.beta * gx / static_cast<double>(n) + md.lambda_g.data();

  auto reps = par::map(static_cast<std::size_t>(k_mc), [&](std::size_t k) -> std::optional<Replicate> {
    try {
      const SampleMatrix g = sample_augmented(s, x, m, rng.child(k));
      const Eigen::MatrixXd a = gx + gram(g);
      const SpdMatrix r = resolvent_fast(SpdMatrix(a / total), lambda);
      Replicate rep;
      rep.trace_term = trace_product(target, r.data());
      rep.quad_term = loo_quadratic(x, a, r, total, lambda, options.quadratic);
      return rep;
    } catch (const SingularShift&) {
      return std::nullopt;
    }
  });

  std::vector<double> traces;
  std::vector<double> quads;
  for (const auto& r : reps) {
    if (!r) {
      ++out.dropped;
      continue;
    }
    traces.push_back(r->trace_term);
    quads.push_back(r->quad_term);
  }
  if (traces.empty()) throw SingularShift("dilation_factors: every Monte Carlo replicate hit a singular resolvent");
  out.mc_replicates = static_cast<Index>(traces.size());

  const double mean_t = mean_of(traces);
  const double mean_q = mean_of(quads);
  out.a_g = 1.0 + (alpha / static_cast<double>(m)) * mean_t;
  out.stderr_a_g = (alpha / static_cast<double>(m)) * stderr_of(traces, mean_t);
  const double coef = 1.0 - (1.0 - md.beta / out.a_g) * alpha;
  out.a_x = 1.0 + (coef / static_cast<double>(n)) * mean_q;
  out.stderr_a_x = (coef / static_cast<double>(n)) * stderr_of(quads, mean_q);
  return out;
}

PhiValues phi_functionals(const SampleMatrix& x, const DaScheme& s, Index m, double lambda,
                          const DilationFactors& dil, EtaPolicy eta) {
  require_lambda(lambda, "phi_functionals");
  const Index d = x.dim();
  const Index n = x.samples();
  const double dd = static_cast<double>(d);
  const double alpha = augmentation_ratio(n, m);
  const MomentDecomposition md = moment_decomposition(s, x);
  const SpdMatrix c = sample_covariance(x);

  const SpdMatrix m_mat(alpha * md.lambda_g.data() / dil.a_g +
                        lambda * Eigen::MatrixXd::Identity(d, d));
  if (!(m_mat.min_eigenvalue() > kSingularTol))
    throw SingularM("phi_functionals: alpha Lambda_G / a_g + lambda I is singular; lambda = 0 needs a "
                    "positive definite Lambda_G");
  const SpdMatrix m_inv = inverse(m_mat);

  PhiValues out;
  if (eta.value) {
    out.eta = *eta.value;
    out.indicator = indicator_eta(x, out.eta);
  } else if (auto chosen = default_eta(x)) {
    out.eta = *chosen;
    out.indicator = indicator_eta(x, out.eta);
  } else {
    out.eta = std::nan("");
  }

  if (out.indicator) {
    if (c.min_eigenvalue() > kSingularTol)
      out.phi1 = ((1.0 - dd / static_cast<double>(n)) / dd) * trace_product(inverse(c).data(), m_inv.data());
    else
      out.singular_r0 = true;
  }

  const SpdMatrix shift((1.0 - alpha) * c.data() + alpha * (md.lambda_g.data() + md.beta * c.data()) / dil.a_g);
  const SpdMatrix d_bar = resolvent(shift, lambda);
  const double coef = 1.0 - (1.0 - md.beta / dil.a_g) * alpha;
  out.phi2 = coef / (dd * dil.a_x) * trace_product(d_bar.data(), m_inv.data());
  return out;
}

AugmentedErrorParts error_estimate_augmented(const SampleMatrix& x, const DaScheme& s, Index m, double lambda,
                                             EtaPolicy eta, const std::optional<SpdMatrix>& oracle_sigma,
                                             Index k_mc, const RngStream& rng, DilationOptions options) {
  require_lambda(lambda, "error_estimate_augmented");
  const Index d = x.dim();
  const double dd = static_cast<double>(d);

  const SampleMatrix g = sample_augmented(s, x, m, rng.child(0));
  SpdMatrix r_aug = augmented_precision(x, g, lambda);

  AugmentedErrorParts p;
  p.m = m;
  p.dilation = dilation_factors(x, s, m, lambda, k_mc, rng.child(1), options);
  const PhiValues phi = phi_functionals(x, s, m, lambda, p.dilation, eta);
  p.phi1 = phi.phi1;
  p.phi2 = phi.phi2;
  p.indicator = phi.indicator;
  p.eta = phi.eta;
  p.singular_r0 = phi.singular_r0;
  p.tr_r2_term = trace_product(r_aug.data(), r_aug.data()) / dd;

  if (oracle_sigma) {
    if (oracle_sigma->dim() != d) throw DimensionMismatch("oracle sigma dimension differs from data");
    const auto& w = oracle_sigma->eigen().values;
    if (!(w(0) > kSingularTol)) throw SingularSigma("oracle sigma is not strictly positive definite");
    std::vector<double> terms(static_cast<std::size_t>(d));
    for (Index i = 0; i < d; ++i) terms[static_cast<std::size_t>(i)] = 1.0 / (w(i) * w(i));
    p.constant_term = pairwise_sum(terms) / dd;
  }
  p.precision = std::move(r_aug);
  return p;
}

SpdMatrix det_equiv_augmented(const SpdMatrix& sigma, const SpdMatrix& lambda_bar, double beta, double alpha,
                              double a_x, double a_g, double lambda) {
  const double coef = (1.0 - (1.0 - beta / a_g) * alpha) / a_x;
  const Index d = sigma.dim();
  Eigen::MatrixXd a = coef * sigma.data() + (alpha / a_g) * lambda_bar.data() +
                      lambda * Eigen::MatrixXd::Identity(d, d);
  return SpdMatrix(pd_inverse(a));
}

AugmentedDetEquiv solve_augmented_det_equiv(const SpdMatrix& sigma, const SpdMatrix& lambda_bar, double beta,
                                            double alpha, Index n, Index m, double lambda,
                                            FixedPointOptions options) {
  if (n < 1 || m < 0) throw InvalidInput("solve_augmented_det_equiv: need n >= 1 and m >= 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw InvalidInput("solve_augmented_det_equiv: alpha must lie in [0, 1)");
  if (!(beta >= 0.0 && beta <= 1.0)) throw InvalidInput("solve_augmented_det_equiv: beta must lie in [0, 1]");
  require_lambda(lambda, "solve_augmented_det_equiv");
  if (lambda_bar.dim() != sigma.dim()) throw DimensionMismatch("solve_augmented_det_equiv: Lambda_bar dimension");
  if (!(sigma.min_eigenvalue() > 0.0)) throw InvalidInput("solve_augmented_det_equiv: sigma must be positive definite");
  if (!lambda_bar.is_psd()) throw InvalidInput("solve_augmented_det_equiv: Lambda_bar must be PSD");

  AugmentedDetEquiv out;
  if (alpha == 0.0 || m == 0) {
    const FixedPointResult b = solve_b_star(sigma, n, lambda, options);
    out.a_x_star = b.value;
    out.a_g_star = 1.0;
    out.d_bar = det_equiv_shrinkage(sigma, b.value, lambda);
    out.residual_x = b.residual;
    out.iterations = b.iterations;
    out.used_bisection = b.used_bisection;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  const Eigen::MatrixXd g_target = beta * sigma.data() + lambda_bar.data();
  auto coef_of = [&](double a_g) { return 1.0 - (1.0 - beta / a_g) * alpha; };
  auto d_of = [&](double a_x, double a_g) { return det_equiv_augmented(sigma, lambda_bar, beta, alpha, a_x, a_g, lambda); };
  auto f_x = [&](double a_g, const SpdMatrix& dm) {
    return 1.0 + coef_of(a_g) / nn * trace_product(sigma.data(), dm.data());
  };
  auto f_g = [&](const SpdMatrix& dm) { return 1.0 + (alpha / mm) * trace_product(g_target, dm.data()); };

  double a_x = 1.0;
  double a_g = 1.0;
  double prev = INFINITY;
  int iter = 0;
  for (; iter < options.max_iter; ++iter) {
    SpdMatrix dm = d_of(a_x, a_g);
    const double fx = f_x(a_g, dm);
    const double fg = f_g(dm);
    const double rx = std::abs(fx - a_x);
    const double rg = std::abs(fg - a_g);
    if (!std::isfinite(fx) || !std::isfinite(fg)) break;
    if (rx <= options.tol && rg <= options.tol) {
      out.a_x_star = a_x;
      out.a_g_star = a_g;
      out.d_bar = std::move(dm);
      out.residual_x = rx;
      out.residual_g = rg;
      out.iterations = iter;
      return out;
    }
    const double res = std::max(rx, rg);
    if (iter >= 10 && res > 0.98 * prev) break;
    prev = res;
    a_g = (1.0 - options.damping) * a_g + options.damping * fg;
    const SpdMatrix dm2 = d_of(a_x, a_g);
    a_x = (1.0 - options.damping) * a_x + options.damping * f_x(a_g, dm2);
  }

  // Bisection on a_g; for each a_g the a_x coordinate is a scalar fixed point.
  auto solve_x = [&](double ag) {
    double upper = INFINITY;
    if (lambda > 0.0) upper = 1.0 + coef_of(ag) * trace(sigma.data()) / (nn * lambda);
    else upper = 2.0;
    return detail::solve_scalar_fixed_point(
               [&](double ax) { return f_x(ag, d_of(ax, ag)); }, upper, options, "solve_augmented_det_equiv")
        .value;
  };
  auto h = [&](double ag) { return f_g(d_of(solve_x(ag), ag)) - ag; };

  double lo = 1.0;
  double hi = lambda > 0.0 ? 1.0 + (alpha / mm) * trace(g_target) / lambda : 2.0;
  for (int k = 0; k < 60 && !(h(hi) <= 0.0); ++k) hi *= 2.0;
  if (!(h(hi) <= 0.0)) throw NoConvergence("solve_augmented_det_equiv: no bracket for a_g");
  double best = lo;
  double best_res = std::abs(h(lo));
  for (int k = 0; k < 200 && best_res > options.tol; ++k, ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double v = h(mid);
    if (std::abs(v) < best_res) {
      best = mid;
      best_res = std::abs(v);
    }
    if (hi - lo <= 4e-16 * hi) break;
    if (v > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  if (!(best_res <= options.tol))
    throw NoConvergence("solve_augmented_det_equiv: residual " + std::to_string(best_res) + " above tolerance");
  out.a_g_star = best;
  out.a_x_star = solve_x(best);
  out.d_bar = d_of(out.a_x_star, out.a_g_star);
  out.residual_x = std::abs(f_x(best, out.d_bar) - out.a_x_star);
  out.residual_g = std::abs(f_g(out.d_bar) - best);
  out.iterations = iter;
  out.used_bisection = true;
  return out;
}

}  // namespace pmest
