#include "pmest/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "pmest/parallel.hpp"

namespace pmest {

namespace {

double squared_distance_over_d(const SpdMatrix& r, const Eigen::MatrixXd& target) {
  if (r.dim() != target.rows()) throw DimensionMismatch("error functional: dimensions differ");
  const Eigen::MatrixXd diff = r.data() - target;
  std::vector<double> cols(static_cast<std::size_t>(diff.cols()));
  for (Index j = 0; j < diff.cols(); ++j) cols[static_cast<std::size_t>(j)] = diff.col(j).squaredNorm();
  return pairwise_sum(cols) / static_cast<double>(r.dim());
}

Eigen::MatrixXd checked_inverse(const SpdMatrix& sigma, const char* what) {
  if (!(sigma.min_eigenvalue() > kSingularTol))
    throw SingularSigma(std::string(what) + ": covariance is not strictly positive definite");
  return inverse(sigma).data();
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double quantile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanStderr mean_stderr(const std::vector<double>& v) {
  MeanStderr out;
  out.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() > 1) {
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) sq[i] = (v[i] - out.mean) * (v[i] - out.mean);
    out.stderr_ = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  }
  return out;
}

// Inverses needed by the oracle and proxy columns, computed once per curve.
struct Targets {
  std::optional<Eigen::MatrixXd> sigma_inv;
  std::optional<Eigen::MatrixXd> full_inv;
  std::optional<SpdMatrix> oracle_sigma;
};

Targets prepare_targets(const CurveOptions& options, Index d) {
  Targets t;
  if (options.sigma) {
    if (options.sigma->dim() != d) throw DimensionMismatch("curve: sigma dimension differs from data");
    t.sigma_inv = checked_inverse(*options.sigma, "oracle_error");
  }
  if (options.full_covariance) {
    if (options.full_covariance->dim() != d) throw DimensionMismatch("curve: full covariance dimension differs");
    t.full_inv = checked_inverse(*options.full_covariance, "proxy_error");
  }
  if (options.oracle_constant) {
    if (!options.sigma) throw InvalidInput("curve: oracle mode needs sigma");
    t.oracle_sigma = options.sigma;
  }
  return t;
}

void fill_references(CurvePoint& p, const SpdMatrix& r, const Targets& t) {
  if (t.sigma_inv) p.oracle = squared_distance_over_d(r, *t.sigma_inv);
  if (t.full_inv) p.proxy = squared_distance_over_d(r, *t.full_inv);
}

void finish_curve(ErrorCurve& c) {
  std::vector<std::optional<double>> est, orc, prx;
  for (const auto& p : c.points) {
    est.push_back(p.estimate);
    orc.push_back(p.oracle);
    prx.push_back(p.proxy);
  }
  c.argmin_estimate = first_argmin(est);
  c.argmin_oracle = first_argmin(orc);
  c.argmin_proxy = first_argmin(prx);
}

}  // namespace

double oracle_error(const SpdMatrix& r, const SpdMatrix& sigma) {
  return squared_distance_over_d(r, checked_inverse(sigma, "oracle_error"));
}

double proxy_error(const SpdMatrix& r, const SpdMatrix& sigma_full) {
  return squared_distance_over_d(r, checked_inverse(sigma_full, "proxy_error"));
}

std::string to_string(CurveAxis axis) { return axis == CurveAxis::lambda ? "lambda" : "alpha"; }

nlohmann::json to_json(const ErrorCurve& curve) {
  auto opt = [](const auto& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["axis"] = to_string(curve.axis);
  j["points"] = nlohmann::json::array();
  for (const auto& p : curve.points)
    j["points"].push_back({{"hyperparam", p.hyperparam}, {"m", p.m}, {"estimate", opt(p.estimate)},
                           {"oracle", opt(p.oracle)}, {"proxy", opt(p.proxy)}, {"flags", p.flags}});
  j["argmin_estimate"] = opt(curve.argmin_estimate);
  j["argmin_oracle"] = opt(curve.argmin_oracle);
  j["argmin_proxy"] = opt(curve.argmin_proxy);
  return j;
}

std::optional<std::size_t> first_argmin(const std::vector<std::optional<double>>& values) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!values[i] || !std::isfinite(*values[i])) continue;
    if (!best || *values[i] < *values[*best]) best = i;
  }
  return best;
}

ErrorCurve lambda_curve(const SampleMatrix& x, std::vector<double> lambda_grid, const CurveOptions& options) {
  if (lambda_grid.empty()) throw InvalidInput("lambda_curve: empty grid");
  std::sort(lambda_grid.begin(), lambda_grid.end());
  const Targets t = prepare_targets(options, x.dim());
  const ShrinkageEstimator est(x, options.eta, t.oracle_sigma);

  ErrorCurve c;
  c.axis = CurveAxis::lambda;
  c.points = par::map(lambda_grid.size(), [&](std::size_t i) {
    CurvePoint p;
    p.hyperparam = lambda_grid[i];
    try {
      const ShrinkageErrorParts parts = est.parts(p.hyperparam);
      p.estimate = parts.total();
      p.flags = "indicator=" + std::to_string(parts.indicator ? 1 : 0) + ";eta=" + fmt(parts.eta) +
                ";b_hat=" + fmt(parts.b_hat);
      if (parts.singular_r0) p.flags += ";singular_r0";
      fill_references(p, est.precision(p.hyperparam), t);
    } catch (const Error& e) {
      p.estimate.reset();
      p.flags = std::string("error=") + e.what();
    }
    return p;
  });
  finish_curve(c);
  return c;
}

ErrorCurve alpha_curve_m(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<Index> m_grid,
                         const CurveOptions& options, Index k_mc, const RngStream& rng, DilationOptions dilation) {
  if (m_grid.empty()) throw InvalidInput("alpha_curve: empty grid");
  std::sort(m_grid.begin(), m_grid.end());
  const Targets t = prepare_targets(options, x.dim());
  validate_scheme(s, x.dim());

  ErrorCurve c;
  c.axis = CurveAxis::alpha;
  c.points = par::map(m_grid.size(), [&](std::size_t i) {
    CurvePoint p;
    p.m = m_grid[i];
    p.hyperparam = augmentation_ratio(x.samples(), p.m);
    try {
      const AugmentedErrorParts parts =
          error_estimate_augmented(x, s, p.m, lambda, options.eta, t.oracle_sigma, k_mc, rng, dilation);
      p.estimate = parts.total();
      p.flags = "m=" + std::to_string(p.m) + ";indicator=" + std::to_string(parts.indicator ? 1 : 0) +
                ";eta=" + fmt(parts.eta) + ";a_x=" + fmt(parts.dilation.a_x) + ";a_g=" + fmt(parts.dilation.a_g);
      if (parts.dilation.dropped > 0) p.flags += ";dropped=" + std::to_string(parts.dilation.dropped);
      fill_references(p, *parts.precision, t);
    } catch (const Error& e) {
      p.estimate.reset();
      p.flags = "m=" + std::to_string(p.m) + ";error=" + e.what();
    }
    return p;
  });
  finish_curve(c);
  return c;
}

ErrorCurve alpha_curve(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<double> alpha_grid,
                       const CurveOptions& options, Index k_mc, const RngStream& rng, DilationOptions dilation) {
  if (alpha_grid.empty()) throw InvalidInput("alpha_curve: empty grid");
  std::vector<Index> m_grid;
  for (double a : alpha_grid) m_grid.push_back(samples_for_ratio(a, x.samples()));
  return alpha_curve_m(x, s, lambda, std::move(m_grid), options, k_mc, rng, dilation);
}

double golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol,
                               int max_iter) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  for (int i = 0; i < max_iter && std::abs(b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? c : d;
}

TuneResult tune_lambda(const SampleMatrix& x, std::vector<double> lambda_grid, const CurveOptions& options,
                       bool refine) {
  TuneResult out;
  out.curve = lambda_curve(x, std::move(lambda_grid), options);
  if (!out.curve.argmin_estimate) throw NoConvergence("tune: no grid point produced an estimate");
  const std::size_t i = *out.curve.argmin_estimate;
  const auto& pts = out.curve.points;
  out.best = pts[i].hyperparam;
  out.best_value = *pts[i].estimate;
  if (!refine || i == 0 || i + 1 >= pts.size() || !pts[i - 1].estimate || !pts[i + 1].estimate) return out;

  const ShrinkageEstimator est(x, options.eta,
                               options.oracle_constant ? options.sigma : std::optional<SpdMatrix>{});
  auto f = [&](double t) {
    try {
      return est.parts(std::exp(t)).total();
    } catch (const Error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const double t = golden_section_minimize(f, std::log(pts[i - 1].hyperparam), std::log(pts[i + 1].hyperparam));
  const double v = f(t);
  if (v < out.best_value) {
    out.best = std::exp(t);
    out.best_value = v;
    out.refined = true;
  }
  return out;
}

TuneResult tune_alpha(const SampleMatrix& x, const DaScheme& s, double lambda, std::vector<double> alpha_grid,
                      const CurveOptions& options, Index k_mc, const RngStream& rng, DilationOptions dilation) {
  TuneResult out;
  out.curve = alpha_curve(x, s, lambda, std::move(alpha_grid), options, k_mc, rng, dilation);
  if (!out.curve.argmin_estimate) throw NoConvergence("tune: no grid point produced an estimate");
  const auto& p = out.curve.points[*out.curve.argmin_estimate];
  out.best = p.hyperparam;
  out.best_value = *p.estimate;
  return out;
}

Check make_check(std::string name, double value, std::string comparison, double threshold) {
  Check c{std::move(name), value, std::move(comparison), threshold, false};
  if (c.comparison == "<=")
    c.passed = value <= threshold;
  else if (c.comparison == ">=")
    c.passed = value >= threshold;
  else
    throw InvalidInput("check: unknown comparison " + c.comparison);
  return c;
}

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["name"] = name;
  j["config"] = config;
  j["summary"] = summary;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks)
    j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"comparison", c.comparison},
                           {"threshold", c.threshold}, {"passed", c.passed}});
  j["records"] = records;
  j["passed"] = passed();
  return j;
}

ExperimentReport concentration_experiment(const ConcentrationConfig& cfg) {
  if (cfg.replicates < 20) throw InvalidInput("concentration_experiment: needs at least 20 replicates");
  const SpdMatrix sigma = build_sigma(cfg.sigma);
  const Eigen::MatrixXd sigma_inv = checked_inverse(sigma, "concentration_experiment");
  const RngStream root{cfg.seed, 0};

  struct Rep {
    double estimate, oracle;
  };
  const auto reps = par::map(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
    const SampleMatrix x = sample_data(sigma, cfg.n, cfg.noise, root.child(r));
    const ShrinkageEstimator est(x, cfg.eta, sigma);
    return Rep{est.parts(cfg.lambda).total(), squared_distance_over_d(est.precision(cfg.lambda), sigma_inv)};
  });

  ExperimentReport rep;
  rep.name = "concentration";
  rep.config = {{"dim", cfg.sigma.dim}, {"n", cfg.n}, {"lambda", cfg.lambda},
                {"eta", cfg.eta.value ? nlohmann::json(*cfg.eta.value) : nlohmann::json("auto")},
                {"replicates", cfg.replicates}, {"noise", to_string(cfg.noise.dist)}, {"seed", cfg.seed},
                {"bound_p95_abs_deviation", cfg.bound}};
  std::vector<double> abs_dev, rel_dev;
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const double a = std::abs(reps[r].estimate - reps[r].oracle);
    abs_dev.push_back(a);
    rel_dev.push_back(a / reps[r].oracle);
    rep.records.push_back({{"replicate", r}, {"estimate", reps[r].estimate}, {"oracle", reps[r].oracle},
                           {"abs_deviation", a}, {"rel_deviation", a / reps[r].oracle}});
  }
  const MeanStderr ms = mean_stderr(abs_dev);
  const double p95 = quantile(abs_dev, 0.95);
  rep.summary = {{"mean_abs_deviation", ms.mean}, {"stderr_abs_deviation", ms.stderr_},
                 {"p95_abs_deviation", p95}, {"mean_rel_deviation", mean_stderr(rel_dev).mean}};
  rep.checks.push_back(make_check("p95_abs_deviation", p95, "<=", cfg.bound));
  return rep;
}

ExperimentReport det_equiv_convergence(const DetEquivConfig& cfg) {
  if (cfg.n_list.size() < 3) throw InvalidInput("det_equiv_convergence: needs at least 3 sample sizes");
  if (!std::is_sorted(cfg.n_list.begin(), cfg.n_list.end()) ||
      std::adjacent_find(cfg.n_list.begin(), cfg.n_list.end()) != cfg.n_list.end())
    throw InvalidInput("det_equiv_convergence: n list must be strictly ascending");
  if (cfg.replicates < 2) throw InvalidInput("det_equiv_convergence: needs at least 2 replicates");

  ExperimentReport rep;
  rep.name = cfg.augmented ? "det_equiv_augmented_" + cfg.augmented->label : std::string("det_equiv_shrinkage");
  rep.config = {{"ratio", cfg.ratio}, {"n_list", cfg.n_list}, {"lambda", cfg.lambda},
                {"test_matrix", cfg.test_matrix == TestMatrix::sigma_inverse_normalized ? "sigma_inverse_normalized"
                                                                                      : "identity_normalized"},
                {"replicates", cfg.replicates}, {"noise", to_string(cfg.noise.dist)}, {"seed", cfg.seed},
                {"max_ratio_per_step", cfg.factor}};
  if (cfg.augmented) {
    rep.config["scheme"] = cfg.augmented->label;
    rep.config["alpha"] = cfg.augmented->alpha;
  }

  const RngStream root{cfg.seed, 1};
  std::vector<double> metrics;
  for (std::size_t a = 0; a < cfg.n_list.size(); ++a) {
    const Index n = cfg.n_list[a];
    SigmaSpec spec = cfg.sigma;
    spec.dim = std::max<Index>(1, static_cast<Index>(std::llround(cfg.ratio * static_cast<double>(n))));
    const Index d = spec.dim;
    const SpdMatrix sigma = build_sigma(spec);

    Eigen::MatrixXd b;
    if (cfg.test_matrix == TestMatrix::sigma_inverse_normalized) {
      b = checked_inverse(sigma, "det_equiv_convergence");
      b /= b.norm();
    } else {
      b = Eigen::MatrixXd::Identity(d, d) / std::sqrt(static_cast<double>(d));
    }

    Index m = 0;
    std::optional<DaScheme> scheme;
    SpdMatrix d_bar = SpdMatrix::zero(d);
    if (cfg.augmented) {
      scheme = cfg.augmented->scheme(d);
      m = samples_for_ratio(cfg.augmented->alpha, n);
      const double alpha = augmentation_ratio(n, m);
      const double beta = moment_decomposition(*scheme, SampleMatrix(Eigen::MatrixXd::Zero(d, 1))).beta;
      const SpdMatrix lambda_bar = population_lambda_g(*scheme, sigma);
      d_bar = solve_augmented_det_equiv(sigma, lambda_bar, beta, alpha, n, m, cfg.lambda).d_bar;
    } else {
      d_bar = det_equiv_shrinkage(sigma, n, cfg.lambda);
    }
    const double target = trace_product(b, d_bar.data()) / static_cast<double>(d);

    const RngStream level = root.child(a);
    const std::vector<double> traces = par::map(static_cast<std::size_t>(cfg.replicates), [&](std::size_t r) {
      const RngStream rs = level.child(r);
      const SampleMatrix x = sample_data(sigma, n, cfg.noise, rs.child(0));
      SpdMatrix rm = scheme ? augmented_precision(x, sample_augmented(*scheme, x, m, rs.child(1)), cfg.lambda)
                            : shrinkage_precision(x, cfg.lambda);
      return trace_product(b, rm.data()) / static_cast<double>(d);
    });
    const MeanStderr ms = mean_stderr(traces);
    const double metric = std::abs(ms.mean - target);
    metrics.push_back(metric);
    rep.records.push_back({{"n", n}, {"d", d}, {"m", m}, {"mc_mean", ms.mean}, {"mc_stderr", ms.stderr_},
                           {"det_equiv", target}, {"metric", metric}});
  }

  nlohmann::json ratios = nlohmann::json::array();
  for (std::size_t a = 1; a < metrics.size(); ++a) {
    const double ratio = metrics[a - 1] > 0.0 ? metrics[a] / metrics[a - 1] : std::numeric_limits<double>::infinity();
    ratios.push_back(ratio);
    rep.checks.push_back(make_check("ratio_n" + std::to_string(cfg.n_list[a]) + "_over_n" +
                                        std::to_string(cfg.n_list[a - 1]),
                                    ratio, "<=", cfg.factor));
  }
  rep.summary = {{"metrics", metrics}, {"ratios", ratios}};
  return rep;
}

MixtureFit fit_mixture(const SampleMatrix& x, Index k, const RngStream& rng, int iters) {
  const Index d = x.dim();
  const Index n = x.samples();
  if (k < 1 || k > n) throw InvalidInput("fit_mixture: need 1 <= k <= n");
  if (iters < 1) throw InvalidInput("fit_mixture: iters must be >= 1");
  const Eigen::MatrixXd& xd = x.data();
  const double dd = static_cast<double>(d);
  const double total_var = (xd.colwise() - xd.rowwise().mean()).squaredNorm() / (static_cast<double>(n) * dd);
  const double var_floor = std::max(1e-10, 1e-8 * total_var);

  for (int attempt = 0; attempt <= 5; ++attempt) {
    auto engine = rng.child(static_cast<std::uint64_t>(attempt)).engine();

    // k-means++ seeding.
    Eigen::MatrixXd mu(d, k);
    std::uniform_int_distribution<Index> first(0, n - 1);
    mu.col(0) = xd.col(first(engine));
    Eigen::VectorXd dist2 = (xd.colwise() - mu.col(0)).colwise().squaredNorm().transpose();
    for (Index c = 1; c < k; ++c) {
      Index pick = 0;
      const double sum = dist2.sum();
      if (sum > 0.0) {
        std::discrete_distribution<Index> dd2(dist2.data(), dist2.data() + n);
        pick = dd2(engine);
      } else {
        pick = first(engine);
      }
      mu.col(c) = xd.col(pick);
      dist2 = dist2.cwiseMin((xd.colwise() - mu.col(c)).colwise().squaredNorm().transpose());
    }
    const double init_var = std::max(var_floor, dist2.sum() / (static_cast<double>(n) * dd));
    std::vector<double> var(static_cast<std::size_t>(k), init_var);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));

    Eigen::MatrixXd resp(n, k);
    double prev_ll = -std::numeric_limits<double>::infinity();
    double ll = prev_ll;
    bool degenerate = false;
    int it = 0;
    for (; it < iters; ++it) {
      // E-step in log space.
      for (Index c = 0; c < k; ++c) {
        const double v = var[static_cast<std::size_t>(c)];
        const double logc = std::log(w(c)) - 0.5 * dd * std::log(2.0 * M_PI * v);
        resp.col(c) = (logc - (xd.colwise() - mu.col(c)).colwise().squaredNorm().array() / (2.0 * v)).transpose();
      }
      std::vector<double> row_ll(static_cast<std::size_t>(n));
      for (Index i = 0; i < n; ++i) {
        const double mx = resp.row(i).maxCoeff();
        const double s = (resp.row(i).array() - mx).exp().sum();
        row_ll[static_cast<std::size_t>(i)] = mx + std::log(s);
        resp.row(i) = (resp.row(i).array() - row_ll[static_cast<std::size_t>(i)]).exp();
      }
      ll = pairwise_sum(row_ll);

      // M-step.
      const Eigen::VectorXd nk = resp.colwise().sum().transpose();
      if (nk.minCoeff() < 1e-8) {
        degenerate = true;
        break;
      }
      w = nk / static_cast<double>(n);
      mu = (xd * resp).array().rowwise() / nk.transpose().array();
      for (Index c = 0; c < k; ++c) {
        const double ss = (resp.col(c).transpose().array() *
                           (xd.colwise() - mu.col(c)).colwise().squaredNorm().array())
                              .sum();
        var[static_cast<std::size_t>(c)] = std::max(var_floor, ss / (dd * nk(c)));
      }
      if (std::abs(ll - prev_ll) <= 1e-10 * std::max(1.0, std::abs(ll))) break;
      prev_ll = ll;
    }
    if (degenerate) continue;

    MixtureFit fit;
    fit.restarts = attempt;
    fit.iterations = it;
    fit.log_likelihood = ll;
    fit.variances = var;
    w /= w.sum();
    fit.shift = mu * w;
    for (Index c = 0; c < k; ++c) {
      fit.mixture.weights.push_back(w(c));
      fit.mixture.means.push_back(mu.col(c) - fit.shift);
      fit.mixture.covariances.push_back(SpdMatrix::scaled_identity(d, var[static_cast<std::size_t>(c)]));
    }
    return fit;
  }
  throw DegenerateCluster("fit_mixture: a component emptied out in every restart");
}

}  // namespace pmest
