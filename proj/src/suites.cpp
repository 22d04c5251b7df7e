#include "pmest/suites.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <random>

#include "pmest/parallel.hpp"

namespace pmest {

namespace {

std::vector<double> log_grid(double lo, double hi, int k) {
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    g[static_cast<std::size_t>(i)] =
        k == 1 ? lo : std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (k - 1.0));
  return g;
}

Eigen::MatrixXd gaussian_matrix(Index rows, Index cols, Xoshiro256& e) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(e);
  return m;
}

Check flag_check(std::string name, bool ok) { return make_check(std::move(name), ok ? 1.0 : 0.0, ">=", 1.0); }

// ---------------------------------------------------------------------------

ExperimentReport fixed_point_suite(const SuiteOptions& opt) {
  ExperimentReport rep;
  rep.name = "fixed_point";
  rep.config = {{"random_sigmas", 50}, {"lambda", 0.0}, {"tolerance", 1e-10}, {"seed", opt.seed}};
  auto e = RngStream{opt.seed, 11}.engine();
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Index d = std::uniform_int_distribution<Index>(2, 40)(e);
    const Index n = d + std::uniform_int_distribution<Index>(1, 200)(e);
    std::vector<double> spectrum(static_cast<std::size_t>(d));
    for (auto& v : spectrum) v = std::uniform_real_distribution<double>(0.2, 5.0)(e);
    const SpdMatrix sigma = build_sigma({sigma::Spectrum{spectrum, e()}, d});
    const FixedPointResult b = solve_b_star(sigma, n, 0.0);
    const double expected = 1.0 / (1.0 - static_cast<double>(d) / static_cast<double>(n));
    const double err = std::abs(b.value - expected);
    worst = std::max(worst, err);
    rep.records.push_back({{"d", d}, {"n", n}, {"b_star", b.value}, {"expected", expected}, {"abs_error", err},
                           {"bisection", b.used_bisection}});
  }
  rep.checks.push_back(make_check("max_abs_error_b_star_at_zero", worst, "<=", 1e-10));

  // Sigma = I, d/n = 1/2, lambda = 1/2: b = 1 + b / (2 + b), so b^2 = 2.
  const Index d = 100;
  const double b = solve_b_star(SpdMatrix::identity(d), 2 * d, 0.5).value;
  double lo = 1.0;
  double hi = 2.0;
  for (int k = 0; k < 200 && hi - lo > 1e-16; ++k) {
    const double mid = 0.5 * (lo + hi);
    (1.0 + 0.5 * mid / (1.0 + 0.5 * mid) - mid > 0.0 ? lo : hi) = mid;
  }
  const double bisected = 0.5 * (lo + hi);
  rep.summary = {{"max_abs_error", worst}, {"closed_form_b_star", b}, {"bisection_oracle", bisected}};
  rep.checks.push_back(make_check("closed_form_abs_error", std::abs(b - std::sqrt(2.0)), "<=", 1e-10));
  rep.checks.push_back(make_check("bisection_oracle_abs_error", std::abs(bisected - std::sqrt(2.0)), "<=", 1e-10));
  return rep;
}

ExperimentReport sherman_morrison_suite(const SuiteOptions& opt) {
  ExperimentReport rep;
  rep.name = "sherman_morrison";
  rep.config = {{"instances", 100}, {"max_dim", 64}, {"tolerance", 1e-10}, {"seed", opt.seed}};
  const RngStream root{opt.seed, 12};
  struct Out {
    double identity_err, update_err;
  };
  const auto outs = par::map(100, [&](std::size_t i) {
    auto e = root.child(i).engine();
    const Index d = std::uniform_int_distribution<Index>(2, 64)(e);
    const Index n = std::uniform_int_distribution<Index>(2, 2 * d)(e);
    const Index m = std::uniform_int_distribution<Index>(0, 50)(e);
    const double lambda = std::exp(std::uniform_real_distribution<double>(std::log(0.05), std::log(2.0))(e));
    const SampleMatrix x(gaussian_matrix(d, n, e));
    const SampleMatrix g = m > 0 ? SampleMatrix(gaussian_matrix(d, m, e)) : SampleMatrix::empty(d);
    Eigen::MatrixXd x0 = x.data();
    x0.col(0).setZero();
    const double total = static_cast<double>(n + m);
    const SpdMatrix r_full = augmented_precision(x, g, lambda);
    // Same normalisation n + m, first column removed.
    const SpdMatrix r_minus =
        resolvent(SpdMatrix((gram(SampleMatrix(x0)) + (m > 0 ? gram(g) : Eigen::MatrixXd::Zero(d, d))) / total),
                  lambda);
    const Eigen::VectorXd x1 = x.column(0);
    const Eigen::VectorXd lhs = r_full.data() * x1;
    const Eigen::VectorXd rhs = r_minus.data() * x1 / (1.0 + x1.dot(r_minus.data() * x1) / total);
    const SpdMatrix updated = rank_one_update(r_minus, x1, 1.0 / total);
    return Out{(lhs - rhs).norm(), (updated.data() - r_full.data()).norm()};
  });
  double worst_identity = 0.0;
  double worst_update = 0.0;
  for (std::size_t i = 0; i < outs.size(); ++i) {
    worst_identity = std::max(worst_identity, outs[i].identity_err);
    worst_update = std::max(worst_update, outs[i].update_err);
    rep.records.push_back({{"instance", i}, {"identity_error", outs[i].identity_err},
                           {"rank_one_update_error", outs[i].update_err}});
  }
  rep.summary = {{"max_identity_error", worst_identity}, {"max_rank_one_update_error", worst_update}};
  rep.checks.push_back(make_check("max_loo_identity_error", worst_identity, "<=", 1e-10));
  rep.checks.push_back(make_check("max_rank_one_update_error", worst_update, "<=", 1e-10));
  return rep;
}

std::vector<DaScheme> table_schemes(Index d, std::uint64_t seed) {
  auto e = RngStream{seed, 13}.engine();
  Eigen::VectorXd mu = 0.5 * gaussian_matrix(d, 1, e).col(0);
  scheme::GaussianMixtureGda mix;
  mix.weights = {0.3, 0.7};
  mix.means = {mu, (-0.3 / 0.7) * mu};
  mix.covariances = {SpdMatrix::scaled_identity(d, 0.2), SpdMatrix::scaled_identity(d, 0.5)};
  return {
      scheme::FixedGaussianGda{SpdMatrix(0.5 * build_sigma({sigma::Ar1{0.5}, d}).data())},
      mix,
      scheme::FixedGaussianTda{SpdMatrix::scaled_identity(d, 0.25)},
      scheme::RandomMaskTda{0.8},
      scheme::SaltPepperTda{0.7, 0.5},
  };
}

ExperimentReport moments_suite(const SuiteOptions& opt) {
  const Index d = 16;
  const Index n = 100;
  const Index m_mc = 200000;
  const int seeds = 20;
  ExperimentReport rep;
  rep.name = "moments";
  rep.config = {{"dim", d}, {"n", n}, {"m_mc", m_mc}, {"seeds", seeds}, {"tolerance", 0.05}, {"seed", opt.seed}};
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.3}, d});
  const auto schemes = table_schemes(d, opt.seed);
  const RngStream root{opt.seed, 14};
  for (std::size_t k = 0; k < schemes.size(); ++k) {
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
      const RngStream rs = root.child(k).child(static_cast<std::uint64_t>(s));
      const SampleMatrix x = sample_data(sigma, n, {}, rs.child(0));
      const double err = verify_decomposition(schemes[k], x, m_mc, rs.child(1));
      worst = std::max(worst, err);
      rep.records.push_back({{"scheme", scheme_name(schemes[k])}, {"seed", s}, {"rel_frobenius_error", err}});
    }
    rep.summary[scheme_name(schemes[k])] = worst;
    rep.checks.push_back(make_check("max_rel_error_" + scheme_name(schemes[k]), worst, "<=", 0.05));
  }
  return rep;
}

ExperimentReport shrinkage_fidelity_suite(const SuiteOptions& opt) {
  const Index d = 50;
  const Index n = 500;
  const int seeds = 20;
  const auto grid = log_grid(1e-3, 1.0, 25);
  ExperimentReport rep;
  rep.name = "shrinkage_fidelity";
  rep.config = {{"dim", d}, {"n", n}, {"sigma", "ar1(0.5)"}, {"lambda_grid", grid}, {"seeds", seeds},
                {"eta", "auto"}, {"max_mean_rel_deviation", 0.1}, {"min_argmin_agreement", 18},
                {"seed", opt.seed}};
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, d});
  CurveOptions co;
  co.sigma = sigma;
  co.oracle_constant = true;
  const RngStream root{opt.seed, 15};

  std::vector<double> mean_rel(grid.size(), 0.0);
  int agree = 0;
  for (int s = 0; s < seeds; ++s) {
    const SampleMatrix x = sample_data(sigma, n, {}, root.child(static_cast<std::uint64_t>(s)));
    const ErrorCurve c = lambda_curve(x, grid, co);
    std::vector<double> rel;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const auto& p = c.points[i];
      const double r = std::abs(*p.estimate - *p.oracle) / *p.oracle;
      rel.push_back(r);
      mean_rel[i] += r / seeds;
    }
    const long gap = static_cast<long>(*c.argmin_estimate) - static_cast<long>(*c.argmin_oracle);
    if (std::abs(gap) <= 1) ++agree;
    rep.records.push_back({{"seed", s}, {"argmin_estimate", *c.argmin_estimate},
                           {"argmin_oracle", *c.argmin_oracle}, {"rel_deviation", rel}});
  }
  const double worst = *std::max_element(mean_rel.begin(), mean_rel.end());
  rep.summary = {{"mean_rel_deviation_per_lambda", mean_rel}, {"argmin_agreement", agree}};
  rep.checks.push_back(make_check("max_over_grid_of_mean_rel_deviation", worst, "<=", 0.1));
  rep.checks.push_back(make_check("argmin_within_one_step", agree, ">=", 18));
  return rep;
}

ExperimentReport augmented_fidelity_suite(const SuiteOptions& opt) {
  const Index d = 50;
  const Index n = 400;
  const int seeds = 20;
  const double lambda = 0.1;
  const Index k_mc = 64;
  const std::vector<double> alphas = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  ExperimentReport rep;
  rep.name = "augmented_fidelity";
  rep.config = {{"dim", d}, {"n", n}, {"sigma", "ar1(0.5)"}, {"scheme", "fixed_gaussian_tda(0.25 I)"},
                {"lambda", lambda}, {"alpha_grid", alphas}, {"k_mc", k_mc}, {"seeds", seeds}, {"eta", "auto"},
                {"loo_quadratic", "all_columns"}, {"max_mean_rel_deviation", 0.15},
                {"min_argmin_agreement", 16}, {"seed", opt.seed}};
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, d});
  const DaScheme s = scheme::FixedGaussianTda{SpdMatrix::scaled_identity(d, 0.25)};
  CurveOptions co;
  co.sigma = sigma;
  co.oracle_constant = true;
  const RngStream root{opt.seed, 16};

  std::vector<double> mean_rel(alphas.size(), 0.0);
  int agree = 0;
  for (int sd = 0; sd < seeds; ++sd) {
    const RngStream rs = root.child(static_cast<std::uint64_t>(sd));
    const SampleMatrix x = sample_data(sigma, n, {}, rs.child(0));
    const ErrorCurve c = alpha_curve(x, s, lambda, alphas, co, k_mc, rs.child(1));
    std::vector<double> rel;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const auto& p = c.points[i];
      const double r = std::abs(*p.estimate - *p.oracle) / *p.oracle;
      rel.push_back(r);
      mean_rel[i] += r / seeds;
    }
    const long gap = static_cast<long>(*c.argmin_estimate) - static_cast<long>(*c.argmin_oracle);
    if (std::abs(gap) <= 1) ++agree;
    rep.records.push_back({{"seed", sd}, {"argmin_estimate", *c.argmin_estimate},
                           {"argmin_oracle", *c.argmin_oracle}, {"rel_deviation", rel}});
  }
  double overall = 0.0;
  for (double v : mean_rel) overall += v / static_cast<double>(mean_rel.size());
  rep.summary = {{"mean_rel_deviation_per_alpha", mean_rel}, {"mean_rel_deviation", overall},
                 {"argmin_agreement", agree}};
  rep.checks.push_back(make_check("mean_rel_deviation", overall, "<=", 0.15));
  rep.checks.push_back(make_check("argmin_within_one_step", agree, ">=", 16));
  return rep;
}

std::vector<ExperimentReport> det_equiv_suite(const SuiteOptions& opt) {
  DetEquivConfig base;
  base.sigma = {sigma::Identity{}, 1};
  base.ratio = 0.25;
  base.n_list = {200, 400, 800};
  base.lambda = 0.2;
  base.replicates = 200;
  base.factor = 0.6;
  base.seed = opt.seed;
  auto gda = [](Index d) -> DaScheme { return scheme::FixedGaussianGda{SpdMatrix::identity(d)}; };

  std::vector<ExperimentReport> out;
  out.push_back(det_equiv_convergence(base));
  DetEquivConfig a0 = base;
  a0.augmented = AugmentedVariant{gda, "gda_identity_alpha0", 0.0};
  out.push_back(det_equiv_convergence(a0));
  DetEquivConfig a5 = base;
  a5.augmented = AugmentedVariant{gda, "gda_identity_alpha0.5", 0.5};
  out.push_back(det_equiv_convergence(a5));
  for (auto& r : out) r.config["sigma"] = "identity";
  return out;
}

ExperimentReport guards_suite(const SuiteOptions& opt) {
  ExperimentReport rep;
  rep.name = "guards";
  rep.config = {{"seed", opt.seed}};
  auto e = RngStream{opt.seed, 17}.engine();

  bool indicator_ok = true;
  for (auto [d, n] : {std::pair<Index, Index>{30, 30}, {40, 20}, {31, 30}, {5, 2}})
    for (double eta : {1e-300, 1e-12, 1e-6, 1e-3, 1.0, 1e3}) {
      const SampleMatrix x(gaussian_matrix(d, n, e));
      if (indicator_eta(x, eta)) indicator_ok = false;
    }
  rep.checks.push_back(flag_check("indicator_false_when_d_ge_n", indicator_ok));

  bool singular_m = true;
  {
    const Index d = 6;
    const SampleMatrix x(gaussian_matrix(d, 40, e));
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(d);
    diag(d - 1) = 0.0;
    const std::vector<DaScheme> schemes = {scheme::FixedGaussianGda{SpdMatrix::diagonal(diag)},
                                           scheme::RandomMaskTda{1.0}, scheme::SaltPepperTda{1.0, 0.3}};
    for (const auto& s : schemes) {
      try {
        DilationFactors dil;
        dil.a_g = 1.1;
        phi_functionals(x, s, 20, 0.0, dil, EtaPolicy::automatic());
        singular_m = false;
      } catch (const SingularM&) {
      }
    }
  }
  rep.checks.push_back(flag_check("singular_lambda_g_at_lambda_zero_raises", singular_m));

  bool regime = true;
  for (auto [d, n] : {std::pair<Index, Index>{10, 10}, {11, 10}, {200, 50}}) {
    try {
      suggest_eta(1.0, n, d);
      regime = false;
    } catch (const InvalidRegime&) {
    }
  }
  rep.checks.push_back(flag_check("suggest_eta_rejects_d_ge_n", regime));
  return rep;
}

// Everything the reproducibility suite compares, serialised.
std::string reproducible_bundle(std::uint64_t seed) {
  nlohmann::json j;
  const Index d = 20;
  const Index n = 100;
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, d});
  const SampleMatrix x = sample_data(sigma, n, {}, RngStream{seed, 18});
  CurveOptions co;
  co.sigma = sigma;
  co.oracle_constant = true;
  j["lambda_curve"] = to_json(lambda_curve(x, log_grid(1e-3, 1.0, 9), co));
  j["alpha_curve"] = to_json(alpha_curve(x, scheme::FixedGaussianTda{SpdMatrix::scaled_identity(d, 0.25)}, 0.1,
                                         {0.0, 0.3, 0.6}, co, 16, RngStream{seed, 19}));
  for (const auto& s : table_schemes(d, seed)) {
    const SampleMatrix g = sample_augmented(s, x, 300, RngStream{seed, 20});
    j["sample_" + scheme_name(s)] = std::vector<double>(g.data().data(), g.data().data() + g.data().size());
  }
  ConcentrationConfig cc;
  cc.sigma = {sigma::Ar1{0.5}, d};
  cc.n = n;
  cc.replicates = 20;
  cc.seed = seed;
  j["concentration"] = concentration_experiment(cc).to_json();
  DetEquivConfig dc;
  dc.sigma = {sigma::Identity{}, 1};
  dc.n_list = {40, 80, 160};
  dc.replicates = 20;
  dc.seed = seed;
  dc.augmented = AugmentedVariant{[](Index) -> DaScheme { return scheme::RandomMaskTda{0.8}; }, "mask", 0.5};
  j["det_equiv"] = det_equiv_convergence(dc).to_json();
  const Eigen::MatrixXd big = gram(sample_data(sigma, 5000, {}, RngStream{seed, 21}));
  j["gram"] = std::vector<double>(big.data(), big.data() + big.size());
  return j.dump();
}

ExperimentReport reproducibility_suite(const SuiteOptions& opt) {
  ExperimentReport rep;
  rep.name = "reproducibility";
  rep.config = {{"thread_counts", opt.thread_counts}, {"seed", opt.seed}};
  const int saved = num_threads();
  std::vector<std::string> bundles;
  try {
    for (int t : opt.thread_counts) {
      set_num_threads(t);
      bundles.push_back(reproducible_bundle(opt.seed));
    }
  } catch (...) {
    set_num_threads(saved);
    throw;
  }
  set_num_threads(saved);
  int identical = 0;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const bool same = bundles[i] == bundles[0];
    identical += same ? 1 : 0;
    rep.records.push_back({{"threads", opt.thread_counts[i]}, {"bytes", bundles[i].size()}, {"identical", same}});
  }
  rep.checks.push_back(
      make_check("runs_identical_to_first", identical, ">=", static_cast<double>(opt.thread_counts.size())));
  return rep;
}

std::vector<ExperimentReport> concentration_suite(const SuiteOptions& opt) {
  std::vector<ExperimentReport> out;
  std::vector<double> mean_abs;
  for (Index scale : {1, 2}) {
    ConcentrationConfig cc;
    cc.sigma = {sigma::Ar1{0.5}, 50 * scale};
    cc.n = 500 * scale;
    cc.lambda = 0.1;
    cc.replicates = 50;
    cc.seed = opt.seed;
    cc.bound = 0.1;
    ExperimentReport r = concentration_experiment(cc);
    mean_abs.push_back(r.summary["mean_abs_deviation"].get<double>());
    const double rel = r.summary["mean_rel_deviation"].get<double>();
    r.config["max_mean_rel_deviation"] = 0.1;
    r.checks.push_back(make_check("mean_rel_deviation", rel, "<=", 0.1));
    out.push_back(std::move(r));
  }
  ExperimentReport ratio;
  ratio.name = "concentration_doubling";
  ratio.config = {{"dims", {50, 100}}, {"n", {500, 1000}}, {"lambda", 0.1}, {"min_reduction", 1.3}};
  ratio.summary = {{"mean_abs_deviation", mean_abs}};
  ratio.checks.push_back(make_check("mean_abs_deviation_reduction", mean_abs[0] / mean_abs[1], ">=", 1.3));
  out.push_back(std::move(ratio));
  return out;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"fixed-point",        "sherman-morrison", "moments",
                                                 "shrinkage-fidelity", "augmented-fidelity", "det-equiv",
                                                 "guards",             "reproducibility",  "concentration"};
  return names;
}

std::vector<ExperimentReport> run_suite(const std::string& name, const SuiteOptions& options) {
  if (name == "fixed-point") return {fixed_point_suite(options)};
  if (name == "sherman-morrison") return {sherman_morrison_suite(options)};
  if (name == "moments") return {moments_suite(options)};
  if (name == "shrinkage-fidelity") return {shrinkage_fidelity_suite(options)};
  if (name == "augmented-fidelity") return {augmented_fidelity_suite(options)};
  if (name == "det-equiv") return det_equiv_suite(options);
  if (name == "guards") return {guards_suite(options)};
  if (name == "reproducibility") return {reproducibility_suite(options)};
  if (name == "concentration") return concentration_suite(options);
  throw ConfigError("unknown suite '" + name + "'");
}

}  // namespace pmest
