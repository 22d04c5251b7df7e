#include <doctest.h>

#include <cmath>

#include "pmest/harness.hpp"
#include "pmest/synth.hpp"
#include "test_util.hpp"

using namespace pmest;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

std::vector<double> logspace(double a, double b, int k) {
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) g[static_cast<std::size_t>(i)] = a * std::pow(b / a, static_cast<double>(i) / (k - 1));
  return g;
}

}  // namespace

TEST_CASE("oracle_error") {
  const SpdMatrix s = testutil::random_spd(6, 1);
  CHECK(oracle_error(inverse(s), s) <= 1e-24);
  CHECK(oracle_error(SpdMatrix::zero(9), SpdMatrix::identity(9)) == doctest::Approx(1.0));
  const SpdMatrix r = testutil::random_spd(6, 2);
  const MatrixXd sinv = testutil::lu_inverse(s.data());
  double acc = 0.0;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) acc += (r(i, j) - sinv(i, j)) * (r(i, j) - sinv(i, j));
  CHECK(std::abs(oracle_error(r, s) - acc / 6.0) <= 1e-12);
  CHECK_THROWS_AS(oracle_error(r, SpdMatrix::zero(6)), SingularSigma);
}

TEST_CASE("proxy_error") {
  const SpdMatrix s = testutil::random_spd(5, 3);
  const SpdMatrix r = testutil::random_spd(5, 4);
  CHECK(proxy_error(inverse(s), s) <= 1e-24);
  CHECK(proxy_error(r, s) == oracle_error(r, s));
  CHECK_THROWS_AS(proxy_error(r, SpdMatrix::zero(5)), SingularSigma);
}

TEST_CASE("proxy error from a large sample approximates the oracle") {
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, 20});
  const SampleMatrix full = sample_data(sigma, 100000, {}, {8, 0});
  const SampleMatrix x(full.data().leftCols(500));
  const SpdMatrix r = shrinkage_precision(x, 0.1);
  const double o = oracle_error(r, sigma);
  const double p = proxy_error(r, sample_covariance(full));
  CHECK(std::abs(p - o) / o < 0.05);
}

TEST_CASE("lambda curve argmins") {
  const SampleMatrix x = sample_data(SpdMatrix::identity(10), 60, {}, {1, 0});
  CurveOptions opt;
  opt.sigma = SpdMatrix::identity(10);
  opt.oracle_constant = true;
  const ErrorCurve one = lambda_curve(x, {0.3}, opt);
  CHECK(one.argmin_estimate == std::optional<std::size_t>{0});
  CHECK(one.argmin_oracle == std::optional<std::size_t>{0});

  const ErrorCurve c = lambda_curve(x, {1e8, 0.1, 1.0}, opt);
  CHECK(c.points.front().hyperparam == 0.1);
  CHECK(c.points.back().hyperparam == 1e8);
  CHECK(std::abs(*c.points.back().estimate - 1.0) <= 1e-3);
  for (const auto& p : c.points) {
    CHECK(std::isfinite(*p.estimate));
    CHECK(std::isfinite(*p.oracle));
  }
  CHECK(first_argmin({std::nullopt, 2.0, 1.0, 1.0}) == std::optional<std::size_t>{2});
  CHECK_FALSE(first_argmin({std::nullopt}).has_value());
}

TEST_CASE("curves are deterministic") {
  const SampleMatrix x = sample_data(SpdMatrix::identity(8), 50, {}, {2, 0});
  const DaScheme s = scheme::RandomMaskTda{0.8};
  CurveOptions opt;
  opt.sigma = SpdMatrix::identity(8);
  const auto a = to_json(alpha_curve(x, s, 0.1, {0.0, 0.3, 0.6}, opt, 8, {3, 3})).dump();
  const auto b = to_json(alpha_curve(x, s, 0.1, {0.0, 0.3, 0.6}, opt, 8, {3, 3})).dump();
  CHECK(a == b);
  const auto c = alpha_curve(x, s, 0.1, {0.5}, opt, 8, {3, 3});
  CHECK(c.points[0].m == 50);
}

TEST_CASE("lambda-curve argmin follows the oracle over seeds") {
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, 50});
  const auto grid = logspace(1e-3, 1.0, 25);
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampleMatrix x = sample_data(sigma, 500, {}, {5000 + seed, 0});
    CurveOptions opt;
    opt.sigma = sigma;
    const ErrorCurve c = lambda_curve(x, grid, opt);
    if (std::abs(static_cast<long>(*c.argmin_estimate) - static_cast<long>(*c.argmin_oracle)) <= 1) ++agree;
  }
  CHECK(agree >= 18);
}

TEST_CASE("golden-section search and tuning") {
  CHECK(golden_section_minimize([](double t) { return (t - 1.3) * (t - 1.3); }, 0.0, 4.0) ==
        doctest::Approx(1.3).epsilon(1e-7));
  const SampleMatrix x = sample_data(build_sigma({sigma::Ar1{0.5}, 20}), 200, {}, {6, 0});
  const TuneResult single = tune_lambda(x, {0.25}, {}, true);
  CHECK(single.best == 0.25);
  const TuneResult t = tune_lambda(x, logspace(1e-3, 1.0, 13), {}, true);
  CHECK(t.refined);
  const double grid_best = t.curve.points[*t.curve.argmin_estimate].hyperparam;
  CHECK(t.best_value <= *t.curve.points[*t.curve.argmin_estimate].estimate + 1e-12);
  CHECK(t.best >= grid_best / std::pow(1e3, 1.0 / 12) * (1 - 1e-12));
  CHECK(t.best <= grid_best * std::pow(1e3, 1.0 / 12) * (1 + 1e-12));
}

TEST_CASE("concentration: dominant shift collapses both sides") {
  ConcentrationConfig cfg;
  cfg.sigma = {sigma::Identity{}, 10};
  cfg.n = 50;
  cfg.lambda = 1e8;
  cfg.replicates = 20;
  cfg.seed = 4;
  const ExperimentReport rep = concentration_experiment(cfg);
  REQUIRE(rep.records.size() == 20);
  for (const auto& r : rep.records) CHECK(r["abs_deviation"].get<double>() <= 1e-3);
  CHECK(rep.passed());
  cfg.replicates = 19;
  CHECK_THROWS_AS(concentration_experiment(cfg), InvalidInput);
}

TEST_CASE("concentration: deviation falls when n doubles") {
  ConcentrationConfig cfg;
  cfg.sigma = {sigma::Ar1{0.5}, 50};
  cfg.n = 500;
  cfg.lambda = 0.1;
  cfg.replicates = 50;
  cfg.seed = 9;
  const ExperimentReport small = concentration_experiment(cfg);
  cfg.sigma.dim = 100;
  cfg.n = 1000;
  const ExperimentReport large = concentration_experiment(cfg);
  const double a = small.summary["mean_abs_deviation"].get<double>();
  const double b = large.summary["mean_abs_deviation"].get<double>();
  CAPTURE(a);
  CAPTURE(b);
  CHECK(a / b >= 1.3);
}

TEST_CASE("concentration: relative deviation at d=50, n=500") {
  ConcentrationConfig cfg;
  cfg.sigma = {sigma::Ar1{0.5}, 50};
  cfg.n = 500;
  cfg.lambda = 0.1;
  cfg.replicates = 50;
  cfg.seed = 10;
  const ExperimentReport rep = concentration_experiment(cfg);
  const double rel = rep.summary["mean_rel_deviation"].get<double>();
  CAPTURE(rel);
  CHECK(rel < 0.1);
}

TEST_CASE("det_equiv_convergence") {
  DetEquivConfig cfg;
  cfg.sigma = {sigma::Identity{}, 1};
  cfg.ratio = 0.25;
  cfg.n_list = {40, 80, 160};
  cfg.lambda = 1e6;
  cfg.replicates = 20;
  cfg.seed = 3;
  const auto big = det_equiv_convergence(cfg);
  for (double v : big.summary["metrics"]) CHECK(v <= 1e-6);

  cfg.n_list = {200, 400, 800};
  cfg.lambda = 0.2;
  cfg.replicates = 200;
  cfg.test_matrix = TestMatrix::identity_normalized;
  const auto shr = det_equiv_convergence(cfg);
  const auto& m = shr.summary["metrics"];
  CHECK(m[1].get<double>() < m[0].get<double>());
  CHECK(m[2].get<double>() < m[1].get<double>());

  cfg.augmented = AugmentedVariant{[](Index d) { return DaScheme{scheme::FixedGaussianGda{SpdMatrix::identity(d)}}; },
                                   "gda", 0.0};
  const auto aug = det_equiv_convergence(cfg);
  for (std::size_t i = 0; i < 3; ++i) {
    const double diff = std::abs(aug.records[i]["mc_mean"].get<double>() - shr.records[i]["mc_mean"].get<double>());
    CHECK(diff <= 2.0 * shr.records[i]["mc_stderr"].get<double>());
  }
  cfg.n_list = {200, 400};
  CHECK_THROWS_AS(det_equiv_convergence(cfg), InvalidInput);
}

TEST_CASE("fit_mixture with one component is the centred mean") {
  const SampleMatrix x(testutil::gaussian(3, 40, 5).array() + 2.0);
  const MixtureFit f = fit_mixture(x, 1, {1, 0});
  CHECK(f.mixture.weights.size() == 1);
  CHECK(f.mixture.weights[0] == doctest::Approx(1.0));
  CHECK(f.mixture.means[0].norm() <= 1e-12);
  CHECK((f.shift - x.data().rowwise().mean()).norm() <= 1e-12);
}

TEST_CASE("fit_mixture recovers two separated blobs") {
  const Index d = 2;
  MatrixXd x = testutil::gaussian(d, 1000, 6);
  VectorXd c1(d), c2(d);
  c1 << 6.0, 0.0;
  c2 << -6.0, 2.0;
  x.leftCols(500).colwise() += c1;
  x.rightCols(500).colwise() += c2;
  const MixtureFit f = fit_mixture(SampleMatrix(x), 2, {2, 0});
  std::vector<VectorXd> centres;
  for (const auto& mu : f.mixture.means) centres.push_back(mu + f.shift);
  if (centres[0](0) < centres[1](0)) std::swap(centres[0], centres[1]);
  CHECK((centres[0] - c1).norm() < 0.1);
  CHECK((centres[1] - c2).norm() < 0.1);
  VectorXd centred = VectorXd::Zero(d);
  for (std::size_t i = 0; i < 2; ++i) centred += f.mixture.weights[i] * f.mixture.means[i];
  CHECK(centred.norm() <= 1e-10);
  CHECK_NOTHROW(validate_scheme(f.mixture, d));
}

TEST_CASE("fit_mixture with one component per sample") {
  const SampleMatrix x(testutil::gaussian(3, 12, 7));
  const MixtureFit f = fit_mixture(x, 12, {3, 0});
  double w = 0.0;
  for (double v : f.mixture.weights) w += v;
  CHECK(std::abs(w - 1.0) <= 1e-12);
  CHECK_THROWS_AS(fit_mixture(x, 13, {3, 0}), InvalidInput);
}

TEST_CASE("reports serialise with their thresholds") {
  ExperimentReport r;
  r.name = "demo";
  r.checks.push_back(make_check("value", 0.5, "<=", 1.0));
  r.checks.push_back(make_check("other", 0.5, ">=", 1.0));
  CHECK(r.checks[0].passed);
  CHECK_FALSE(r.checks[1].passed);
  CHECK_FALSE(r.passed());
  const auto j = r.to_json();
  CHECK(j["checks"][1]["threshold"].get<double>() == 1.0);
  CHECK(j["passed"].get<bool>() == false);
}
