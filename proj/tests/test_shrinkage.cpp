#include <doctest.h>

#include <cmath>
#include <functional>

#include "pmest/harness.hpp"
#include "pmest/shrinkage.hpp"
#include "pmest/synth.hpp"
#include "test_util.hpp"

using namespace pmest;
using Eigen::MatrixXd;

namespace {

// f(b) = 1 + tr(Sigma (Sigma/b + lambda I)^{-1}) / n via LU, no eigen path.
double f_lu(const MatrixXd& sigma, double n, double lambda, double b) {
  const MatrixXd inner = sigma / b + lambda * MatrixXd::Identity(sigma.rows(), sigma.cols());
  return 1.0 + (sigma * testutil::lu_inverse(inner)).trace() / n;
}

double bisect(const std::function<double(double)>& g, double lo, double hi) {
  for (int it = 0; it < 300; ++it) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> logspace(double a, double b, int k) {
  std::vector<double> g(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) g[static_cast<std::size_t>(i)] = a * std::pow(b / a, static_cast<double>(i) / (k - 1));
  return g;
}

}  // namespace

TEST_CASE("shrinkage_precision") {
  CHECK(testutil::max_abs(shrinkage_precision(SampleMatrix(MatrixXd::Zero(3, 4)), 2.0).data() -
                          0.5 * MatrixXd::Identity(3, 3)) <= 1e-15);
  MatrixXd x(1, 2);
  x << 2.0, 0.0;
  CHECK(shrinkage_precision(SampleMatrix(x), 1.0)(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const MatrixXd r = testutil::gaussian(10, 30, 1);
  const SpdMatrix c = sample_covariance(SampleMatrix(r));
  const MatrixXd res = shrinkage_precision(SampleMatrix(r), 0.05).data();
  CHECK(((c.data() + 0.05 * MatrixXd::Identity(10, 10)) * res - MatrixXd::Identity(10, 10)).norm() <= 1e-10);
  CHECK_THROWS_AS(shrinkage_precision(SampleMatrix(testutil::gaussian(10, 5, 2)), 0.0), SingularShift);
}

TEST_CASE("indicator_eta") {
  // first column is dropped; the rest are 2e1 and 2e2 -> C^- = diag(4/3, 4/3)
  MatrixXd x(2, 3);
  x << 9.0, 2.0, 0.0, 9.0, 0.0, 2.0;
  CHECK(indicator_eta(SampleMatrix(x), 1.0));
  CHECK_FALSE(indicator_eta(SampleMatrix(x), 1.4));

  CHECK_FALSE(indicator_eta(SampleMatrix(testutil::gaussian(10, 10, 3)), 1e-12));
  CHECK_FALSE(indicator_eta(SampleMatrix(testutil::gaussian(10, 8, 3)), 1e-12));

  const SampleMatrix g(testutil::gaussian(10, 100, 4));
  const double lmin = min_eigenvalue(leave_one_out_covariance(g));
  CHECK(indicator_eta(g, 0.5 * lmin));
  CHECK_FALSE(indicator_eta(g, 2.0 * lmin));
}

TEST_CASE("b_hat") {
  CHECK(b_hat(SampleMatrix(MatrixXd::Zero(4, 6)), 0.7) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(b_hat(SampleMatrix(testutil::gaussian(20, 15, 5)), 1e8) - 1.0) <= 1e-6);
  const MatrixXd x = testutil::gaussian(8, 20, 6);
  const MatrixXd c = x * x.transpose() / 20.0;
  const double tr = testutil::lu_inverse(c + 0.3 * MatrixXd::Identity(8, 8)).trace();
  const double direct = 1.0 / (1.0 - 8.0 / 20.0 + 0.3 / 20.0 * tr);
  CHECK(std::abs(b_hat(SampleMatrix(x), 0.3) - direct) <= 1e-12);
}

TEST_CASE("b_hat is at least one on the indicator event") {
  const SampleMatrix x(testutil::gaussian(10, 60, 7));
  for (double lambda : {1e-4, 1e-2, 1.0, 100.0}) CHECK(b_hat(x, lambda) >= 1.0);
}

TEST_CASE("suggest_eta") {
  CHECK(suggest_eta(1.0, 100, 25, 1.0) == doctest::Approx(std::pow(std::sqrt(0.99) - 0.5, 2)).epsilon(1e-14));
  CHECK(suggest_eta(1.0, 100, 25, 1.0) == doctest::Approx(0.24501).epsilon(1e-5));
  CHECK(suggest_eta(2.0, 100, 25, 0.7) == 2.0 * suggest_eta(1.0, 100, 25, 0.7));
  CHECK(suggest_eta(1.0, 100, 25) == 0.5 * suggest_eta(1.0, 100, 25, 1.0));
  CHECK_THROWS_AS(suggest_eta(1.0, 100, 99), InvalidRegime);
  CHECK_THROWS_AS(suggest_eta(1.0, 100, 100), InvalidRegime);
  CHECK_THROWS_AS(suggest_eta(1.0, 100, 150), InvalidRegime);
}

TEST_CASE("error estimate terms") {
  const SampleMatrix x(testutil::gaussian(5, 50, 8));
  const auto off = error_estimate_shrinkage(x, 0.1, EtaPolicy::fixed(1e6));
  CHECK_FALSE(off.indicator);
  CHECK(off.loo_term == 0.0);
  CHECK_FALSE(off.constant_term.has_value());

  const auto on = error_estimate_shrinkage(x, 0.1, EtaPolicy::fixed(1e-6), SpdMatrix::identity(5));
  CHECK(on.indicator);
  REQUIRE(on.constant_term.has_value());
  CHECK(*on.constant_term == doctest::Approx(1.0));
  // independent reassembly
  const MatrixXd c = x.data() * x.data().transpose() / 50.0;
  const MatrixXd r = testutil::lu_inverse(c + 0.1 * MatrixXd::Identity(5, 5));
  const double b = 1.0 / (1.0 - 5.0 / 50.0 + 0.1 / 50.0 * r.trace());
  CHECK(on.tr_r2_term == doctest::Approx((r * r).trace() / 5.0).epsilon(1e-12));
  CHECK(on.loo_term == doctest::Approx(-2.0 * (1.0 - 0.1) * testutil::lu_inverse(c).trace() / (0.1 * 5.0)).epsilon(1e-11));
  CHECK(on.cross_term == doctest::Approx(2.0 * r.trace() / (0.1 * b * 5.0)).epsilon(1e-12));
  CHECK(on.total() == doctest::Approx(on.tr_r2_term + on.loo_term + on.cross_term + 1.0));
}

TEST_CASE("large lambda oracle estimate tends to (1/d) tr Sigma^-2") {
  const SampleMatrix x = sample_data(SpdMatrix::identity(10), 100, {}, {5, 0});
  CHECK(std::abs(error_estimate_shrinkage(x, 1e8, {}, SpdMatrix::identity(10)).total() - 1.0) <= 1e-4);
}

TEST_CASE("ShrinkageEstimator agrees with the one-shot function") {
  const SampleMatrix x(testutil::gaussian(12, 80, 9));
  const ShrinkageEstimator est(x, {});
  for (double lambda : {0.01, 0.1, 1.0}) {
    const auto a = est.parts(lambda);
    const auto b = error_estimate_shrinkage(x, lambda, {});
    CHECK(a.total() == doctest::Approx(b.total()).epsilon(1e-12));
    CHECK(a.indicator == b.indicator);
  }
  CHECK(est.indicator());
  CHECK(*default_eta(x) == doctest::Approx(est.eta()));
}

TEST_CASE("b* closed forms") {
  const SpdMatrix s = testutil::random_spd(2, 10);
  CHECK(solve_b_star(s, 4, 0.0).value == doctest::Approx(2.0).epsilon(1e-12));

  const auto root2 = solve_b_star(SpdMatrix::identity(50), 100, 0.5);
  CHECK(std::abs(root2.value - std::sqrt(2.0)) <= 1e-10);
  const double bis = bisect([](double b) { return f_lu(MatrixXd::Identity(50, 50), 100, 0.5, b) - b; }, 1.0, 10.0);
  CHECK(std::abs(bis - std::sqrt(2.0)) <= 1e-10);

  const SpdMatrix t = build_sigma({sigma::Ar1{0.5}, 20});
  CHECK(std::abs(solve_b_star(t, 40, 1e6).value - (1.0 + t.data().trace() / (40 * 1e6))) <= 1e-8);
}

TEST_CASE("b* solves the fixed point and matches an independent bisection") {
  const FixedPointOptions opt;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const SpdMatrix s = testutil::random_spd(15, 60 + seed, 0.05);
    const Index n = 10 + static_cast<Index>(seed) * 5;
    const double lambda = 0.01 * static_cast<double>(seed + 1);
    const auto r = solve_b_star(s, n, lambda, opt);
    CHECK(std::abs(b_star_map(s, n, lambda, r.value) - r.value) <= opt.tol * 10);
    const double bis =
        bisect([&](double b) { return f_lu(s.data(), static_cast<double>(n), lambda, b) - b; }, 1.0, 1e4);
    CHECK(std::abs(bis - r.value) <= 10 * opt.tol * std::max(1.0, r.value));
  }
}

TEST_CASE("b* is non-increasing in lambda") {
  const SpdMatrix s = build_sigma({sigma::Ar1{0.5}, 30});
  double prev = INFINITY;
  for (double lambda : logspace(1e-3, 10.0, 10)) {
    const double b = solve_b_star(s, 60, lambda).value;
    CHECK(b <= prev);
    CHECK(b >= 1.0);
    prev = b;
  }
}

TEST_CASE("b* with lambda = 0 and d >= n does not converge") {
  CHECK_THROWS_AS(solve_b_star(SpdMatrix::identity(10), 10, 0.0), NoConvergence);
  CHECK_THROWS_AS(solve_b_star(SpdMatrix::identity(10), 5, 0.0), NoConvergence);
}

TEST_CASE("deterministic equivalent closed forms") {
  const SpdMatrix s = build_sigma({sigma::Ar1{0.3}, 4});
  const MatrixXd d0 = det_equiv_shrinkage(s, Index{16}, 0.0).data();
  // b* = 1 / (1 - d/n), so the equivalent is Sigma^{-1} / (1 - d/n)
  CHECK(testutil::max_abs(d0 - testutil::lu_inverse(s.data()) / 0.75) <= 1e-10);

  const MatrixXd dq = det_equiv_shrinkage(SpdMatrix::identity(50), Index{100}, 0.5).data();
  const double v = 1.0 / (1.0 / std::sqrt(2.0) + 0.5);
  CHECK(testutil::max_abs(dq - v * MatrixXd::Identity(50, 50)) <= 1e-10);
  CHECK(v == doctest::Approx(0.8284).epsilon(1e-4));

  const MatrixXd dl = det_equiv_shrinkage(s, Index{16}, 1e6).data();
  CHECK(testutil::max_abs(dl * 1e6 - MatrixXd::Identity(4, 4)) <= 1e-5);
}

TEST_CASE("oracle estimate tracks the true error over seeds") {
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, 50});
  double rel = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampleMatrix x = sample_data(sigma, 500, {}, {1000 + seed, 0});
    const double est = error_estimate_shrinkage(x, 0.1, {}, sigma).total();
    const double truth = oracle_error(shrinkage_precision(x, 0.1), sigma);
    rel += std::abs(est - truth) / truth;
  }
  rel /= 20.0;
  CAPTURE(rel);
  CHECK(rel < 0.1);
}

TEST_CASE("relative-mode argmin is within one grid step of the oracle argmin") {
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, 50});
  const auto grid = logspace(1e-3, 1.0, 25);
  int agree = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampleMatrix x = sample_data(sigma, 500, {}, {2000 + seed, 0});
    CurveOptions opt;
    opt.sigma = sigma;
    const ErrorCurve c = lambda_curve(x, grid, opt);
    REQUIRE(c.argmin_estimate);
    REQUIRE(c.argmin_oracle);
    const auto a = static_cast<long>(*c.argmin_estimate);
    const auto b = static_cast<long>(*c.argmin_oracle);
    if (std::abs(a - b) <= 1) ++agree;
  }
  CHECK(agree >= 18);
}

TEST_CASE("deterministic equivalent error shrinks with n") {
  DetEquivConfig cfg;
  cfg.sigma = {sigma::Ar1{0.5}, 1};
  cfg.ratio = 0.25;
  cfg.n_list = {200, 400, 800};
  cfg.lambda = 0.2;
  cfg.replicates = 200;
  cfg.seed = 31;
  const ExperimentReport rep = det_equiv_convergence(cfg);
  for (const auto& c : rep.checks) {
    CAPTURE(c.name);
    CAPTURE(c.value);
    CHECK(c.passed);
  }
}
