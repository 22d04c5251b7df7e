#include <doctest.h>

#include <cmath>

#include "pmest/augmentation.hpp"
#include "pmest/synth.hpp"
#include "test_util.hpp"

using namespace pmest;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

scheme::GaussianMixtureGda two_blob_mixture(Index d) {
  VectorXd mu = VectorXd::Zero(d);
  mu(0) = 1.5;
  return {{0.5, 0.5}, {mu, -mu}, {SpdMatrix::scaled_identity(d, 0.3), SpdMatrix::scaled_identity(d, 0.6)}};
}

std::vector<DaScheme> all_schemes(Index d) {
  return {scheme::FixedGaussianGda{SpdMatrix::identity(d)}, two_blob_mixture(d),
          scheme::FixedGaussianTda{SpdMatrix::scaled_identity(d, 0.5)}, scheme::RandomMaskTda{0.7},
          scheme::SaltPepperTda{0.7, 0.5}};
}

}  // namespace

TEST_CASE("decompositions per scheme") {
  const SampleMatrix x = sample_data(build_sigma({sigma::Ar1{0.4}, 4}), 30, {}, {1, 0});
  const SpdMatrix lam = testutil::random_spd(4, 2);
  const MatrixXd cx = sample_covariance(x).data();

  const auto g = moment_decomposition(scheme::FixedGaussianGda{lam}, x);
  CHECK(g.beta == 0.0);
  CHECK(g.lambda_g.data() == lam.data());

  const auto t = moment_decomposition(scheme::FixedGaussianTda{lam}, x);
  CHECK(t.beta == 1.0);
  CHECK(t.lambda_g.data() == lam.data());

  const auto mix = two_blob_mixture(4);
  const auto gm = moment_decomposition(mix, x);
  MatrixXd expect = MatrixXd::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    expect += mix.weights[i] * (mix.covariances[i].data() + mix.means[i] * mix.means[i].transpose());
  CHECK(gm.beta == 0.0);
  CHECK(testutil::max_abs(gm.lambda_g.data() - expect) <= 1e-14);

  const auto mk = moment_decomposition(scheme::RandomMaskTda{0.7}, x);
  CHECK(mk.beta == doctest::Approx(0.49));
  CHECK(testutil::max_abs(mk.lambda_g.data() - MatrixXd(0.21 * cx.diagonal().asDiagonal())) <= 1e-14);

  const auto sp = moment_decomposition(scheme::SaltPepperTda{0.7, 0.5}, x);
  CHECK(sp.beta == doctest::Approx(0.49));
  CHECK(testutil::max_abs(sp.lambda_g.data() - MatrixXd(0.21 * cx.diagonal().asDiagonal()) -
                          0.15 * MatrixXd::Identity(4, 4)) <= 1e-14);
  CHECK(sp.kappa_bounds.first <= sp.kappa_bounds.second);
}

TEST_CASE("mask decomposition worked by hand") {
  MatrixXd x(1, 1);
  x << 2.0;
  const auto m = moment_decomposition(scheme::RandomMaskTda{0.5}, SampleMatrix(x));
  CHECK(m.beta == doctest::Approx(0.25));
  CHECK(m.lambda_g(0, 0) == doctest::Approx(1.0));
  // E[G^2] = rho x^2 = 2
  CHECK(m.beta * 4.0 + m.lambda_g(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("GDA decompositions do not depend on X") {
  const auto mix = two_blob_mixture(3);
  const auto a = moment_decomposition(mix, SampleMatrix(testutil::gaussian(3, 10, 1)));
  const auto b = moment_decomposition(mix, SampleMatrix(testutil::gaussian(3, 40, 2)));
  CHECK(a.lambda_g.data() == b.lambda_g.data());
}

TEST_CASE("validate_scheme rejects bad parameters") {
  CHECK_THROWS_AS(validate_scheme(scheme::RandomMaskTda{0.0}, 3), InvalidScheme);
  CHECK_THROWS_AS(validate_scheme(scheme::RandomMaskTda{1.2}, 3), InvalidScheme);
  CHECK_THROWS_AS(validate_scheme(scheme::SaltPepperTda{0.5, -1.0}, 3), InvalidScheme);
  CHECK_THROWS_AS(validate_scheme(scheme::FixedGaussianGda{SpdMatrix::identity(2)}, 3), InvalidScheme);
  MatrixXd neg = MatrixXd::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK_THROWS_AS(validate_scheme(scheme::FixedGaussianTda{SpdMatrix(neg)}, 2), InvalidScheme);

  auto mix = two_blob_mixture(3);
  mix.weights = {0.6, 0.6};
  CHECK_THROWS_AS(validate_scheme(mix, 3), InvalidScheme);
  mix = two_blob_mixture(3);
  mix.means[1](0) = -1.0;  // off centre
  CHECK_THROWS_AS(validate_scheme(mix, 3), InvalidScheme);
  CHECK_NOTHROW(validate_scheme(two_blob_mixture(3), 3));
  CHECK_THROWS_AS(sample_augmented(scheme::RandomMaskTda{2.0}, SampleMatrix(testutil::gaussian(3, 5, 1)), 4, {}),
                  InvalidScheme);
}

TEST_CASE("degenerate samplers") {
  const SampleMatrix x(testutil::gaussian(4, 12, 3));
  CHECK(sample_augmented(scheme::FixedGaussianGda{SpdMatrix::zero(4)}, x, 50, {1, 2}).data().isZero(0.0));
  const MatrixXd g = sample_augmented(scheme::RandomMaskTda{1.0}, x, 200, {1, 3}).data();
  for (Index j = 0; j < g.cols(); ++j) {
    bool found = false;
    for (Index i = 0; i < x.samples() && !found; ++i) found = g.col(j) == x.data().col(i);
    CHECK(found);
  }
  CHECK(is_generative(DaScheme{scheme::FixedGaussianGda{SpdMatrix::identity(2)}}));
  CHECK_FALSE(is_generative(DaScheme{scheme::RandomMaskTda{0.5}}));
  CHECK(scheme_name(DaScheme{scheme::SaltPepperTda{0.5, 1.0}}) == "salt_pepper_tda");
}

TEST_CASE("sampling is deterministic") {
  const SampleMatrix x(testutil::gaussian(5, 20, 4));
  for (const auto& s : all_schemes(5)) {
    CAPTURE(scheme_name(s));
    CHECK(sample_augmented(s, x, 300, {9, 1}).data() == sample_augmented(s, x, 300, {9, 1}).data());
    // prefix property: a smaller m is the leading block of a larger one
    CHECK(sample_augmented(s, x, 100, {9, 1}).data() == sample_augmented(s, x, 300, {9, 1}).data().leftCols(100));
  }
}

TEST_CASE("fixed Gaussian TDA column mean is close to the mean of X") {
  const SampleMatrix x(testutil::gaussian(3, 15, 5));
  const double s2 = 0.5;
  const Index m = 100000;
  const MatrixXd g = sample_augmented(scheme::FixedGaussianTda{SpdMatrix::scaled_identity(3, s2)}, x, m, {4, 4}).data();
  const VectorXd diff = g.rowwise().mean() - x.data().rowwise().mean();
  // resampling of X also contributes variance: use the total per-coordinate sd
  const VectorXd var_x = (x.data().colwise() - x.data().rowwise().mean()).array().square().rowwise().mean();
  for (Index i = 0; i < 3; ++i) CHECK(std::abs(diff(i)) <= 4.0 * std::sqrt((s2 + var_x(i)) / m));
}

TEST_CASE("verify_decomposition examples") {
  CHECK(verify_decomposition(scheme::FixedGaussianGda{SpdMatrix::identity(5)}, SampleMatrix(testutil::gaussian(5, 10, 6)),
                             200000, {1, 1}) < 0.03);
  CHECK(verify_decomposition(scheme::RandomMaskTda{1.0}, SampleMatrix(testutil::gaussian(10, 100, 7)), 100000,
                             {1, 2}) < 0.05);
  CHECK(verify_decomposition(scheme::SaltPepperTda{0.7, 0.5}, SampleMatrix(testutil::gaussian(10, 100, 8)), 200000,
                             {1, 3}) < 0.05);
  CHECK_THROWS_AS(verify_decomposition(scheme::RandomMaskTda{1.0}, SampleMatrix(testutil::gaussian(2, 3, 1)), 999, {}),
                  InvalidInput);
}

TEST_CASE("every scheme satisfies its decomposition on random X") {
  const Index d = 8;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const SampleMatrix x = sample_data(build_sigma({sigma::Ar1{0.3}, d}), 40, {}, {300 + seed, 0});
    for (const auto& s : all_schemes(d)) {
      CAPTURE(scheme_name(s));
      CAPTURE(seed);
      CHECK(verify_decomposition(s, x, 200000, {seed, 7}) < 0.05);
    }
  }
}

TEST_CASE("augmented column mean is bounded by the second moment") {
  const SampleMatrix x(testutil::gaussian(6, 25, 9));
  const Index m = 50000;
  for (const auto& s : all_schemes(6)) {
    const auto dec = moment_decomposition(s, x);
    const MatrixXd target = dec.beta * sample_covariance(x).data() + dec.lambda_g.data();
    const MatrixXd g = sample_augmented(s, x, m, {2, 2}).data();
    VectorXd mean = g.rowwise().mean();
    if (!is_generative(s)) {
      // TDA: E[G | X] = scale * mean of X
      const double scale = std::holds_alternative<scheme::FixedGaussianTda>(s) ? 1.0 : std::sqrt(dec.beta);
      mean -= scale * x.data().rowwise().mean();
    }
    CAPTURE(scheme_name(s));
    CHECK(mean.norm() <= 4.0 * std::sqrt(target.trace() / m));
  }
}

TEST_CASE("population Lambda_G") {
  const SpdMatrix sigma = build_sigma({sigma::Ar1{0.5}, 4});
  const auto p = population_lambda_g(scheme::RandomMaskTda{0.6}, sigma);
  CHECK(testutil::max_abs(p.data() - 0.24 * MatrixXd::Identity(4, 4)) <= 1e-14);
  const SpdMatrix lam = testutil::random_spd(4, 3);
  CHECK(population_lambda_g(scheme::FixedGaussianTda{lam}, sigma).data() == lam.data());
}
