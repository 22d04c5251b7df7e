#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pmest/parallel.hpp"
#include "pmest/synth.hpp"
#include "test_util.hpp"

using namespace pmest;
using Eigen::MatrixXd;

TEST_CASE("build_sigma families") {
  CHECK(build_sigma({sigma::Identity{}, 3}).data() == MatrixXd::Identity(3, 3));
  MatrixXd ar(2, 2);
  ar << 1.0, 0.5, 0.5, 1.0;
  CHECK(build_sigma({sigma::Ar1{0.5}, 2}).data() == ar);
  const SpdMatrix a5 = build_sigma({sigma::Ar1{-0.3}, 5});
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK(a5(i, j) == doctest::Approx(std::pow(-0.3, std::abs(i - j))));
  CHECK(build_sigma({sigma::Scaled{4.0}, 2}).data() == 4.0 * MatrixXd::Identity(2, 2));
}

TEST_CASE("spectrum round-trips through the eigen solver") {
  const SpdMatrix s = build_sigma({sigma::Spectrum{{1.0, 2.0, 4.0}, 7}, 3});
  CHECK(std::abs(s.min_eigenvalue() - 1.0) <= 1e-10);
  CHECK(std::abs(s.max_eigenvalue() - 4.0) <= 1e-10);
  CHECK(std::abs(s.eigen().values(1) - 2.0) <= 1e-10);
  CHECK(s.data().trace() == doctest::Approx(7.0));
  // conjugation really rotates
  CHECK(std::abs(s(0, 1)) > 1e-6);

  const SpdMatrix k = build_sigma({sigma::Spiked{1.0, {10.0, 5.0}, 3}, 6});
  CHECK(std::abs(k.max_eigenvalue() - 10.0) <= 1e-10);
  CHECK(std::abs(k.min_eigenvalue() - 1.0) <= 1e-10);
}

TEST_CASE("build_sigma rejects invalid specs") {
  CHECK_THROWS_AS(build_sigma({sigma::Ar1{1.0}, 3}), InvalidSpec);
  CHECK_THROWS_AS(build_sigma({sigma::Ar1{-1.2}, 3}), InvalidSpec);
  CHECK_THROWS_AS(build_sigma({sigma::Spectrum{{1.0, 0.0}, 0}, 2}), InvalidSpec);
  CHECK_THROWS_AS(build_sigma({sigma::Spectrum{{1.0, 2.0}, 0}, 3}), InvalidSpec);
  CHECK_THROWS_AS(build_sigma({sigma::Scaled{-1.0}, 3}), InvalidSpec);
  CHECK_THROWS_AS(parse_noise_dist("cauchy"), InvalidSpec);
  CHECK(parse_noise_dist(to_string(NoiseDist::uniform_scaled)) == NoiseDist::uniform_scaled);
}

TEST_CASE("random_orthogonal is orthogonal") {
  const MatrixXd q = random_orthogonal(9, 4);
  CHECK((q.transpose() * q - MatrixXd::Identity(9, 9)).norm() <= 1e-12);
}

TEST_CASE("sample_data is deterministic and independent of thread count") {
  const SpdMatrix s = build_sigma({sigma::Ar1{0.4}, 6});
  const RngStream rng{42, 3};
  const int saved = num_threads();
  set_num_threads(1);
  const MatrixXd a = sample_data(s, 5000, {}, rng).data();
  set_num_threads(8);
  const MatrixXd b = sample_data(s, 5000, {}, rng).data();
  set_num_threads(saved);
  CHECK(a == b);
  CHECK(sample_data(SpdMatrix::identity(3), 10, {}, rng).data() ==
        sample_data(SpdMatrix::identity(3), 10, {}, rng).data());
  CHECK(sample_data(s, 50, {}, RngStream{42, 4}).data() != sample_data(s, 50, {}, rng).data().leftCols(50));
}

TEST_CASE("rademacher data under 4 I has entries +-2") {
  const MatrixXd x = sample_data(SpdMatrix::scaled_identity(1, 4.0), 1000, {NoiseDist::rademacher}, {1, 1}).data();
  for (Index j = 0; j < x.cols(); ++j) CHECK(std::abs(std::abs(x(0, j)) - 2.0) <= 1e-14);
}

TEST_CASE("sample covariance converges to sigma") {
  const SpdMatrix s = build_sigma({sigma::Ar1{0.6}, 8});
  const SpdMatrix c = sample_covariance(sample_data(s, 200000, {}, {2024, 0}));
  CHECK((c.data() - s.data()).norm() / s.data().norm() < 0.02);
}

TEST_CASE("noise has zero mean and unit second moment") {
  const Index d = 50, n = 4000;
  const double tol = 3.0 / std::sqrt(static_cast<double>(d * n));
  for (NoiseDist dist : {NoiseDist::gaussian, NoiseDist::rademacher, NoiseDist::uniform_scaled}) {
    const MatrixXd z = sample_noise(d, n, {dist}, {77, 5});
    CAPTURE(to_string(dist));
    CHECK(std::abs(z.squaredNorm() / static_cast<double>(d * n) - 1.0) <= tol);
    CHECK(std::abs(z.mean()) <= tol);
    if (dist == NoiseDist::uniform_scaled) CHECK(z.cwiseAbs().maxCoeff() <= std::sqrt(3.0));
  }
}

TEST_CASE("matrix square root of sigma") {
  const SpdMatrix s = build_sigma({sigma::Spectrum{{0.5, 1.0, 3.0, 9.0}, 11}, 4});
  const SpdMatrix r = matrix_sqrt(s);
  CHECK((r.data() * r.data() - s.data()).norm() <= 1e-10 * s.data().norm());
}
