#pragma once

// Synthetic data X = Sigma^{1/2} Z with independent unit-variance entries.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "pmest/linalg.hpp"
#include "pmest/rng.hpp"

namespace pmest {

namespace sigma {

struct Identity {};
struct Scaled {
  double variance = 1.0;
};
/// Entries r^{|i-j|}, |r| < 1.
struct Ar1 {
  double r = 0.0;
};
/// diag(values) conjugated by a seeded random orthogonal matrix.
struct Spectrum {
  std::vector<double> values;
  std::uint64_t seed = 0;
};
/// `bulk` on all but k random orthonormal directions, which carry `spikes`.
struct Spiked {
  double bulk = 1.0;
  std::vector<double> spikes;
  std::uint64_t seed = 0;
};

}  // namespace sigma

struct SigmaSpec {
  std::variant<sigma::Identity, sigma::Scaled, sigma::Ar1, sigma::Spectrum, sigma::Spiked> kind;
  Index dim = 1;
};

enum class NoiseDist { gaussian, rademacher, uniform_scaled };

struct NoiseSpec {
  NoiseDist dist = NoiseDist::gaussian;
};

std::string to_string(NoiseDist dist);
NoiseDist parse_noise_dist(const std::string& name);

/// Realises Sigma. Throws InvalidSpec for |r| >= 1, nonpositive spectrum
/// entries or sizes that do not match `dim`.
SpdMatrix build_sigma(const SigmaSpec& spec);

/// Haar-distributed d x d orthogonal matrix from a seed.
Eigen::MatrixXd random_orthogonal(Index d, std::uint64_t seed);

/// d x n matrix of i.i.d. zero-mean unit-variance draws. Columns are filled in
/// fixed blocks with derived streams, so output is independent of threads.
Eigen::MatrixXd sample_noise(Index d, Index n, NoiseSpec noise, const RngStream& rng);

/// Sigma^{1/2} Z. Requires Sigma strictly positive definite.
SampleMatrix sample_data(const SpdMatrix& sigma, Index n, NoiseSpec noise, const RngStream& rng);

}  // namespace pmest
