#include "pmest/synth.hpp"

#include <cmath>
#include <random>

#include "pmest/parallel.hpp"

namespace pmest {

namespace {

constexpr Index kNoiseColumnsPerBlock = 64;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

std::string to_string(NoiseDist dist) {
  switch (dist) {
    case NoiseDist::gaussian: return "gaussian";
    case NoiseDist::rademacher: return "rademacher";
    case NoiseDist::uniform_scaled: return "uniform";
  }
  return "gaussian";
}

NoiseDist parse_noise_dist(const std::string& name) {
  if (name == "gaussian") return NoiseDist::gaussian;
  if (name == "rademacher") return NoiseDist::rademacher;
  if (name == "uniform" || name == "uniform_scaled" || name == "uniform-scaled") return NoiseDist::uniform_scaled;
  throw InvalidSpec("unknown noise distribution '" + name + "'");
}

Eigen::MatrixXd random_orthogonal(Index d, std::uint64_t seed) {
  Eigen::MatrixXd g = sample_noise(d, d, NoiseSpec{NoiseDist::gaussian}, RngStream{seed, 0x0b7a});
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < d; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

SpdMatrix build_sigma(const SigmaSpec& spec) {
  const Index d = spec.dim;
  if (d < 1) throw InvalidSpec("sigma: dimension must be >= 1");
  return std::visit(
      Overloaded{
          [&](const sigma::Identity&) { return SpdMatrix::identity(d); },
          [&](const sigma::Scaled& s) {
            if (!(s.variance > 0.0) || !std::isfinite(s.variance))
              throw InvalidSpec("sigma.scaled: variance must be positive");
            return SpdMatrix::scaled_identity(d, s.variance);
          },
          [&](const sigma::Ar1& a) {
            if (!(a.r > -1.0 && a.r < 1.0)) throw InvalidSpec("sigma.ar1: r must lie in (-1, 1)");
            Eigen::MatrixXd m(d, d);
            for (Index i = 0; i < d; ++i)
              for (Index j = 0; j < d; ++j) m(i, j) = std::pow(a.r, static_cast<double>(std::abs(i - j)));
            return SpdMatrix(std::move(m));
          },
          [&](const sigma::Spectrum& s) {
            if (static_cast<Index>(s.values.size()) != d)
              throw InvalidSpec("sigma.spectrum: expected " + std::to_string(d) + " eigenvalues");
            Eigen::VectorXd w(d);
            for (Index i = 0; i < d; ++i) {
              const double v = s.values[static_cast<std::size_t>(i)];
              if (!(v > 0.0) || !std::isfinite(v)) throw InvalidSpec("sigma.spectrum: entries must be positive");
              w(i) = v;
            }
            const Eigen::MatrixXd q = random_orthogonal(d, s.seed);
            return SpdMatrix(q * w.asDiagonal() * q.transpose());
          },
          [&](const sigma::Spiked& s) {
            if (!(s.bulk > 0.0)) throw InvalidSpec("sigma.spiked: bulk must be positive");
            if (static_cast<Index>(s.spikes.size()) > d) throw InvalidSpec("sigma.spiked: more spikes than dimensions");
            Eigen::VectorXd w = Eigen::VectorXd::Constant(d, s.bulk);
            for (std::size_t k = 0; k < s.spikes.size(); ++k) {
              if (!(s.spikes[k] > 0.0)) throw InvalidSpec("sigma.spiked: spikes must be positive");
              w(static_cast<Index>(k)) = s.spikes[k];
            }
            const Eigen::MatrixXd q = random_orthogonal(d, s.seed);
            return SpdMatrix(q * w.asDiagonal() * q.transpose());
          },
      },
      spec.kind);
}

Eigen::MatrixXd sample_noise(Index d, Index n, NoiseSpec noise, const RngStream& rng) {
  Eigen::MatrixXd z(d, n);
  const Index blocks = (n + kNoiseColumnsPerBlock - 1) / kNoiseColumnsPerBlock;
  par::map(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    auto engine = rng.child(b).engine();
    const Index begin = static_cast<Index>(b) * kNoiseColumnsPerBlock;
    const Index end = std::min(n, begin + kNoiseColumnsPerBlock);
    double* out = z.data() + begin * d;
    const Index count = (end - begin) * d;
    switch (noise.dist) {
      case NoiseDist::gaussian: {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (Index i = 0; i < count; ++i) out[i] = dist(engine);
        break;
      }
      case NoiseDist::rademacher:
        for (Index i = 0; i < count; ++i) out[i] = (engine() >> 63) ? 1.0 : -1.0;
        break;
      case NoiseDist::uniform_scaled: {
        const double a = std::sqrt(3.0);
        std::uniform_real_distribution<double> dist(-a, a);
        for (Index i = 0; i < count; ++i) out[i] = dist(engine);
        break;
      }
    }
    return 0;
  });
  return z;
}

SampleMatrix sample_data(const SpdMatrix& sigma, Index n, NoiseSpec noise, const RngStream& rng) {
  if (n < 1) throw InvalidInput("sample_data: n must be >= 1");
  if (!(sigma.min_eigenvalue() > 0.0)) throw InvalidSpec("sample_data: sigma must be strictly positive definite");
  const SpdMatrix root = matrix_sqrt(sigma);
  const Eigen::MatrixXd z = sample_noise(sigma.dim(), n, noise, rng);
  return SampleMatrix(root.data() * z);
}

}  // namespace pmest
