#include "pmest/augmentation.hpp"

#include <cmath>
#include <random>

#include "pmest/parallel.hpp"

namespace pmest {

namespace {

constexpr Index kColumnsPerBlock = 256;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void check_matrix_param(const SpdMatrix& m, Index d, const char* what) {
  if (m.dim() != d)
    throw InvalidScheme(std::string(what) + ": dimension " + std::to_string(m.dim()) + " != " + std::to_string(d));
  if (!m.is_psd()) throw InvalidScheme(std::string(what) + ": covariance is not positive semi-definite");
}

void check_keep_prob(double rho, const char* what) {
  if (!(rho > 0.0 && rho <= 1.0)) throw InvalidScheme(std::string(what) + ": keep_prob must lie in (0, 1]");
}

// Runs fill(j, engine, column) for every column j with its own sub-stream.
template <class Fill>
Eigen::MatrixXd fill_columns(Index d, Index m, const RngStream& rng, Fill&& fill) {
  Eigen::MatrixXd g(d, m);
  const Index blocks = (m + kColumnsPerBlock - 1) / kColumnsPerBlock;
  par::map(static_cast<std::size_t>(blocks), [&](std::size_t b) {
    const Index begin = static_cast<Index>(b) * kColumnsPerBlock;
    const Index end = std::min(m, begin + kColumnsPerBlock);
    for (Index j = begin; j < end; ++j) {
      auto engine = rng.child(static_cast<std::uint64_t>(j)).engine();
      fill(j, engine, g.col(j));
    }
    return 0;
  });
  return g;
}

}  // namespace

std::string scheme_name(const DaScheme& s) {
  return std::visit(Overloaded{
                        [](const scheme::FixedGaussianGda&) { return std::string("fixed_gaussian_gda"); },
                        [](const scheme::GaussianMixtureGda&) { return std::string("gaussian_mixture_gda"); },
                        [](const scheme::FixedGaussianTda&) { return std::string("fixed_gaussian_tda"); },
                        [](const scheme::RandomMaskTda&) { return std::string("random_mask_tda"); },
                        [](const scheme::SaltPepperTda&) { return std::string("salt_pepper_tda"); },
                    },
                    s);
}

bool is_generative(const DaScheme& s) {
  return std::holds_alternative<scheme::FixedGaussianGda>(s) || std::holds_alternative<scheme::GaussianMixtureGda>(s);
}

void validate_scheme(const DaScheme& s, Index d) {
  std::visit(Overloaded{
                 [&](const scheme::FixedGaussianGda& g) { check_matrix_param(g.lambda, d, "fixed_gaussian_gda"); },
                 [&](const scheme::FixedGaussianTda& t) { check_matrix_param(t.lambda, d, "fixed_gaussian_tda"); },
                 [&](const scheme::RandomMaskTda& t) { check_keep_prob(t.keep_prob, "random_mask_tda"); },
                 [&](const scheme::SaltPepperTda& t) {
                   check_keep_prob(t.keep_prob, "salt_pepper_tda");
                   if (!(t.noise_var >= 0.0) || !std::isfinite(t.noise_var))
                     throw InvalidScheme("salt_pepper_tda: noise_var must be >= 0");
                 },
                 [&](const scheme::GaussianMixtureGda& g) {
                   const std::size_t k = g.weights.size();
                   if (k == 0) throw InvalidScheme("gaussian_mixture_gda: no components");
                   if (g.means.size() != k || g.covariances.size() != k)
                     throw InvalidScheme("gaussian_mixture_gda: weights, means and covariances differ in count");
                   double total = 0.0;
                   double max_norm = 0.0;
                   Eigen::VectorXd centre = Eigen::VectorXd::Zero(d);
                   for (std::size_t i = 0; i < k; ++i) {
                     if (!(g.weights[i] >= 0.0)) throw InvalidScheme("gaussian_mixture_gda: negative weight");
                     if (g.means[i].size() != d) throw InvalidScheme("gaussian_mixture_gda: mean dimension differs");
                     check_matrix_param(g.covariances[i], d, "gaussian_mixture_gda");
                     total += g.weights[i];
                     max_norm = std::max(max_norm, g.means[i].norm());
                     centre += g.weights[i] * g.means[i];
                   }
                   if (std::abs(total - 1.0) > 1e-10) throw InvalidScheme("gaussian_mixture_gda: weights must sum to 1");
                   if (centre.norm() > 1e-10 * max_norm)
                     throw InvalidScheme("gaussian_mixture_gda: mixture is not centred (sum_i w_i mu_i != 0)");
                 },
             },
             s);
}

SampleMatrix sample_augmented(const DaScheme& s, const SampleMatrix& x, Index m, const RngStream& rng) {
  const Index d = x.dim();
  validate_scheme(s, d);
  if (m < 0) throw InvalidInput("sample_augmented: m must be >= 0");
  if (m == 0) return SampleMatrix::empty(d);
  const Index n = x.samples();
  const Eigen::MatrixXd& xd = x.data();

  Eigen::MatrixXd g = std::visit(
      Overloaded{
          [&](const scheme::FixedGaussianGda& p) -> Eigen::MatrixXd {
            const SpdMatrix root = matrix_sqrt(p.lambda);
            Eigen::MatrixXd z = fill_columns(d, m, rng, [&](Index, Xoshiro256& e, auto col) {
              std::normal_distribution<double> nd;
              for (Index i = 0; i < d; ++i) col(i) = nd(e);
            });
            return root.data() * z;
          },
          [&](const scheme::GaussianMixtureGda& p) -> Eigen::MatrixXd {
            std::vector<Eigen::MatrixXd> roots;
            for (const auto& c : p.covariances) roots.push_back(matrix_sqrt(c).data());
            return fill_columns(d, m, rng, [&](Index, Xoshiro256& e, auto col) {
              std::discrete_distribution<std::size_t> pick(p.weights.begin(), p.weights.end());
              const std::size_t c = pick(e);
              std::normal_distribution<double> nd;
              Eigen::VectorXd z(d);
              for (Index i = 0; i < d; ++i) z(i) = nd(e);
              col = p.means[c] + roots[c] * z;
            });
          },
          [&](const scheme::FixedGaussianTda& p) -> Eigen::MatrixXd {
            const SpdMatrix root = matrix_sqrt(p.lambda);
            std::vector<Index> source(static_cast<std::size_t>(m));
            Eigen::MatrixXd z = fill_columns(d, m, rng, [&](Index j, Xoshiro256& e, auto col) {
              source[static_cast<std::size_t>(j)] = std::uniform_int_distribution<Index>(0, n - 1)(e);
              std::normal_distribution<double> nd;
              for (Index i = 0; i < d; ++i) col(i) = nd(e);
            });
            Eigen::MatrixXd out = root.data() * z;
            for (Index j = 0; j < m; ++j) out.col(j) += xd.col(source[static_cast<std::size_t>(j)]);
            return out;
          },
          [&](const scheme::RandomMaskTda& p) -> Eigen::MatrixXd {
            return fill_columns(d, m, rng, [&](Index, Xoshiro256& e, auto col) {
              const Index src = std::uniform_int_distribution<Index>(0, n - 1)(e);
              std::bernoulli_distribution keep(p.keep_prob);
              for (Index i = 0; i < d; ++i) col(i) = keep(e) ? xd(i, src) : 0.0;
            });
          },
          [&](const scheme::SaltPepperTda& p) -> Eigen::MatrixXd {
            const double sd = std::sqrt(p.noise_var);
            return fill_columns(d, m, rng, [&](Index, Xoshiro256& e, auto col) {
              const Index src = std::uniform_int_distribution<Index>(0, n - 1)(e);
              std::bernoulli_distribution keep(p.keep_prob);
              std::normal_distribution<double> nd;
              for (Index i = 0; i < d; ++i) {
                const bool kept = keep(e);
                const double noise = sd * nd(e);
                col(i) = kept ? xd(i, src) : noise;
              }
            });
          },
      },
      s);
  return SampleMatrix(std::move(g));
}

MomentDecomposition moment_decomposition(const DaScheme& s, const SampleMatrix& x) {
  const Index d = x.dim();
  validate_scheme(s, d);
  auto diag_cx = [&] { return sample_covariance(x).data().diagonal().eval(); };
  auto [beta, lambda_g] = std::visit(
      Overloaded{
          [&](const scheme::FixedGaussianGda& p) { return std::pair{0.0, p.lambda}; },
          [&](const scheme::GaussianMixtureGda& p) {
            Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
            for (std::size_t i = 0; i < p.weights.size(); ++i)
              acc += p.weights[i] * (p.covariances[i].data() + p.means[i] * p.means[i].transpose());
            return std::pair{0.0, SpdMatrix(std::move(acc))};
          },
          [&](const scheme::FixedGaussianTda& p) { return std::pair{1.0, p.lambda}; },
          [&](const scheme::RandomMaskTda& p) {
            const double rho = p.keep_prob;
            return std::pair{rho * rho, SpdMatrix::diagonal(rho * (1.0 - rho) * diag_cx())};
          },
          [&](const scheme::SaltPepperTda& p) {
            const double rho = p.keep_prob;
            Eigen::VectorXd diag = rho * (1.0 - rho) * diag_cx();
            diag.array() += (1.0 - rho) * p.noise_var;
            return std::pair{rho * rho, SpdMatrix::diagonal(diag)};
          },
      },
      s);
  MomentDecomposition out{beta, lambda_g, {}};
  out.kappa_bounds = {out.lambda_g.min_eigenvalue(), out.lambda_g.max_eigenvalue()};
  return out;
}

SpdMatrix population_lambda_g(const DaScheme& s, const SpdMatrix& sigma) {
  const Index d = sigma.dim();
  validate_scheme(s, d);
  return std::visit(Overloaded{
                        [&](const scheme::RandomMaskTda& p) {
                          const double rho = p.keep_prob;
                          return SpdMatrix::diagonal(rho * (1.0 - rho) * sigma.data().diagonal());
                        },
                        [&](const scheme::SaltPepperTda& p) {
                          const double rho = p.keep_prob;
                          Eigen::VectorXd diag = rho * (1.0 - rho) * sigma.data().diagonal();
                          diag.array() += (1.0 - rho) * p.noise_var;
                          return SpdMatrix::diagonal(diag);
                        },
                        [&](const auto&) {
                          // Lambda_G does not depend on X for these schemes.
                          return moment_decomposition(s, SampleMatrix(Eigen::MatrixXd::Zero(d, 1))).lambda_g;
                        },
                    },
                    s);
}

double verify_decomposition(const DaScheme& s, const SampleMatrix& x, Index m_mc, const RngStream& rng) {
  if (m_mc < 1000) throw InvalidInput("verify_decomposition: m_mc must be >= 1000");
  const MomentDecomposition md = moment_decomposition(s, x);
  const SampleMatrix g = sample_augmented(s, x, m_mc, rng);
  const Eigen::MatrixXd c_hat = gram(g) / static_cast<double>(m_mc);
  const Eigen::MatrixXd target = md.beta * sample_covariance(x).data() + md.lambda_g.data();
  const double denom = target.norm();
  if (!(denom > 0.0)) return (c_hat - target).norm();
  return (c_hat - target).norm() / denom;
}

}  // namespace pmest
