#include "pmest/parallel.hpp"

#include <algorithm>
#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pmest {

namespace {

std::atomic<int> g_threads{0};

constexpr std::size_t kGramColumnsPerChunk = 256;
constexpr std::size_t kGramMaxChunks = 16;
// Upper bound on doubles held by the per-chunk partial Gram matrices.
constexpr std::size_t kGramPartialBudget = std::size_t{1} << 24;

constexpr std::size_t kQuadColumnsPerChunk = 64;

}  // namespace

void set_num_threads(int threads) { g_threads.store(std::max(1, threads)); }

int num_threads() {
  int t = g_threads.load();
  if (t > 0) return t;
#ifdef _OPENMP
  return std::max(1, omp_get_max_threads());
#else
  return 1;
#endif
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

namespace detail {

void omp_for_dynamic(std::size_t count, void* ctx, void (*body)(void*, std::size_t)) {
  const auto n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(num_threads())
  for (long long i = 0; i < n; ++i) body(ctx, static_cast<std::size_t>(i));
}

}  // namespace detail

std::size_t gram_chunk_count(std::size_t d, std::size_t n) {
  const std::size_t by_columns = (n + kGramColumnsPerChunk - 1) / kGramColumnsPerChunk;
  const std::size_t by_memory = std::max<std::size_t>(1, kGramPartialBudget / std::max<std::size_t>(1, d * d));
  return std::clamp<std::size_t>(by_columns, 1, std::min(kGramMaxChunks, by_memory));
}

namespace par {

Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const auto d = static_cast<std::size_t>(x.rows());
  const auto n = static_cast<std::size_t>(x.cols());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(x.rows(), x.rows());
  if (n == 0) return out;

  const std::size_t chunks = gram_chunk_count(d, n);
  const std::size_t per = (n + chunks - 1) / chunks;
  std::vector<Eigen::MatrixXd> partial(chunks);
  const auto nc = static_cast<long long>(chunks);
#pragma omp parallel for schedule(static, 1) num_threads(num_threads())
  for (long long c = 0; c < nc; ++c) {
    const std::size_t begin = static_cast<std::size_t>(c) * per;
    const std::size_t end = std::min(n, begin + per);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(x.rows(), x.rows());
    if (begin < end) {
      p.selfadjointView<Eigen::Lower>().rankUpdate(
          x.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)));
    }
    partial[static_cast<std::size_t>(c)] = std::move(p);
  }

  // Fixed-shape tree reduction.
  for (std::size_t stride = 1; stride < chunks; stride *= 2)
    for (std::size_t i = 0; i + stride < chunks; i += 2 * stride) partial[i] += partial[i + stride];

  out = partial[0];
  out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

Eigen::VectorXd column_quadratic_forms(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r) {
  const Eigen::Index n = x.cols();
  Eigen::VectorXd q(n);
  const long long chunks = static_cast<long long>((n + kQuadColumnsPerChunk - 1) / kQuadColumnsPerChunk);
#pragma omp parallel for schedule(static) num_threads(num_threads())
  for (long long c = 0; c < chunks; ++c) {
    const Eigen::Index begin = static_cast<Eigen::Index>(c) * kQuadColumnsPerChunk;
    const Eigen::Index len = std::min<Eigen::Index>(kQuadColumnsPerChunk, n - begin);
    Eigen::MatrixXd rx = r * x.middleCols(begin, len);
    for (Eigen::Index j = 0; j < len; ++j) q(begin + j) = x.col(begin + j).dot(rx.col(j));
  }
  return q;
}

}  // namespace par

namespace ref {

Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& x) {
  const Eigen::Index d = x.rows();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index k = 0; k < x.cols(); ++k)
    for (Eigen::Index j = 0; j < d; ++j)
      for (Eigen::Index i = j; i < d; ++i) out(i, j) += x(i, k) * x(j, k);
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = j + 1; i < d; ++i) out(j, i) = out(i, j);
  return out;
}

Eigen::VectorXd column_quadratic_forms(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r) {
  const Eigen::Index d = x.rows();
  Eigen::VectorXd q(x.cols());
  for (Eigen::Index k = 0; k < x.cols(); ++k) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) s += x(i, k) * r(i, j) * x(j, k);
    q(k) = s;
  }
  return q;
}

}  // namespace ref

}  // namespace pmest
