#pragma once

// Data-parallel kernels. Every kernel comes in two flavours:
//   pmest::par  OpenMP implementation used by the library
//   pmest::ref  plain serial reference kept for tests and benchmarks
// Work is always split by a fixed, thread-count independent partition and
// reduced in a fixed order, so par:: results are bit-identical for any
// number of threads.

#include <cstddef>
#include <exception>
#include <optional>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace pmest {

/// Thread count used by par:: kernels (>= 1). Defaults to the OpenMP default.
void set_num_threads(int threads);
int num_threads();

/// Pairwise (cascade) summation; error grows as O(log n) instead of O(n).
double pairwise_sum(std::span<const double> values);

namespace detail {

template <class T>
std::vector<T> unwrap(std::vector<std::optional<T>>& slots) {
  std::vector<T> out;
  out.reserve(slots.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

// Defined in parallel.cpp so that only one TU needs OpenMP pragmas for the
// type-erased loop driver.
void omp_for_dynamic(std::size_t count, void* ctx, void (*body)(void*, std::size_t));

}  // namespace detail

namespace par {

/// Evaluates fn(i) for i in [0, count) in parallel; result[i] = fn(i).
/// The first exception thrown by any item (lowest index) is rethrown.
template <class F>
auto map(std::size_t count, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using T = std::invoke_result_t<F&, std::size_t>;
  std::vector<std::optional<T>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  struct Ctx {
    F* fn;
    std::vector<std::optional<T>>* slots;
    std::vector<std::exception_ptr>* errors;
  } ctx{&fn, &slots, &errors};
  detail::omp_for_dynamic(count, &ctx, [](void* raw, std::size_t i) {
    auto* c = static_cast<Ctx*>(raw);
    try {
      (*c->slots)[i].emplace((*c->fn)(i));
    } catch (...) {
      (*c->errors)[i] = std::current_exception();
    }
  });
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return detail::unwrap(slots);
}

/// X * X^T, accumulated over fixed column chunks and tree-reduced.
Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& x);

/// q_i = x_i^T R x_i for every column i of X.
Eigen::VectorXd column_quadratic_forms(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r);

}  // namespace par

namespace ref {

template <class F>
auto map(std::size_t count, F&& fn) -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  std::vector<std::invoke_result_t<F&, std::size_t>> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(fn(i));
  return out;
}

Eigen::MatrixXd gram(const Eigen::Ref<const Eigen::MatrixXd>& x);

Eigen::VectorXd column_quadratic_forms(const Eigen::Ref<const Eigen::MatrixXd>& x,
                                       const Eigen::Ref<const Eigen::MatrixXd>& r);

}  // namespace ref

/// Number of chunks gram() splits n columns of dimension d into. Depends
/// only on (d, n).
std::size_t gram_chunk_count(std::size_t d, std::size_t n);

}  // namespace pmest
