#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "pmest/errors.hpp"
#include "pmest/shrinkage.hpp"

namespace pmest::detail {

/// Fixed point of a map f on [1, upper] with f(1) >= 1 and f(upper) <= upper.
/// Damped iteration first; bisection on g(b) = f(b) - b once the iteration
/// stalls or runs out of budget.
inline FixedPointResult solve_scalar_fixed_point(const std::function<double(double)>& f, double upper,
                                                 const FixedPointOptions& opt, const char* what) {
  FixedPointResult out;
  double b = 1.0;
  double prev_residual = INFINITY;
  int iter = 0;
  for (; iter < opt.max_iter; ++iter) {
    const double fb = f(b);
    const double residual = std::abs(fb - b);
    if (!std::isfinite(fb)) break;
    if (residual <= opt.tol) {
      out.value = b;
      out.iterations = iter;
      out.residual = residual;
      return out;
    }
    // Linear rate close to 1: bisection is faster from here.
    if (iter >= 10 && residual > 0.98 * prev_residual) break;
    prev_residual = residual;
    b = (1.0 - opt.damping) * b + opt.damping * fb;
  }

  double lo = 1.0;
  double hi = upper;
  if (!(f(hi) - hi <= 0.0)) {
    for (int k = 0; k < 60 && !(f(hi) - hi <= 0.0); ++k) hi *= 2.0;
    if (!(f(hi) - hi <= 0.0)) throw NoConvergence(std::string(what) + ": no fixed point bracket");
  }
  double best = b;
  double best_res = std::abs(f(b) - b);
  for (int k = 0; k < 400; ++k, ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double g = f(mid) - mid;
    if (std::abs(g) < best_res) {
      best = mid;
      best_res = std::abs(g);
    }
    if (best_res <= opt.tol || hi - lo <= 4e-16 * hi) break;
    if (g > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  if (!(best_res <= opt.tol))
    throw NoConvergence(std::string(what) + ": residual " + std::to_string(best_res) + " above tolerance");
  out.value = best;
  out.iterations = iter;
  out.residual = best_res;
  out.used_bisection = true;
  return out;
}

}  // namespace pmest::detail
