// SPDX-License-Identifier: Apache-2.0

#include "qscale/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <stdexcept>

namespace qscale {

namespace {

constexpr double kArmijoC1 = 1e-4;
constexpr double kWolfeC2 = 0.9;
constexpr int kMaxLineSearch = 60;
constexpr double kBoundTol = 1e-12;
constexpr double kCurvatureTol = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

void clamp_into(std::span<double> x, const Box& box) {
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = std::clamp(x[i], box.lo[i], box.hi[i]);
}

struct Pair {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// d = -H g restricted to the free variables, via the two-loop recursion.
std::vector<double> lbfgs_direction(const std::deque<Pair>& pairs,
                                    std::span<const double> grad,
                                    std::span<const std::uint8_t> active) {
  const std::size_t n = grad.size();
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) q[i] = active[i] ? 0.0 : grad[i];

  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const Pair& p = pairs[k];
    alpha[k] = p.rho * dot(p.s, q);
    for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * p.y[i];
  }
  if (!pairs.empty()) {
    const Pair& last = pairs.back();
    const double yy = dot(last.y, last.y);
    if (yy > 0.0) {
      const double scale = dot(last.s, last.y) / yy;
      for (double& v : q) v *= scale;
    }
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const Pair& p = pairs[k];
    const double beta = p.rho * dot(p.y, q);
    for (std::size_t i = 0; i < n; ++i) q[i] += (alpha[k] - beta) * p.s[i];
  }
  for (std::size_t i = 0; i < n; ++i) q[i] = active[i] ? 0.0 : -q[i];
  return q;
}

// Largest step along d that stays inside the box.
double max_feasible_step(std::span<const double> x, std::span<const double> d,
                         const Box& box) {
  double tmax = kInf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (d[i] > 0.0)
      tmax = std::min(tmax, (box.hi[i] - x[i]) / d[i]);
    else if (d[i] < 0.0)
      tmax = std::min(tmax, (box.lo[i] - x[i]) / d[i]);
  }
  return tmax;
}

}  // namespace

MinimizeResult minimize_bounded(const ObjectiveFn& objective,
                                std::span<const double> start, const Box& box,
                                const MinimizeOptions& options) {
  const std::size_t n = start.size();
  if (box.lo.size() != n || box.hi.size() != n)
    throw std::invalid_argument("bounds dimension mismatch");
  for (std::size_t i = 0; i < n; ++i)
    if (!(box.lo[i] <= box.hi[i]))
      throw std::invalid_argument("degenerate bounds");

  MinimizeResult result;
  result.x.assign(start.begin(), start.end());
  clamp_into(result.x, box);

  int n_evals = 0;
  auto eval_value = [&](std::span<const double> x) {
    ++n_evals;
    return objective(x, {});
  };
  // Value and gradient at x in one call (finite differences when configured).
  auto eval_grad = [&](std::span<const double> x, std::span<double> grad) {
    if (options.analytic_gradient) {
      ++n_evals;
      return objective(x, grad);
    }
    const double value = eval_value(x);
    std::vector<double> probe(x.begin(), x.end());
    for (std::size_t i = 0; i < n; ++i) {
      const double h = options.fd_step * std::max(1.0, std::fabs(x[i]));
      probe[i] = x[i] + h;
      const double fp = eval_value(probe);
      probe[i] = x[i] - h;
      const double fm = eval_value(probe);
      probe[i] = x[i];
      grad[i] = (fp - fm) / (2.0 * h);
    }
    return value;
  };

  std::vector<double> grad(n);
  double f = eval_grad(result.x, grad);
  if (!std::isfinite(f)) {
    result.value = f;
    result.n_evals = n_evals;
    return result;
  }

  std::deque<Pair> pairs;
  std::vector<std::uint8_t> active(n, 0);
  std::vector<double> x_trial(n), grad_trial(n);
  std::vector<double> x_best(n), grad_best(n);

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;

    double pg_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double stepped =
          std::clamp(result.x[i] - grad[i], box.lo[i], box.hi[i]);
      pg_norm = std::max(pg_norm, std::fabs(result.x[i] - stepped));
    }
    if (pg_norm < options.pg_tol) {
      result.converged = true;
      break;
    }

    for (std::size_t i = 0; i < n; ++i) {
      active[i] = (result.x[i] <= box.lo[i] + kBoundTol && grad[i] > 0.0) ||
                  (result.x[i] >= box.hi[i] - kBoundTol && grad[i] < 0.0);
    }

    std::vector<double> dir = lbfgs_direction(pairs, grad, active);
    double gd = dot(grad, dir);
    double tmax = max_feasible_step(result.x, dir, box);
    // Fall back to projected steepest descent if the quasi-Newton direction
    // is unusable (uphill, or blocked by a bound the mask did not cover).
    if (!(gd < 0.0) || !(tmax > 0.0)) {
      pairs.clear();
      for (std::size_t i = 0; i < n; ++i) dir[i] = active[i] ? 0.0 : -grad[i];
      gd = dot(grad, dir);
      tmax = max_feasible_step(result.x, dir, box);
      if (!(gd < 0.0) || !(tmax > 0.0)) {
        result.converged = true;  // every free direction is uphill
        break;
      }
    }

    // Weak-Wolfe line search by bisection/expansion along the ray, capped at
    // the first bound intersection.
    double t = std::min(1.0, tmax);
    double lo = 0.0;
    double hi = kInf;
    bool accepted = false;
    bool have_best = false;
    double f_trial = f;
    double f_best = f;
    for (int ls = 0; ls < kMaxLineSearch; ++ls) {
      for (std::size_t i = 0; i < n; ++i)
        x_trial[i] =
            std::clamp(result.x[i] + t * dir[i], box.lo[i], box.hi[i]);
      f_trial = eval_grad(x_trial, grad_trial);

      if (!std::isfinite(f_trial) || f_trial > f + kArmijoC1 * t * gd) {
        hi = t;  // sufficient decrease failed: shrink
      } else {
        if (f_trial <= f_best) {
          f_best = f_trial;
          x_best = x_trial;
          grad_best = grad_trial;
          have_best = true;
        }
        const double gd_trial = dot(grad_trial, dir);
        if (gd_trial < kWolfeC2 * gd && t < tmax) {
          lo = t;  // still steeply downhill: lengthen
        } else {
          accepted = true;  // Wolfe pair satisfied (or capped by a bound)
          break;
        }
      }
      t = std::isinf(hi) ? std::min(2.0 * t, tmax) : 0.5 * (lo + hi);
      if (!(t > lo) || !(t < hi) || t <= 0.0) break;
    }

    if (!accepted && !have_best) {
      // No improving step exists along this path; the achievable decrease is
      // below the convergence threshold.
      result.converged = true;
      break;
    }
    if (!accepted) {
      // Fall back to the best sufficient-decrease point seen.
      x_trial = x_best;
      grad_trial = grad_best;
      f_trial = f_best;
    }
    const double f_new = f_trial;

    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_trial[i] - result.x[i];
      y[i] = grad_trial[i] - grad[i];
    }
    const double sy = dot(s, y);
    if (sy > kCurvatureTol * norm2(s) * norm2(y)) {
      pairs.push_back({std::move(s), std::move(y), 1.0 / sy});
      if (static_cast<int>(pairs.size()) > options.history) pairs.pop_front();
    }

    const double decrease = f - f_new;
    result.x = x_trial;
    f = f_new;
    grad = grad_trial;
    if (decrease < options.f_tol) {
      result.converged = true;
      break;
    }
  }

  result.value = f;
  result.n_evals = n_evals;
  return result;
}

}  // namespace qscale
