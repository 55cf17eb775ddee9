// SPDX-License-Identifier: Apache-2.0
//
// Box-constrained limited-memory quasi-Newton minimizer: gradient projection
// onto the bounds combined with L-BFGS curvature pairs on the free variables.

#pragma once

#include <functional>
#include <span>
#include <vector>

namespace qscale {

// Evaluate the objective at x; when grad is non-empty, fill it with the
// gradient at x and return the same value.
using ObjectiveFn =
    std::function<double(std::span<const double>, std::span<double>)>;

struct Box {
  std::vector<double> lo;
  std::vector<double> hi;
};

struct MinimizeOptions {
  int max_iterations = 500;
  double f_tol = 1e-9;   // stop when the objective decrease falls below this
  double pg_tol = 1e-8;  // stop when the projected gradient inf-norm does
  int history = 10;      // number of stored curvature pairs
  bool analytic_gradient = true;  // false: central finite differences
  double fd_step = 1e-6;
};

struct MinimizeResult {
  std::vector<double> x;
  double value = 0.0;
  bool converged = false;
  int iterations = 0;
  int n_evals = 0;
};

// Never throws for numerical reasons; a start that cannot make progress is
// reported with converged = false and the best point found.
MinimizeResult minimize_bounded(const ObjectiveFn& objective,
                                std::span<const double> start, const Box& box,
                                const MinimizeOptions& options = {});

}  // namespace qscale
