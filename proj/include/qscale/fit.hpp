// SPDX-License-Identifier: Apache-2.0
//
// Parameter estimation for the scaling law: robust Huber-of-log-residual
// objective (with a raw-loss least-squares alternative), analytic gradients,
// and a deterministic grid multistart over the bounded quasi-Newton solver.
//
// Parameter vectors are laid out as
//   reduced: theta = [b, e, beta, gamma]            with B = exp(b), E+ = exp(e)
//   full:    theta = [a, alpha, b, e, beta, gamma]  with A = exp(a), E = exp(e)

#pragma once

#include <span>
#include <string>
#include <vector>

#include "qscale/law.hpp"
#include "qscale/optim.hpp"

namespace qscale {

enum class FitMethod { huber, least_squares };
enum class Exec { serial, parallel };

// Inclusive arithmetic range lo, lo+step, ..., hi.
struct Range {
  double lo = 0.0;
  double hi = 0.0;
  double step = 0.0;

  std::vector<double> values() const;
};

struct GridSpec {
  Range b_range{0.0, 25.0, 5.0};
  Range e_range{0.0, 2.0, 0.5};
  Range beta_range{0.0, 0.4, 0.1};
  Range gamma_range{0.0, 0.4, 0.1};
  // Full form only; when absent these default to b_range / beta_range.
  std::optional<Range> a_range;
  std::optional<Range> alpha_range;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct FitConfig {
  FitMethod method = FitMethod::huber;
  LawForm law_form = LawForm::reduced;
  double huber_delta = 1e-3;
  GridSpec grid;
  Interval b_bounds{-10.0, 30.0};   // on b = ln B
  Interval e_bounds{-10.0, 5.0};    // on e = ln E
  Interval beta_bounds{0.0, 1.0};
  Interval gamma_bounds{0.0, 1.0};
  Interval a_bounds{-10.0, 30.0};   // on a = ln A (full form)
  Interval alpha_bounds{0.0, 1.0};
  int max_iterations = 500;
  double convergence_tol = 1e-9;
  Exec exec = Exec::parallel;
  int threads = 0;  // 0 = runtime default

  void validate() const;
};

struct FitReport {
  ScalingParams params;
  FitMethod method = FitMethod::huber;
  double objective_value = 0.0;
  int n_runs = 0;
  int n_starts = 0;
  int n_converged = 0;
  int best_start_index = -1;
  std::vector<double> best_start;  // initial theta of the winning start
  std::vector<double> residuals;   // per run, ln(predicted) - ln(observed)
  double rms_log_residual = 0.0;
  std::vector<std::string> bound_hits;  // parameters that ended on a bound
};

// Huber penalty: r^2/2 below delta, delta(|r| - delta/2) above.
double huber(double residual, double delta);

// ln sum exp, max-shifted; exact for a single term.
double log_sum_exp(std::span<const double> terms);

// Objectives. When grad is non-empty it receives the analytic gradient.
double objective_reduced(std::span<const double> theta,
                         std::span<const RunRecord> runs, double delta,
                         std::span<double> grad = {});
double objective_full(std::span<const double> theta,
                      std::span<const RunRecord> runs, double delta,
                      std::span<double> grad = {});
// Raw-loss least squares, sum_i (Lhat_i - L_i)^2, same theta layout.
double objective_least_squares(std::span<const double> theta,
                               std::span<const RunRecord> runs, LawForm form,
                               std::span<double> grad = {});

// Grid start points in canonical nesting order
// (a, alpha,) b, e, beta, gamma -- innermost last.
std::vector<std::vector<double>> grid_starts(const GridSpec& grid,
                                             LawForm form);

// Multistart fit; deterministic winner selection regardless of scheduling.
FitReport fit(std::span<const RunRecord> runs, const FitConfig& config);

}  // namespace qscale
