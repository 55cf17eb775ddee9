// SPDX-License-Identifier: Apache-2.0
//
// Inversions of a fitted law (iso-loss contours, required model size,
// quality-for-data substitution) and the delta-loss linearity diagnostic.

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "qscale/law.hpp"

namespace qscale {

struct ContourPoint {
  double q = 1.0;
  double d = 1.0;
};

// Iso-loss contour at fixed model size: every point evaluates to target_loss.
struct ContourSeries {
  double target_loss = 0.0;
  std::vector<ContourPoint> points;  // ascending q; d strictly decreasing
  ScalingParams params;
  std::optional<double> fixed_n;
};

struct DeltaDiagnostic {
  double d_tokens = 0.0;
  std::vector<double> x;  // q^{-gamma_hat} - 1 per run
  std::vector<double> y;  // loss minus the q = 1 baseline at this d
  double slope = 0.0;     // zero-intercept least squares, sum xy / sum x^2
  double r_squared = 0.0;  // uncentered: 1 - SS_res / sum y^2
  double predicted_slope = 0.0;  // B d^{-beta}
  bool degenerate = false;       // every run at q = 1
};

struct HoldoutReport {
  double rms_log_residual = 0.0;
  double max_abs_residual = 0.0;
  std::vector<double> residuals;  // ln(predicted) - ln(observed)
};

// Loss floor at fixed model size: E+ for the reduced form, E + A/n^alpha for
// the full form (fixed_n required there).
double loss_floor(const ScalingParams& params, std::optional<double> fixed_n);

// Tokens needed for target_loss at quality q:
// d = (B / (q^gamma (target - floor)))^{1/beta}.
double iso_loss_data(const ScalingParams& params, double target_loss, double q,
                     std::optional<double> fixed_n = {});

// Quality needed for target_loss at d tokens; nullopt when the requirement
// exceeds q = 1 (never clamped).
std::optional<double> iso_loss_quality(const ScalingParams& params,
                                       double target_loss, double d,
                                       std::optional<double> fixed_n = {});

// Model size needed for target_loss at (d, q); full form only.
double required_model_size(const ScalingParams& params, double target_loss,
                           double d, double q);

// Iso-loss elasticity d ln D / d ln Q at fixed N: exactly -gamma/beta.
double substitution_ratio(const ScalingParams& params, double q);

ContourSeries contour_series(const ScalingParams& params, double target_loss,
                             std::span<const double> q_grid,
                             std::optional<double> fixed_n = {});

// Runs must share d_tokens and include at least one q = 1 baseline; baselines
// are replicate-averaged before differencing.
DeltaDiagnostic delta_diagnostic(std::span<const RunRecord> runs_at_d,
                                 double gamma_hat, const ScalingParams& params);

HoldoutReport holdout_eval(const ScalingParams& params,
                           std::span<const RunRecord> runs);

// Variant that checks the caller's intended law form against params.form.
HoldoutReport holdout_eval(const ScalingParams& params,
                           std::span<const RunRecord> runs, LawForm use_form);

}  // namespace qscale
