// SPDX-License-Identifier: Apache-2.0

#include "qscale/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "qscale/errors.hpp"

namespace qscale {

double loss_floor(const ScalingParams& params, std::optional<double> fixed_n) {
  if (params.form == LawForm::reduced) return params.e_floor;
  if (!fixed_n)
    throw DomainError("full-form floor needs a fixed model size");
  if (!(std::isfinite(*fixed_n) && *fixed_n >= 1.0))
    throw DomainError("model size n must be >= 1");
  return params.e_floor +
         std::exp(std::log(*params.a) - *params.alpha * std::log(*fixed_n));
}

double iso_loss_data(const ScalingParams& params, double target_loss, double q,
                     std::optional<double> fixed_n) {
  if (!(std::isfinite(q) && q > 0.0 && q <= 1.0))
    throw DomainError("quality q must lie in (0, 1]");
  const double floor = loss_floor(params, fixed_n);
  if (!(target_loss > floor))
    throw InfeasibleError("target loss is at or below the achievable floor");
  if (params.beta == 0.0)
    throw NoSolutionError("beta = 0: loss does not depend on d");
  const double ln_d = (std::log(params.b) - params.gamma * std::log(q) -
                       std::log(target_loss - floor)) /
                      params.beta;
  return std::exp(ln_d);
}

std::optional<double> iso_loss_quality(const ScalingParams& params,
                                       double target_loss, double d,
                                       std::optional<double> fixed_n) {
  if (!(std::isfinite(d) && d >= 1.0))
    throw DomainError("token count d must be >= 1");
  const double floor = loss_floor(params, fixed_n);
  if (!(target_loss > floor))
    throw InfeasibleError("target loss is at or below the achievable floor");
  const double ln_required = std::log(params.b) - params.beta * std::log(d) -
                             std::log(target_loss - floor);
  if (params.gamma == 0.0) {
    if (ln_required == 0.0) return 1.0;
    throw NoSolutionError("gamma = 0: quality cannot close the loss gap");
  }
  const double ln_q = ln_required / params.gamma;
  if (ln_q > 0.0) return std::nullopt;  // would need q > 1
  return std::exp(ln_q);
}

double required_model_size(const ScalingParams& params, double target_loss,
                           double d, double q) {
  if (params.form != LawForm::full)
    throw DomainError("required_model_size needs the full form");
  if (!(std::isfinite(d) && d >= 1.0))
    throw DomainError("token count d must be >= 1");
  if (!(std::isfinite(q) && q > 0.0 && q <= 1.0))
    throw DomainError("quality q must lie in (0, 1]");
  const double data_term = std::exp(std::log(params.b) -
                                    params.beta * std::log(d) -
                                    params.gamma * std::log(q));
  const double gap = target_loss - params.e_floor - data_term;
  if (!(gap > 0.0))
    throw InfeasibleError(
        "target loss is at or below the floor plus the data term");
  if (*params.alpha == 0.0)
    throw NoSolutionError("alpha = 0: loss does not depend on n");
  return std::exp((std::log(*params.a) - std::log(gap)) / *params.alpha);
}

double substitution_ratio(const ScalingParams& params, double q) {
  if (!(std::isfinite(q) && q > 0.0 && q <= 1.0))
    throw DomainError("quality q must lie in (0, 1]");
  if (params.beta == 0.0)
    throw NoSolutionError("beta = 0: substitution ratio is degenerate");
  if (!(params.gamma > 0.0))
    throw DomainError("substitution ratio needs gamma > 0");
  return -params.gamma / params.beta;
}

ContourSeries contour_series(const ScalingParams& params, double target_loss,
                             std::span<const double> q_grid,
                             std::optional<double> fixed_n) {
  ContourSeries series;
  series.target_loss = target_loss;
  series.params = params;
  series.fixed_n = fixed_n;
  std::vector<double> qs(q_grid.begin(), q_grid.end());
  std::sort(qs.begin(), qs.end());
  series.points.reserve(qs.size());
  for (const double q : qs)
    series.points.push_back({q, iso_loss_data(params, target_loss, q, fixed_n)});
  return series;
}

DeltaDiagnostic delta_diagnostic(std::span<const RunRecord> runs_at_d,
                                 double gamma_hat,
                                 const ScalingParams& params) {
  if (runs_at_d.empty()) throw DomainError("delta diagnostic needs runs");
  if (!(gamma_hat > 0.0)) throw DomainError("gamma_hat must be > 0");
  const double d = runs_at_d.front().d_tokens;
  for (const RunRecord& run : runs_at_d) {
    run.validate();
    if (run.d_tokens != d)
      throw DomainError("delta diagnostic runs must share d_tokens");
  }

  double baseline_sum = 0.0;
  int baseline_count = 0;
  for (const RunRecord& run : runs_at_d) {
    if (run.quality.q == 1.0) {
      baseline_sum += run.loss;
      ++baseline_count;
    }
  }
  if (baseline_count == 0)
    throw MissingBaselineError("no q = 1 baseline run at this d_tokens");
  const double baseline = baseline_sum / baseline_count;

  DeltaDiagnostic diag;
  diag.d_tokens = d;
  diag.predicted_slope =
      std::exp(std::log(params.b) - params.beta * std::log(d));
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (const RunRecord& run : runs_at_d) {
    const double x = std::expm1(-gamma_hat * std::log(run.quality.q));
    const double y = run.loss - baseline;
    diag.x.push_back(x);
    diag.y.push_back(y);
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  if (sxx == 0.0) {
    diag.degenerate = true;
    return diag;
  }
  diag.slope = sxy / sxx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < diag.x.size(); ++i) {
    const double r = diag.y[i] - diag.slope * diag.x[i];
    ss_res += r * r;
  }
  diag.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return diag;
}

HoldoutReport holdout_eval(const ScalingParams& params,
                           std::span<const RunRecord> runs) {
  if (runs.empty()) throw DomainError("holdout evaluation needs runs");
  HoldoutReport report;
  report.residuals.reserve(runs.size());
  double ss = 0.0;
  for (const RunRecord& run : runs) {
    const double res =
        std::log(evaluate_for_run(params, run)) - std::log(run.loss);
    report.residuals.push_back(res);
    ss += res * res;
    report.max_abs_residual = std::max(report.max_abs_residual, std::fabs(res));
  }
  report.rms_log_residual = std::sqrt(ss / static_cast<double>(runs.size()));
  return report;
}

HoldoutReport holdout_eval(const ScalingParams& params,
                           std::span<const RunRecord> runs, LawForm use_form) {
  if (use_form != params.form)
    throw DomainError("requested law form does not match the parameters");
  return holdout_eval(params, runs);
}

}  // namespace qscale
