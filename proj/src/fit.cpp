// SPDX-License-Identifier: Apache-2.0

#include "qscale/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qscale/errors.hpp"

namespace qscale {

namespace {

constexpr double kTieTol = 1e-12;

double huber_slope(double r, double delta) {
  return std::fabs(r) <= delta ? r : (r > 0.0 ? delta : -delta);
}

int param_count(LawForm form) { return form == LawForm::full ? 6 : 4; }

// Precomputed per-run logs shared by every objective evaluation.
struct LogData {
  std::vector<double> ln_n, ln_d, ln_q, ln_l;
  std::vector<double> d, q, l;

  explicit LogData(std::span<const RunRecord> runs) {
    ln_n.reserve(runs.size());
    for (const RunRecord& r : runs) {
      r.validate();
      ln_n.push_back(std::log(r.n_params));
      ln_d.push_back(std::log(r.d_tokens));
      ln_q.push_back(std::log(r.quality.q));
      ln_l.push_back(std::log(r.loss));
      d.push_back(r.d_tokens);
      q.push_back(r.quality.q);
      l.push_back(r.loss);
    }
  }
};

double huber_objective(std::span<const double> theta, const LogData& data,
                       LawForm form, double delta, std::span<double> grad) {
  const bool full = form == LawForm::full;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  // theta layout: full [a, alpha, b, e, beta, gamma], reduced [b, e, beta, gamma]
  const double a = full ? theta[0] : 0.0;
  const double alpha = full ? theta[1] : 0.0;
  const std::size_t off = full ? 2 : 0;
  const double b = theta[off + 0];
  const double e = theta[off + 1];
  const double beta = theta[off + 2];
  const double gamma = theta[off + 3];

  double total = 0.0;
  for (std::size_t i = 0; i < data.ln_d.size(); ++i) {
    const double u = b - beta * data.ln_d[i] - gamma * data.ln_q[i];
    double s;
    double w_model = 0.0;
    if (full) {
      const double t0 = a - alpha * data.ln_n[i];
      const double m = std::max(std::max(t0, u), e);
      const double z =
          std::exp(t0 - m) + std::exp(u - m) + std::exp(e - m);
      s = m + std::log(z);
      w_model = std::exp(t0 - s);
    } else {
      const double m = std::max(u, e);
      s = m + std::log(std::exp(u - m) + std::exp(e - m));
    }
    const double r = s - data.ln_l[i];
    const double abs_r = std::fabs(r);
    total += abs_r <= delta ? 0.5 * r * r : delta * (abs_r - 0.5 * delta);

    if (want_grad) {
      const double h = huber_slope(r, delta);
      const double w_data = std::exp(u - s);
      const double w_floor = std::exp(e - s);
      if (full) {
        grad[0] += h * w_model;
        grad[1] += h * w_model * -data.ln_n[i];
      }
      grad[off + 0] += h * w_data;
      grad[off + 1] += h * w_floor;
      grad[off + 2] += h * w_data * -data.ln_d[i];
      grad[off + 3] += h * w_data * -data.ln_q[i];
    }
  }
  return total;
}

double ls_objective(std::span<const double> theta, const LogData& data,
                    LawForm form, std::span<double> grad) {
  const bool full = form == LawForm::full;
  const bool want_grad = !grad.empty();
  if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);

  const double a = full ? theta[0] : 0.0;
  const double alpha = full ? theta[1] : 0.0;
  const std::size_t off = full ? 2 : 0;
  const double b = theta[off + 0];
  const double e = theta[off + 1];
  const double beta = theta[off + 2];
  const double gamma = theta[off + 3];

  double total = 0.0;
  for (std::size_t i = 0; i < data.ln_d.size(); ++i) {
    const double model_term =
        full ? std::exp(a - alpha * data.ln_n[i]) : 0.0;
    const double data_term =
        std::exp(b - beta * data.ln_d[i] - gamma * data.ln_q[i]);
    const double floor_term = std::exp(e);
    const double res = model_term + data_term + floor_term - data.l[i];
    total += res * res;

    if (want_grad) {
      const double two_r = 2.0 * res;
      if (full) {
        grad[0] += two_r * model_term;
        grad[1] += two_r * model_term * -data.ln_n[i];
      }
      grad[off + 0] += two_r * data_term;
      grad[off + 1] += two_r * floor_term;
      grad[off + 2] += two_r * data_term * -data.ln_d[i];
      grad[off + 3] += two_r * data_term * -data.ln_q[i];
    }
  }
  return total;
}

Box make_box(const FitConfig& config) {
  Box box;
  if (config.law_form == LawForm::full) {
    box.lo = {config.a_bounds.lo, config.alpha_bounds.lo, config.b_bounds.lo,
              config.e_bounds.lo, config.beta_bounds.lo,
              config.gamma_bounds.lo};
    box.hi = {config.a_bounds.hi, config.alpha_bounds.hi, config.b_bounds.hi,
              config.e_bounds.hi, config.beta_bounds.hi,
              config.gamma_bounds.hi};
  } else {
    box.lo = {config.b_bounds.lo, config.e_bounds.lo, config.beta_bounds.lo,
              config.gamma_bounds.lo};
    box.hi = {config.b_bounds.hi, config.e_bounds.hi, config.beta_bounds.hi,
              config.gamma_bounds.hi};
  }
  return box;
}

bool lex_less(std::span<const double> lhs, std::span<const double> rhs) {
  return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(),
                                      rhs.end());
}

// Canonical run order so the objective's summation order (and therefore the
// whole fit) is invariant to how the caller ordered the runs.
bool canonical_less(const RunRecord& lhs, const RunRecord& rhs) {
  const auto key = [](const RunRecord& r) {
    return std::make_tuple(r.d_tokens, r.quality.q, r.loss, r.n_params,
                           static_cast<int>(r.task), r.replicate, r.seed);
  };
  return key(lhs) < key(rhs);
}

std::vector<std::string> find_bound_hits(std::span<const double> theta,
                                         const Box& box, LawForm form) {
  static const char* kFullNames[] = {"a", "alpha", "b", "e", "beta", "gamma"};
  static const char* kReducedNames[] = {"b", "e", "beta", "gamma"};
  const char** names = form == LawForm::full ? kFullNames : kReducedNames;
  std::vector<std::string> hits;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (theta[i] <= box.lo[i] + kTieTol || theta[i] >= box.hi[i] - kTieTol)
      hits.push_back(names[i]);
  }
  return hits;
}

}  // namespace

double huber(double residual, double delta) {
  if (!(delta > 0.0)) throw DomainError("huber delta must be > 0");
  const double abs_r = std::fabs(residual);
  return abs_r <= delta ? 0.5 * residual * residual
                        : delta * (abs_r - 0.5 * delta);
}

double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) throw DomainError("log_sum_exp of an empty list");
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double z = 0.0;
  for (const double t : terms) z += std::exp(t - m);
  return m + std::log(z);
}

double objective_reduced(std::span<const double> theta,
                         std::span<const RunRecord> runs, double delta,
                         std::span<double> grad) {
  if (!(delta > 0.0)) throw DomainError("huber delta must be > 0");
  const LogData data(runs);
  return huber_objective(theta, data, LawForm::reduced, delta, grad);
}

double objective_full(std::span<const double> theta,
                      std::span<const RunRecord> runs, double delta,
                      std::span<double> grad) {
  if (!(delta > 0.0)) throw DomainError("huber delta must be > 0");
  const LogData data(runs);
  return huber_objective(theta, data, LawForm::full, delta, grad);
}

double objective_least_squares(std::span<const double> theta,
                               std::span<const RunRecord> runs, LawForm form,
                               std::span<double> grad) {
  const LogData data(runs);
  return ls_objective(theta, data, form, grad);
}

std::vector<double> Range::values() const {
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo <= hi))
    throw DomainError("range endpoints must be finite with lo <= hi");
  if (lo == hi) return {lo};
  if (!(step > 0.0)) throw DomainError("range step must be > 0");
  const int count = static_cast<int>(std::floor((hi - lo) / step + 0.5)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double v = lo + i * step;
    if (v > hi + 1e-9 * std::max(1.0, std::fabs(hi))) break;
    out.push_back(v);
  }
  return out;
}

void FitConfig::validate() const {
  if (!(huber_delta > 0.0)) throw DomainError("huber delta must be > 0");
  if (max_iterations < 1) throw DomainError("max_iterations must be >= 1");
  if (!(convergence_tol > 0.0)) throw DomainError("convergence_tol must be > 0");
  for (const Interval& iv : {b_bounds, e_bounds, beta_bounds, gamma_bounds,
                             a_bounds, alpha_bounds}) {
    if (!(iv.lo < iv.hi)) throw DomainError("parameter bounds are degenerate");
  }
}

std::vector<std::vector<double>> grid_starts(const GridSpec& grid,
                                             LawForm form) {
  const std::vector<double> bs = grid.b_range.values();
  const std::vector<double> es = grid.e_range.values();
  const std::vector<double> betas = grid.beta_range.values();
  const std::vector<double> gammas = grid.gamma_range.values();

  std::vector<std::vector<double>> starts;
  if (form == LawForm::full) {
    const std::vector<double> as =
        (grid.a_range ? *grid.a_range : grid.b_range).values();
    const std::vector<double> alphas =
        (grid.alpha_range ? *grid.alpha_range : grid.beta_range).values();
    starts.reserve(as.size() * alphas.size() * bs.size() * es.size() *
                   betas.size() * gammas.size());
    for (double a : as)
      for (double alpha : alphas)
        for (double b : bs)
          for (double e : es)
            for (double beta : betas)
              for (double gamma : gammas)
                starts.push_back({a, alpha, b, e, beta, gamma});
  } else {
    starts.reserve(bs.size() * es.size() * betas.size() * gammas.size());
    for (double b : bs)
      for (double e : es)
        for (double beta : betas)
          for (double gamma : gammas)
            starts.push_back({b, e, beta, gamma});
  }
  if (starts.empty()) throw DomainError("grid produced no start points");
  return starts;
}

FitReport fit(std::span<const RunRecord> runs, const FitConfig& config) {
  config.validate();
  const int n_params = param_count(config.law_form);
  if (static_cast<int>(runs.size()) < n_params)
    throw InsufficientDataError("insufficient runs: need at least " +
                                std::to_string(n_params));
  std::vector<RunRecord> ordered(runs.begin(), runs.end());
  std::sort(ordered.begin(), ordered.end(), canonical_less);
  const LogData data(ordered);
  if (config.law_form == LawForm::reduced) {
    auto distinct = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return std::unique(v.begin(), v.end()) - v.begin();
    };
    if (distinct(data.d) < 2 || distinct(data.q) < 2)
      throw InsufficientDataError(
          "insufficient runs: reduced fit needs >= 2 distinct d_tokens and "
          ">= 2 distinct quality values");
  }

  const ObjectiveFn objective = [&](std::span<const double> theta,
                                    std::span<double> grad) {
    if (config.method == FitMethod::least_squares)
      return ls_objective(theta, data, config.law_form, grad);
    return huber_objective(theta, data, config.law_form, config.huber_delta,
                           grad);
  };

  const std::vector<std::vector<double>> starts =
      grid_starts(config.grid, config.law_form);
  const Box box = make_box(config);
  MinimizeOptions opts;
  opts.max_iterations = config.max_iterations;
  opts.f_tol = config.convergence_tol;

  std::vector<MinimizeResult> results(starts.size());
  const int n_starts = static_cast<int>(starts.size());
  if (config.exec == Exec::parallel) {
#ifdef _OPENMP
    const int threads =
        config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (int i = 0; i < n_starts; ++i)
      results[i] = minimize_bounded(objective, starts[i], box, opts);
#else
    for (int i = 0; i < n_starts; ++i)
      results[i] = minimize_bounded(objective, starts[i], box, opts);
#endif
  } else {
    for (int i = 0; i < n_starts; ++i)
      results[i] = minimize_bounded(objective, starts[i], box, opts);
  }

  // Deterministic reduction: smallest objective wins; ties within kTieTol go
  // to the lexicographically smallest theta, then the smallest grid index.
  int best = -1;
  int n_converged = 0;
  for (int i = 0; i < n_starts; ++i) {
    const MinimizeResult& r = results[i];
    if (!r.converged || !std::isfinite(r.value)) continue;
    ++n_converged;
    if (best < 0) {
      best = i;
      continue;
    }
    const MinimizeResult& w = results[best];
    if (r.value < w.value - kTieTol ||
        (std::fabs(r.value - w.value) <= kTieTol && lex_less(r.x, w.x)))
      best = i;
  }
  if (best < 0)
    throw NumericalError("no multistart converged from any grid point");

  const MinimizeResult& winner = results[best];
  FitReport report;
  if (config.law_form == LawForm::full) {
    report.params = ScalingParams::full(
        std::exp(winner.x[0]), winner.x[1], std::exp(winner.x[2]),
        winner.x[4], winner.x[5], std::exp(winner.x[3]));
  } else {
    report.params = ScalingParams::reduced(std::exp(winner.x[0]), winner.x[2],
                                           winner.x[3], std::exp(winner.x[1]));
  }
  report.method = config.method;
  report.objective_value = winner.value;
  report.n_runs = static_cast<int>(runs.size());
  report.n_starts = n_starts;
  report.n_converged = n_converged;
  report.best_start_index = best;
  report.best_start = starts[best];
  report.residuals.reserve(runs.size());
  double ss = 0.0;
  for (const RunRecord& run : runs) {
    const double res =
        std::log(evaluate_for_run(report.params, run)) - std::log(run.loss);
    report.residuals.push_back(res);
    ss += res * res;
  }
  report.rms_log_residual =
      runs.empty() ? 0.0 : std::sqrt(ss / static_cast<double>(runs.size()));
  report.bound_hits = find_bound_hits(winner.x, box, config.law_form);
  return report;
}

}  // namespace qscale
