// SPDX-License-Identifier: Apache-2.0

#include "qscale/synthetic.hpp"

#include <cmath>

#include "qscale/errors.hpp"
#include "qscale/rng.hpp"

namespace qscale {

void SyntheticStudySpec::validate() const {
  truth.validate();
  if (d_values.empty() || q_values.empty())
    throw DomainError("synthetic grid needs d and q values");
  if (truth.form == LawForm::full && n_values.empty())
    throw DomainError("full-form synthetic grid needs n values");
  if (truth.form == LawForm::reduced && !n_values.empty())
    throw DomainError("reduced-form synthetic grid must not carry n values");
  if (replicates < 1) throw DomainError("replicates must be >= 1");
  if (!(log_noise_sigma >= 0.0))
    throw DomainError("log noise sigma must be >= 0");
  for (const double d : d_values)
    if (!(d >= 1.0)) throw DomainError("d values must be >= 1");
  for (const double q : q_values)
    if (!(q > 0.0 && q <= 1.0)) throw DomainError("q values must lie in (0, 1]");
  for (const double n : n_values)
    if (!(n >= 1.0)) throw DomainError("n values must be >= 1");
}

std::vector<RunRecord> generate_runs(const SyntheticStudySpec& spec) {
  spec.validate();
  const bool full = spec.truth.form == LawForm::full;
  const std::size_t n_cells = full ? spec.n_values.size() : 1;

  std::vector<RunRecord> runs;
  runs.reserve(spec.d_values.size() * spec.q_values.size() * n_cells *
               spec.replicates);
  for (std::size_t di = 0; di < spec.d_values.size(); ++di) {
    for (std::size_t qi = 0; qi < spec.q_values.size(); ++qi) {
      for (std::size_t ni = 0; ni < n_cells; ++ni) {
        for (int rep = 1; rep <= spec.replicates; ++rep) {
          const double d = spec.d_values[di];
          const double q = spec.q_values[qi];
          const double mean =
              full ? evaluate_full(spec.truth, spec.n_values[ni], d, q)
                   : evaluate_reduced(spec.truth, d, q);
          const std::uint64_t cell_key = rng::key3(
              rng::key3(spec.seed, di, qi), ni, static_cast<std::uint64_t>(rep));
          double loss = mean;
          if (spec.log_noise_sigma > 0.0) {
            rng::SplitMix64 stream(cell_key);
            loss = mean * std::exp(spec.log_noise_sigma * stream.next_normal());
          }
          RunRecord run;
          run.task = Task::other;
          run.n_params = full ? spec.n_values[ni] : 1.0;
          run.d_tokens = d;
          run.quality = {q, Provenance::assigned};
          run.loss = loss;
          run.replicate = rep;
          run.seed = static_cast<std::int64_t>(cell_key);
          runs.push_back(run);
        }
      }
    }
  }
  return runs;
}

namespace {

double rel_error(double fitted, double truth) {
  if (truth == 0.0) return std::fabs(fitted);
  return std::fabs(fitted - truth) / std::fabs(truth);
}

}  // namespace

RecoveryResult recovery_experiment(const SyntheticStudySpec& spec,
                                   const FitConfig& config) {
  const std::vector<RunRecord> runs = generate_runs(spec);
  RecoveryResult result;
  result.truth = spec.truth;
  result.fitted = fit(runs, config);
  const ScalingParams& f = result.fitted.params;
  const ScalingParams& t = spec.truth;
  result.param_errors["b"] = rel_error(f.b, t.b);
  result.param_errors["beta"] = rel_error(f.beta, t.beta);
  result.param_errors["gamma"] = rel_error(f.gamma, t.gamma);
  result.param_errors["e_floor"] = rel_error(f.e_floor, t.e_floor);
  if (t.form == LawForm::full && f.form == LawForm::full) {
    result.param_errors["a"] = rel_error(*f.a, *t.a);
    result.param_errors["alpha"] = rel_error(*f.alpha, *t.alpha);
  }
  return result;
}

}  // namespace qscale
