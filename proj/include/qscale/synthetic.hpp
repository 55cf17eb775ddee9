// SPDX-License-Identifier: Apache-2.0
//
// Law-governed synthetic run grids with controlled log-normal observation
// noise; the end-to-end recovery oracle for the fitter.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qscale/fit.hpp"
#include "qscale/law.hpp"

namespace qscale {

struct SyntheticStudySpec {
  ScalingParams truth;
  std::vector<double> d_values;
  std::vector<double> q_values;
  std::vector<double> n_values;  // required for the full form, else empty
  int replicates = 3;
  double log_noise_sigma = 0.0;  // multiplicative log-normal noise on loss
  std::uint64_t seed = 0;

  void validate() const;
};

// One RunRecord per (d, q, n, replicate) cell with
// loss = evaluate(truth, ...) * exp(eps), eps ~ N(0, sigma^2). Cell noise is
// keyed by (seed, d-index, q-index, n-index, replicate), so enlarging the
// grid never perturbs existing cells.
std::vector<RunRecord> generate_runs(const SyntheticStudySpec& spec);

struct RecoveryResult {
  ScalingParams truth;
  FitReport fitted;
  // Relative error per parameter (absolute when the truth is zero).
  std::map<std::string, double> param_errors;
};

RecoveryResult recovery_experiment(const SyntheticStudySpec& spec,
                                   const FitConfig& config);

}  // namespace qscale
