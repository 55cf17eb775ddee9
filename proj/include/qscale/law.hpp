// SPDX-License-Identifier: Apache-2.0
//
// Quality-aware scaling law L(N, D, Q) = A/N^a + B/(D^b Q^g) + E and the
// quality measures and effective-sample-size links that feed it. Everything
// here is a pure function of its arguments and safe to call concurrently.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "qscale/errors.hpp"

namespace qscale {

enum class Task { nmt, clm, other };
enum class LawForm { full, reduced };
enum class Provenance { corruption_rate, deficiency, assigned };

// Dimensionless data quality in (0, 1] with a record of how it was obtained.
struct QualityScore {
  double q = 1.0;
  Provenance provenance = Provenance::assigned;

  bool operator==(const QualityScore&) const = default;
};

// Q = 1 - CR. Requires 0 <= cr < 1.
QualityScore quality_from_corruption_rate(double cr);

// Q = exp(-delta). Requires delta >= 0.
QualityScore quality_from_deficiency(double delta);

// Deficiencies of independent datasets add: Delta(union) = Delta1 + Delta2.
double combine_deficiency(double delta1, double delta2);

// One training run's observables.
struct RunRecord {
  Task task = Task::other;
  double n_params = 1.0;  // unused by the reduced law but retained
  double d_tokens = 1.0;
  QualityScore quality;
  double loss = 1.0;  // nats
  std::optional<int> replicate;
  std::optional<std::int64_t> seed;

  void validate() const;  // throws DomainError

  bool operator==(const RunRecord&) const = default;
};

// Law coefficients. The reduced form stores E+ in e_floor and omits a/alpha.
struct ScalingParams {
  LawForm form = LawForm::reduced;
  std::optional<double> a;      // A (full form only)
  std::optional<double> alpha;  // (full form only)
  double b = 1.0;               // B
  double beta = 0.0;
  double gamma = 0.0;
  double e_floor = 0.0;  // E for the full law, E+ for the reduced law

  static ScalingParams reduced(double b, double beta, double gamma,
                               double e_plus);
  static ScalingParams full(double a, double alpha, double b, double beta,
                            double gamma, double e);
  void validate() const;

  bool operator==(const ScalingParams&) const = default;
};

// Collapse a full law to the reduced form at fixed model size:
// E+ = E + A/n^alpha.
ScalingParams reduce_at_model_size(const ScalingParams& params, double n);

// A/n^alpha + B/(d^beta q^gamma) + E. Power terms are evaluated in log space.
double evaluate_full(const ScalingParams& params, double n, double d,
                     double q);

// B/(d^beta q^gamma) + E+.
double evaluate_reduced(const ScalingParams& params, double d, double q);

// Dispatch on params.form, pulling n from the run when needed.
double evaluate_for_run(const ScalingParams& params, const RunRecord& run);

// Excess loss versus clean data at the same d: B d^-beta (q^-gamma - 1).
double delta_loss(const ScalingParams& params, double d, double q);

// Effective-sample-size link functions g(Q). All satisfy g(1) = 1 and are
// monotone nondecreasing on their valid domain:
//   power_law     g(q) = q^gamma          on (0, 1]
//   rcn           g(q) = (2q - 1)^2       on (1/2, 1]
//   gaussian_snr  g(q) = q                on (0, 1]
//   bsc_capacity  g(q) = 1 - H2(1 - q)    on (1/2, 1], H2 in bits
struct LinkFunction {
  enum class Kind { power_law, rcn, gaussian_snr, bsc_capacity };

  Kind kind = Kind::power_law;
  double gamma = 1.0;  // power_law only

  static LinkFunction power_law(double gamma);
  static LinkFunction rcn();
  static LinkFunction gaussian_snr();
  static LinkFunction bsc_capacity();
};

double link_g(const LinkFunction& link, double q);

// D_eff = d * g(q).
double effective_tokens(double d, const LinkFunction& link, double q);

// Zero-intercept log-log least-squares exponent of g over a quality grid:
// sum_i ln g(q_i) ln q_i / sum_i (ln q_i)^2.
double local_power_exponent(const LinkFunction& link,
                            std::span<const double> q_grid);

}  // namespace qscale
