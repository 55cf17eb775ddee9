// SPDX-License-Identifier: Apache-2.0

#include "qscale/law.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace qscale {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw DomainError(msg);
}

void check_nd(double n, double d) {
  require(std::isfinite(n) && n >= 1.0, "model size n must be >= 1");
  require(std::isfinite(d) && d >= 1.0, "token count d must be >= 1");
}

void check_q(double q) {
  require(std::isfinite(q) && q > 0.0 && q <= 1.0, "quality q must lie in (0, 1]");
}

// Binary entropy in bits; H2(0) = H2(1) = 0.
double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -(p * std::log2(p) + (1.0 - p) * std::log2(1.0 - p));
}

}  // namespace

QualityScore quality_from_corruption_rate(double cr) {
  require(std::isfinite(cr) && cr >= 0.0 && cr < 1.0,
          "corruption rate must lie in [0, 1)");
  return {1.0 - cr, Provenance::corruption_rate};
}

QualityScore quality_from_deficiency(double delta) {
  require(std::isfinite(delta) && delta >= 0.0, "deficiency must be >= 0");
  const double q = std::exp(-delta);
  require(q > 0.0, "deficiency too large: quality underflows to 0");
  return {q, Provenance::deficiency};
}

double combine_deficiency(double delta1, double delta2) {
  require(std::isfinite(delta1) && delta1 >= 0.0 &&
              std::isfinite(delta2) && delta2 >= 0.0,
          "deficiencies must be >= 0");
  return delta1 + delta2;
}

void RunRecord::validate() const {
  require(std::isfinite(n_params) && n_params >= 1.0, "n_params must be >= 1");
  require(std::isfinite(d_tokens) && d_tokens >= 1.0, "d_tokens must be >= 1");
  require(std::isfinite(loss) && loss > 0.0, "loss must be > 0");
  check_q(quality.q);
}

ScalingParams ScalingParams::reduced(double b, double beta, double gamma,
                                     double e_plus) {
  ScalingParams p;
  p.form = LawForm::reduced;
  p.b = b;
  p.beta = beta;
  p.gamma = gamma;
  p.e_floor = e_plus;
  p.validate();
  return p;
}

ScalingParams ScalingParams::full(double a, double alpha, double b,
                                  double beta, double gamma, double e) {
  ScalingParams p;
  p.form = LawForm::full;
  p.a = a;
  p.alpha = alpha;
  p.b = b;
  p.beta = beta;
  p.gamma = gamma;
  p.e_floor = e;
  p.validate();
  return p;
}

void ScalingParams::validate() const {
  if (form == LawForm::full) {
    require(a.has_value() && alpha.has_value(),
            "full form requires a and alpha");
    require(std::isfinite(*a) && *a > 0.0, "A must be > 0");
    require(std::isfinite(*alpha) && *alpha >= 0.0 && *alpha <= 1.0,
            "alpha must lie in [0, 1]");
  } else {
    require(!a.has_value() && !alpha.has_value(),
            "reduced form must not carry a or alpha");
  }
  require(std::isfinite(b) && b > 0.0, "B must be > 0");
  require(std::isfinite(beta) && beta >= 0.0 && beta <= 1.0,
          "beta must lie in [0, 1]");
  require(std::isfinite(gamma) && gamma >= 0.0 && gamma <= 1.0,
          "gamma must lie in [0, 1]");
  require(std::isfinite(e_floor) && e_floor >= 0.0, "E must be >= 0");
}

ScalingParams reduce_at_model_size(const ScalingParams& params, double n) {
  params.validate();
  require(params.form == LawForm::full, "reduce_at_model_size needs the full form");
  require(std::isfinite(n) && n >= 1.0, "model size n must be >= 1");
  const double model_term = std::exp(std::log(*params.a) - *params.alpha * std::log(n));
  return ScalingParams::reduced(params.b, params.beta, params.gamma,
                                params.e_floor + model_term);
}

double evaluate_full(const ScalingParams& params, double n, double d,
                     double q) {
  require(params.form == LawForm::full, "evaluate_full needs the full form");
  check_nd(n, d);
  check_q(q);
  const double model_term =
      std::exp(std::log(*params.a) - *params.alpha * std::log(n));
  const double data_term = std::exp(std::log(params.b) -
                                    params.beta * std::log(d) -
                                    params.gamma * std::log(q));
  return model_term + data_term + params.e_floor;
}

double evaluate_reduced(const ScalingParams& params, double d, double q) {
  require(params.form == LawForm::reduced,
          "evaluate_reduced needs the reduced form");
  check_nd(1.0, d);
  check_q(q);
  const double data_term = std::exp(std::log(params.b) -
                                    params.beta * std::log(d) -
                                    params.gamma * std::log(q));
  return data_term + params.e_floor;
}

double evaluate_for_run(const ScalingParams& params, const RunRecord& run) {
  if (params.form == LawForm::full)
    return evaluate_full(params, run.n_params, run.d_tokens, run.quality.q);
  return evaluate_reduced(params, run.d_tokens, run.quality.q);
}

double delta_loss(const ScalingParams& params, double d, double q) {
  check_nd(1.0, d);
  check_q(q);
  const double scale = std::exp(std::log(params.b) - params.beta * std::log(d));
  return scale * std::expm1(-params.gamma * std::log(q));
}

LinkFunction LinkFunction::power_law(double gamma) {
  if (!(std::isfinite(gamma) && gamma >= 0.0))
    throw DomainError("power_law link requires gamma >= 0");
  return {Kind::power_law, gamma};
}
LinkFunction LinkFunction::rcn() { return {Kind::rcn, 0.0}; }
LinkFunction LinkFunction::gaussian_snr() { return {Kind::gaussian_snr, 0.0}; }
LinkFunction LinkFunction::bsc_capacity() { return {Kind::bsc_capacity, 0.0}; }

double link_g(const LinkFunction& link, double q) {
  switch (link.kind) {
    case LinkFunction::Kind::power_law:
      check_q(q);
      return std::pow(q, link.gamma);
    case LinkFunction::Kind::gaussian_snr:
      check_q(q);
      return q;
    case LinkFunction::Kind::rcn:
      require(q > 0.5 && q <= 1.0, "rcn link requires q in (1/2, 1]");
      return (2.0 * q - 1.0) * (2.0 * q - 1.0);
    case LinkFunction::Kind::bsc_capacity:
      require(q > 0.5 && q <= 1.0, "bsc_capacity link requires q in (1/2, 1]");
      return 1.0 - binary_entropy(1.0 - q);
  }
  throw DomainError("unknown link kind");
}

double effective_tokens(double d, const LinkFunction& link, double q) {
  require(std::isfinite(d) && d >= 1.0, "token count d must be >= 1");
  return d * link_g(link, q);
}

double local_power_exponent(const LinkFunction& link,
                            std::span<const double> q_grid) {
  require(q_grid.size() >= 2, "quality grid needs at least two points");
  double num = 0.0;
  double den = 0.0;
  for (const double q : q_grid) {
    const double g = link_g(link, q);
    require(g > 0.0, "link value must be positive on the grid");
    const double lq = std::log(q);
    num += std::log(g) * lq;
    den += lq * lq;
  }
  if (den == 0.0)
    throw DomainError("degenerate grid: every quality equals 1");
  return num / den;
}

}  // namespace qscale
