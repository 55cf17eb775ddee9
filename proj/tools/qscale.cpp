// SPDX-License-Identifier: Apache-2.0
//
// qscale: fit, invert, and interrogate the quality-aware scaling law
// L(N, D, Q) = A/N^a + B/(D^b Q^g) + E, and simulate corpus degradation.
//
// Exit codes: 0 success, 2 input/contract error, 3 infeasible or
// insufficient data, 4 numerical failure.

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qscale/analysis.hpp"
#include "qscale/corpus.hpp"
#include "qscale/errors.hpp"
#include "qscale/fit.hpp"
#include "qscale/io.hpp"
#include "qscale/synthetic.hpp"

namespace {

using namespace qscale;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumerical = 4;

int resolve_threads(std::optional<int> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("QSCALE_THREADS")) {
    try {
      return std::max(0, std::stoi(env));
    } catch (...) {
      std::cerr << "warning: ignoring malformed QSCALE_THREADS='" << env
                << "'\n";
    }
  }
  return 0;
}

// Grid override syntax: name=lo:hi:step joined by commas, e.g.
// "b=0:25:5,beta=0:0.4:0.05". Unmentioned ranges keep their defaults.
void apply_grid_override(GridSpec& grid, const std::string& text) {
  std::map<std::string, Range*> ranges{{"b", &grid.b_range},
                                       {"e", &grid.e_range},
                                       {"beta", &grid.beta_range},
                                       {"gamma", &grid.gamma_range}};
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    start = end + 1;
    if (item.empty()) continue;
    const std::size_t eq = item.find('=');
    if (eq == std::string::npos)
      throw ParseError("grid override '" + item + "' is not name=lo:hi:step");
    const std::string name = item.substr(0, eq);
    const std::string spec = item.substr(eq + 1);
    const std::size_t c1 = spec.find(':');
    const std::size_t c2 = c1 == std::string::npos ? std::string::npos
                                                   : spec.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw ParseError("grid override '" + item + "' is not name=lo:hi:step");
    Range r;
    r.lo = io::parse_double(spec.substr(0, c1), "grid override");
    r.hi = io::parse_double(spec.substr(c1 + 1, c2 - c1 - 1), "grid override");
    r.step = io::parse_double(spec.substr(c2 + 1), "grid override");
    if (name == "a") {
      grid.a_range = r;
    } else if (name == "alpha") {
      grid.alpha_range = r;
    } else {
      const auto it = ranges.find(name);
      if (it == ranges.end())
        throw ParseError("unknown grid parameter '" + name + "'");
      *it->second = r;
    }
  }
}

std::vector<double> parse_value_list(const std::string& text,
                                     const std::string& what) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    if (!item.empty()) values.push_back(io::parse_double(item, what));
    start = end + 1;
  }
  if (values.empty()) throw ParseError(what + ": empty value list");
  return values;
}

Range parse_colon_range(const std::string& text, const std::string& what) {
  const std::size_t c1 = text.find(':');
  const std::size_t c2 =
      c1 == std::string::npos ? std::string::npos : text.find(':', c1 + 1);
  if (c2 == std::string::npos)
    throw ParseError(what + " must be lo:hi:step");
  Range r;
  r.lo = io::parse_double(text.substr(0, c1), what);
  r.hi = io::parse_double(text.substr(c1 + 1, c2 - c1 - 1), what);
  r.step = io::parse_double(text.substr(c2 + 1), what);
  return r;
}

void print_fit_summary(const FitReport& report) {
  const ScalingParams& p = report.params;
  std::cout << "method          "
            << (report.method == FitMethod::huber ? "huber" : "least_squares")
            << "\n";
  std::cout << "law_form        "
            << (p.form == LawForm::full ? "full" : "reduced") << "\n";
  if (p.form == LawForm::full) {
    std::cout << "A               " << io::fmt_sci(*p.a) << "\n";
    std::cout << "alpha           " << io::fmt_sci(*p.alpha) << "\n";
  }
  std::cout << "B               " << io::fmt_sci(p.b) << "\n";
  std::cout << "beta            " << io::fmt_sci(p.beta) << "\n";
  std::cout << "gamma           " << io::fmt_sci(p.gamma) << "\n";
  std::cout << (p.form == LawForm::full ? "E               "
                                        : "E+              ")
            << io::fmt_sci(p.e_floor) << "\n";
  std::cout << "objective       " << io::fmt_sci(report.objective_value)
            << "\n";
  std::cout << "rms_log_resid   " << io::fmt_sci(report.rms_log_residual)
            << "\n";
  std::cout << "runs/starts/conv " << report.n_runs << "/" << report.n_starts
            << "/" << report.n_converged << "\n";
  if (!report.bound_hits.empty()) {
    std::cout << "bound_hits     ";
    for (const std::string& name : report.bound_hits) std::cout << " " << name;
    std::cout << "\n";
  }
}

struct FitArgs {
  std::string input, out, method = "huber", law = "reduced", grid;
  double delta = 1e-3;
  std::optional<int> threads;
};

int run_fit(const FitArgs& args) {
  const std::vector<RunRecord> runs = io::load_runlog(args.input);
  FitConfig config;
  config.method =
      args.method == "ls" || args.method == "least_squares"
          ? FitMethod::least_squares
          : FitMethod::huber;
  config.law_form = args.law == "full" ? LawForm::full : LawForm::reduced;
  config.huber_delta = args.delta;
  if (!args.grid.empty()) apply_grid_override(config.grid, args.grid);
  config.threads = resolve_threads(args.threads);
  config.exec = config.threads == 1 ? Exec::serial : Exec::parallel;

  const FitReport report = fit(runs, config);
  if (!args.out.empty()) io::save_report(report, config, args.out);
  print_fit_summary(report);
  return kExitOk;
}

struct PredictArgs {
  std::string params;
  std::optional<double> n;
  double d = 0.0, q = 0.0;
};

int run_predict(const PredictArgs& args) {
  const ScalingParams params = io::load_params(args.params);
  if (params.form == LawForm::reduced && args.n)
    throw DomainError("--N given but the parameters are reduced-form");
  if (params.form == LawForm::full && !args.n)
    throw DomainError("full-form parameters require --N");
  const double loss =
      params.form == LawForm::full
          ? evaluate_full(params, *args.n, args.d, args.q)
          : evaluate_reduced(params, args.d, args.q);
  std::cout << io::fmt_g6(loss) << "\n";
  return kExitOk;
}

struct ContourArgs {
  std::string params, out, q_grid = "0.5:1.0:0.05";
  double loss = 0.0;
  std::optional<double> n;
};

int run_contour(const ContourArgs& args) {
  const ScalingParams params = io::load_params(args.params);
  const Range range = parse_colon_range(args.q_grid, "--q-grid");
  const std::vector<double> qs = range.values();
  std::optional<double> fixed_n;
  if (args.n) fixed_n = *args.n;
  if (params.form == LawForm::full && !fixed_n)
    throw DomainError("full-form parameters require --N");

  const ContourSeries series =
      contour_series(params, args.loss, qs, fixed_n);
  std::string out = "# target_loss=" + io::fmt_sci(args.loss) + "\n";
  out += "q d status\n";
  for (const ContourPoint& pt : series.points)
    out += io::fmt_sci(pt.q) + " " + io::fmt_sci(pt.d) + " ok\n";
  if (!args.out.empty()) {
    std::ofstream f(args.out, std::ios::binary);
    if (!f) throw ParseError("cannot write " + args.out);
    f << out;
  } else {
    std::cout << out;
  }
  return kExitOk;
}

struct DeltaArgs {
  std::string input, params, out;
};

int run_delta(const DeltaArgs& args) {
  const std::vector<RunRecord> runs = io::load_runlog(args.input);
  const ScalingParams params = io::load_params(args.params);
  if (!(params.gamma > 0.0))
    throw DomainError("delta diagnostic needs a fitted gamma > 0");

  std::map<double, std::vector<RunRecord>> groups;
  for (const RunRecord& run : runs) groups[run.d_tokens].push_back(run);

  std::string out;
  bool any_degenerate = false;
  for (const auto& [d, group] : groups) {
    const DeltaDiagnostic diag = delta_diagnostic(group, params.gamma, params);
    out += "# d=" + io::fmt_sci(d) + " slope=" + io::fmt_sci(diag.slope) +
           " predicted_slope=" + io::fmt_sci(diag.predicted_slope) +
           " r_squared=" + io::fmt_sci(diag.r_squared) +
           " degenerate=" + (diag.degenerate ? "true" : "false") + "\n";
    out += "d q x y\n";
    for (std::size_t i = 0; i < diag.x.size(); ++i)
      out += io::fmt_sci(d) + " " + io::fmt_sci(group[i].quality.q) + " " +
             io::fmt_sci(diag.x[i]) + " " + io::fmt_sci(diag.y[i]) + "\n";
    any_degenerate |= diag.degenerate;
  }
  if (any_degenerate)
    std::cerr << "warning: at least one d group has only q = 1 runs; "
                 "its diagnostic is degenerate\n";
  if (!args.out.empty()) {
    std::ofstream f(args.out, std::ios::binary);
    if (!f) throw ParseError("cannot write " + args.out);
    f << out;
  } else {
    std::cout << out;
  }
  return kExitOk;
}

struct CorruptArgs {
  std::string input, vocab, channel, out, manifest;
  double noise_fraction = 0.0, token_fraction = 0.5;
  std::int64_t noise_seed = 0, working_seed = 0;
  std::optional<int> threads;
};

int run_corrupt(const CorruptArgs& args) {
  const VocabularySpec vocab = io::load_vocab(args.vocab);
  const std::vector<TokenSample> samples = io::load_tokens(args.input);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (const std::uint32_t tok : samples[i].tokens)
      if (tok >= vocab.vocab_size)
        throw DomainError(args.input + ": sample " +
                          std::to_string(samples[i].sample_id) + " (line " +
                          std::to_string(i + 1) + ") has token id " +
                          std::to_string(tok) + " >= vocab_size");
  }
  const NoiseChannel channel =
      args.channel == "pad" ? NoiseChannel::pad : NoiseChannel::swap;
  const int threads = resolve_threads(args.threads);
  const DatasetVariant variant = build_variant(
      samples, samples.size(), args.noise_fraction, channel, vocab,
      static_cast<std::uint64_t>(args.working_seed),
      static_cast<std::uint64_t>(args.noise_seed), args.token_fraction,
      threads == 1 ? CorruptExec::serial : CorruptExec::parallel, threads);
  io::save_tokens(variant.samples, args.out);
  if (!args.manifest.empty())
    io::save_manifest(variant.manifest, args.manifest);
  std::cout << "corrupted " << variant.samples.size() << " samples, q="
            << io::fmt_sci(variant.manifest.quality.q) << "\n";
  return kExitOk;
}

struct SampleArgs {
  std::string input, sizes, out_prefix;
  std::int64_t seed = 0;
};

int run_sample(const SampleArgs& args) {
  const std::vector<TokenSample> population = io::load_tokens(args.input);
  std::vector<std::uint64_t> sizes;
  for (const double v : parse_value_list(args.sizes, "--sizes")) {
    if (v < 0 || v != std::floor(v))
      throw ParseError("--sizes must be nonnegative integers");
    sizes.push_back(static_cast<std::uint64_t>(v));
  }
  for (const std::uint64_t k : sizes) {
    if (k > population.size())
      throw InsufficientDataError("subset size " + std::to_string(k) +
                                  " exceeds the population of " +
                                  std::to_string(population.size()));
  }
  for (const std::uint64_t k : sizes) {
    const std::vector<TokenSample> subset = nested_subset(
        population, k, static_cast<std::uint64_t>(args.seed));
    io::save_tokens(subset, args.out_prefix + std::to_string(k) + ".tokens");
  }
  std::cout << "wrote " << sizes.size() << " subsets\n";
  return kExitOk;
}

struct SimulateArgs {
  std::string truth, out, d_values, q_values, n_values;
  int replicates = 3;
  double log_noise = 0.0;
  std::int64_t seed = 0;
};

int run_simulate(const SimulateArgs& args) {
  SyntheticStudySpec spec;
  spec.truth = io::load_params(args.truth);
  spec.d_values = parse_value_list(args.d_values, "--d-values");
  spec.q_values = parse_value_list(args.q_values, "--q-values");
  if (!args.n_values.empty())
    spec.n_values = parse_value_list(args.n_values, "--n-values");
  spec.replicates = args.replicates;
  spec.log_noise_sigma = args.log_noise;
  spec.seed = static_cast<std::uint64_t>(args.seed);
  const std::vector<RunRecord> runs = generate_runs(spec);
  io::save_runlog(runs, args.out);
  std::cout << "wrote " << runs.size() << " runs\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quality-aware scaling law toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand(
      "fit", "fit scaling-law parameters to a run log");
  fit_cmd->add_option("--input", fit_args.input, "run log file")->required();
  fit_cmd->add_option("--method", fit_args.method, "huber|ls")
      ->check(CLI::IsMember({"huber", "ls", "least_squares"}));
  fit_cmd->add_option("--law", fit_args.law, "reduced|full")
      ->check(CLI::IsMember({"reduced", "full"}));
  fit_cmd->add_option("--delta", fit_args.delta, "huber threshold");
  fit_cmd->add_option("--grid", fit_args.grid,
                      "grid override, name=lo:hi:step[,...]");
  fit_cmd->add_option("--out", fit_args.out, "report file to write");
  fit_cmd->add_option("--threads", fit_args.threads,
                      "thread count (0 = all cores)");

  PredictArgs predict_args;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "evaluate a fitted law");
  predict_cmd->add_option("--params", predict_args.params, "report/params file")
      ->required();
  predict_cmd->add_option("--N", predict_args.n, "model parameters");
  predict_cmd->add_option("--D", predict_args.d, "training tokens")->required();
  predict_cmd->add_option("--Q", predict_args.q, "data quality")->required();

  ContourArgs contour_args;
  CLI::App* contour_cmd =
      app.add_subcommand("contour", "emit an iso-loss (q, d) table");
  contour_cmd->add_option("--params", contour_args.params, "report/params file")
      ->required();
  contour_cmd->add_option("--loss", contour_args.loss, "target loss")
      ->required();
  contour_cmd->add_option("--q-grid", contour_args.q_grid, "lo:hi:step");
  contour_cmd->add_option("--N", contour_args.n, "model size (full form)");
  contour_cmd->add_option("--out", contour_args.out, "table file to write");

  DeltaArgs delta_args;
  CLI::App* delta_cmd = app.add_subcommand(
      "delta", "delta-loss linearity diagnostic per d group");
  delta_cmd->add_option("--input", delta_args.input, "run log file")
      ->required();
  delta_cmd->add_option("--params", delta_args.params, "report/params file")
      ->required();
  delta_cmd->add_option("--out", delta_args.out, "table file to write");

  CorruptArgs corrupt_args;
  CLI::App* corrupt_cmd =
      app.add_subcommand("corrupt", "apply a token corruption channel");
  corrupt_cmd->add_option("--input", corrupt_args.input, "token file")
      ->required();
  corrupt_cmd->add_option("--vocab", corrupt_args.vocab, "vocabulary spec")
      ->required();
  corrupt_cmd->add_option("--channel", corrupt_args.channel, "pad|swap")
      ->required()
      ->check(CLI::IsMember({"pad", "swap"}));
  corrupt_cmd
      ->add_option("--noise-fraction", corrupt_args.noise_fraction,
                   "fraction of samples to corrupt, in [0,1)")
      ->required();
  corrupt_cmd->add_option("--token-fraction", corrupt_args.token_fraction,
                          "fraction of non-special tokens per sample");
  corrupt_cmd->add_option("--noise-seed", corrupt_args.noise_seed, "seed")
      ->required();
  corrupt_cmd->add_option("--working-seed", corrupt_args.working_seed,
                          "sampling seed recorded in the manifest");
  corrupt_cmd->add_option("--out", corrupt_args.out, "output token file")
      ->required();
  corrupt_cmd->add_option("--manifest", corrupt_args.manifest,
                          "manifest file to write");
  corrupt_cmd->add_option("--threads", corrupt_args.threads,
                          "thread count (0 = all cores)");

  SampleArgs sample_args;
  CLI::App* sample_cmd =
      app.add_subcommand("sample", "write nested subsets of a token file");
  sample_cmd->add_option("--input", sample_args.input, "token file")
      ->required();
  sample_cmd->add_option("--sizes", sample_args.sizes, "k1,k2,...")
      ->required();
  sample_cmd->add_option("--seed", sample_args.seed, "sampling seed")
      ->required();
  sample_cmd->add_option("--out-prefix", sample_args.out_prefix,
                         "output path prefix")
      ->required();

  SimulateArgs simulate_args;
  CLI::App* simulate_cmd = app.add_subcommand(
      "simulate", "generate a law-governed synthetic run log");
  simulate_cmd->add_option("--truth", simulate_args.truth, "params file")
      ->required();
  simulate_cmd->add_option("--d-values", simulate_args.d_values, "d1,d2,...")
      ->required();
  simulate_cmd->add_option("--q-values", simulate_args.q_values, "q1,q2,...")
      ->required();
  simulate_cmd->add_option("--n-values", simulate_args.n_values,
                           "n1,n2,... (full form)");
  simulate_cmd->add_option("--replicates", simulate_args.replicates,
                           "replicates per cell");
  simulate_cmd->add_option("--log-noise", simulate_args.log_noise,
                           "log-normal noise sigma");
  simulate_cmd->add_option("--seed", simulate_args.seed, "generator seed");
  simulate_cmd->add_option("--out", simulate_args.out, "run log to write")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (fit_cmd->parsed()) return run_fit(fit_args);
    if (predict_cmd->parsed()) return run_predict(predict_args);
    if (contour_cmd->parsed()) return run_contour(contour_args);
    if (delta_cmd->parsed()) return run_delta(delta_args);
    if (corrupt_cmd->parsed()) return run_corrupt(corrupt_args);
    if (sample_cmd->parsed()) return run_sample(sample_args);
    if (simulate_cmd->parsed()) return run_simulate(simulate_args);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const InsufficientDataError& e) {
    std::cerr << "error: insufficient runs: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const MissingBaselineError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NoSolutionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
