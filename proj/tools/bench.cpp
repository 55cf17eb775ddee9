// SPDX-License-Identifier: Apache-2.0
//
// Benchmarks the two parallel kernels against their serial reference paths:
// grid-multistart fitting and per-sample corpus corruption. Verifies that
// both paths produce identical results before timing them.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qscale/corpus.hpp"
#include "qscale/fit.hpp"
#include "qscale/rng.hpp"
#include "qscale/synthetic.hpp"

namespace {

using namespace qscale;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<TokenSample> make_population(std::size_t count,
                                         std::size_t tokens_per_sample,
                                         const VocabularySpec& vocab,
                                         std::uint64_t seed) {
  std::vector<TokenSample> population(count);
  rng::SplitMix64 stream(seed);
  for (std::size_t i = 0; i < count; ++i) {
    population[i].sample_id = i;
    population[i].tokens.resize(tokens_per_sample);
    for (std::uint32_t& tok : population[i].tokens)
      tok = static_cast<std::uint32_t>(stream.next_below(vocab.vocab_size));
  }
  return population;
}

}  // namespace

int main(int argc, char** argv) {
  int repeats = 3;
  if (argc > 1) repeats = std::max(1, std::atoi(argv[1]));

#ifdef _OPENMP
  std::printf("threads available: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; both paths run serially\n");
#endif

  // --- multistart fit ---------------------------------------------------
  SyntheticStudySpec spec;
  spec.truth = ScalingParams::reduced(1400.0, 0.4, 0.4, 3.4);
  spec.d_values = {1e8, 1e9, 1e10};
  spec.q_values = {1.0, 0.9, 0.8, 0.75, 0.7, 0.6, 0.5};
  spec.replicates = 3;
  spec.log_noise_sigma = 0.005;
  spec.seed = 7;
  const std::vector<RunRecord> runs = generate_runs(spec);

  FitConfig serial_cfg;
  serial_cfg.exec = Exec::serial;
  FitConfig parallel_cfg;
  parallel_cfg.exec = Exec::parallel;

  const FitReport serial_fit = fit(runs, serial_cfg);
  const FitReport parallel_fit = fit(runs, parallel_cfg);
  const bool fit_match =
      serial_fit.params == parallel_fit.params &&
      serial_fit.objective_value == parallel_fit.objective_value &&
      serial_fit.best_start_index == parallel_fit.best_start_index;
  std::printf("fit results identical: %s\n", fit_match ? "yes" : "NO");

  double t_serial = 1e300;
  double t_parallel = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = Clock::now();
    (void)fit(runs, serial_cfg);
    t_serial = std::min(t_serial, seconds_since(t0));
    t0 = Clock::now();
    (void)fit(runs, parallel_cfg);
    t_parallel = std::min(t_parallel, seconds_since(t0));
  }
  std::printf("multistart fit (750 starts, %zu runs):\n", runs.size());
  std::printf("  serial   %8.3f s\n", t_serial);
  std::printf("  parallel %8.3f s   speedup %.2fx\n", t_parallel,
              t_serial / t_parallel);

  // --- corpus corruption --------------------------------------------------
  VocabularySpec vocab;
  vocab.vocab_size = 32000;
  vocab.special_ids = {0, 1, 2, 3};
  vocab.pad_id = 3;
  vocab.validate();
  const std::vector<TokenSample> population =
      make_population(50000, 256, vocab, 11);

  const DatasetVariant serial_variant =
      build_variant(population, population.size(), 0.5, NoiseChannel::swap,
                    vocab, 1, 2, 0.5, CorruptExec::serial);
  const DatasetVariant parallel_variant =
      build_variant(population, population.size(), 0.5, NoiseChannel::swap,
                    vocab, 1, 2, 0.5, CorruptExec::parallel);
  const bool corrupt_match =
      serial_variant.samples == parallel_variant.samples &&
      serial_variant.manifest.sample_ids_digest ==
          parallel_variant.manifest.sample_ids_digest;
  std::printf("corruption outputs identical: %s\n",
              corrupt_match ? "yes" : "NO");

  t_serial = 1e300;
  t_parallel = 1e300;
  for (int r = 0; r < repeats; ++r) {
    auto t0 = Clock::now();
    (void)build_variant(population, population.size(), 0.5, NoiseChannel::swap,
                        vocab, 1, 2, 0.5, CorruptExec::serial);
    t_serial = std::min(t_serial, seconds_since(t0));
    t0 = Clock::now();
    (void)build_variant(population, population.size(), 0.5, NoiseChannel::swap,
                        vocab, 1, 2, 0.5, CorruptExec::parallel);
    t_parallel = std::min(t_parallel, seconds_since(t0));
  }
  std::printf("swap corruption (%zu samples x 256 tokens):\n",
              population.size());
  std::printf("  serial   %8.3f s\n", t_serial);
  std::printf("  parallel %8.3f s   speedup %.2fx\n", t_parallel,
              t_serial / t_parallel);

  return fit_match && corrupt_match ? 0 : 1;
}
