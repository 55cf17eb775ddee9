// SPDX-License-Identifier: Apache-2.0
//
// Deterministic corpus simulation: nested subset sampling with sample and
// noise monotonicity, and the pad / swap token-corruption channels. Every
// random decision is keyed by (seed, sample_id) through a pure integer PRF,
// so outputs are byte-identical across runs, platforms, and thread counts.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qscale/law.hpp"

namespace qscale {

struct VocabularySpec {
  std::uint32_t vocab_size = 0;
  std::vector<std::uint32_t> special_ids;  // sorted unique after validate()
  std::uint32_t pad_id = 0;

  void validate();
  bool is_special(std::uint32_t id) const;
  std::uint64_t non_special_count() const;
  // The index-th non-special id in ascending order.
  std::uint32_t non_special_at(std::uint64_t index) const;
};

struct TokenSample {
  std::uint64_t sample_id = 0;
  std::vector<std::uint32_t> tokens;

  bool operator==(const TokenSample&) const = default;
};

struct DatasetManifest {
  std::uint64_t working_seed = 0;
  std::uint64_t subset_size = 0;
  double noise_fraction = 0.0;
  std::uint64_t noise_seed = 0;
  QualityScore quality;  // q = 1 - noise_fraction
  std::uint64_t token_count = 0;
  std::string sample_ids_digest;  // fnv1a-64 over the ordered ids, hex
};

enum class NoiseChannel { pad, swap };
enum class CorruptExec { serial, parallel };

// Deterministic uniform priority in [0, 1) for a (seed, sample) pair.
double priority(std::uint64_t seed, std::uint64_t sample_id);

// The k samples of smallest priority (ties by sample_id), in priority order.
// Nested: the result for k1 <= k2 is a prefix of the result for k2.
std::vector<TokenSample> nested_subset(std::span<const TokenSample> population,
                                       std::uint64_t k, std::uint64_t seed);

// Ids marked for corruption: priority(noise_seed, id) < noise_fraction.
// Masks are nested across increasing fractions. Returned sorted.
std::vector<std::uint64_t> noise_mask(std::span<const TokenSample> samples,
                                      double noise_fraction,
                                      std::uint64_t noise_seed);

// Set round-half-up(token_fraction * m) of the m non-special positions to
// pad_id; positions chosen by a seeded shuffle. Special positions and the
// sequence length never change.
TokenSample corrupt_pad(const TokenSample& sample, const VocabularySpec& vocab,
                        double token_fraction, std::uint64_t seed);

// Replace the same count of non-special positions with uniform draws from the
// non-special vocabulary (the original token is not excluded).
TokenSample corrupt_swap(const TokenSample& sample, const VocabularySpec& vocab,
                         double token_fraction, std::uint64_t seed);

// Per-sample channel seed; depends only on (noise_seed, sample_id) so a
// sample's corruption is identical in every variant it appears in.
std::uint64_t channel_seed(std::uint64_t noise_seed, std::uint64_t sample_id);

struct DatasetVariant {
  std::vector<TokenSample> samples;
  DatasetManifest manifest;
};

// nested_subset, then noise_mask, then per-sample corruption of masked
// samples. Parallel and serial execution produce identical bytes.
DatasetVariant build_variant(std::span<const TokenSample> population,
                             std::uint64_t subset_size, double noise_fraction,
                             NoiseChannel channel, const VocabularySpec& vocab,
                             std::uint64_t working_seed,
                             std::uint64_t noise_seed,
                             double token_fraction = 0.5,
                             CorruptExec exec = CorruptExec::parallel,
                             int threads = 0);

// fnv1a-64 digest over the ordered sample ids, as 16 hex digits.
std::string sample_ids_digest(std::span<const TokenSample> samples);

}  // namespace qscale
