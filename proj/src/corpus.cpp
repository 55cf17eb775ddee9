// SPDX-License-Identifier: Apache-2.0

#include "qscale/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "qscale/errors.hpp"
#include "qscale/rng.hpp"

namespace qscale {

namespace {

// Domain separation between the mask PRF and the channel streams.
constexpr std::uint64_t kChannelTag = 0x5EEDC0DE0F15EA5Eull;

std::uint64_t round_half_up(double x) {
  return static_cast<std::uint64_t>(std::floor(x + 0.5));
}

// Positions of non-special tokens, in sequence order.
std::vector<std::uint32_t> non_special_positions(const TokenSample& sample,
                                                 const VocabularySpec& vocab) {
  std::vector<std::uint32_t> pos;
  pos.reserve(sample.tokens.size());
  for (std::uint32_t i = 0; i < sample.tokens.size(); ++i) {
    if (sample.tokens[i] >= vocab.vocab_size)
      throw DomainError("token id out of vocabulary range");
    if (!vocab.is_special(sample.tokens[i])) pos.push_back(i);
  }
  return pos;
}

// Fisher-Yates with the sample's own stream; the first `count` entries are
// the corrupted positions.
std::vector<std::uint32_t> pick_positions(std::vector<std::uint32_t> pos,
                                          std::uint64_t count,
                                          rng::SplitMix64& stream) {
  for (std::size_t i = pos.size(); i > 1; --i) {
    const std::uint64_t j = stream.next_below(i);
    std::swap(pos[i - 1], pos[j]);
  }
  pos.resize(count);
  return pos;
}

void check_fraction(double f, const char* what) {
  if (!(std::isfinite(f) && f >= 0.0 && f < 1.0))
    throw DomainError(std::string(what) + " must lie in [0, 1)");
}

void check_token_fraction(double f) {
  if (!(std::isfinite(f) && f >= 0.0 && f <= 1.0))
    throw DomainError("token fraction must lie in [0, 1]");
}

}  // namespace

void VocabularySpec::validate() {
  if (vocab_size == 0) throw DomainError("vocab_size must be positive");
  std::sort(special_ids.begin(), special_ids.end());
  special_ids.erase(std::unique(special_ids.begin(), special_ids.end()),
                    special_ids.end());
  for (const std::uint32_t id : special_ids)
    if (id >= vocab_size)
      throw DomainError("special id exceeds the vocabulary");
  if (!std::binary_search(special_ids.begin(), special_ids.end(), pad_id))
    throw DomainError("pad_id must be one of the special ids");
  if (special_ids.size() >= vocab_size)
    throw DomainError("vocabulary has no non-special token");
}

bool VocabularySpec::is_special(std::uint32_t id) const {
  return std::binary_search(special_ids.begin(), special_ids.end(), id);
}

std::uint64_t VocabularySpec::non_special_count() const {
  return static_cast<std::uint64_t>(vocab_size) - special_ids.size();
}

std::uint32_t VocabularySpec::non_special_at(std::uint64_t index) const {
  // Skip past every special id at or below the running answer.
  std::uint64_t id = index;
  for (const std::uint32_t s : special_ids) {
    if (s <= id) ++id;
  }
  return static_cast<std::uint32_t>(id);
}

double priority(std::uint64_t seed, std::uint64_t sample_id) {
  return rng::to_unit(rng::key2(seed, sample_id));
}

std::vector<TokenSample> nested_subset(std::span<const TokenSample> population,
                                       std::uint64_t k, std::uint64_t seed) {
  if (k > population.size())
    throw DomainError("subset size exceeds the population");
  std::vector<std::uint32_t> order(population.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](std::uint32_t lhs, std::uint32_t rhs) {
              const double pl = priority(seed, population[lhs].sample_id);
              const double pr = priority(seed, population[rhs].sample_id);
              if (pl != pr) return pl < pr;
              return population[lhs].sample_id < population[rhs].sample_id;
            });
  std::vector<TokenSample> out;
  out.reserve(k);
  for (std::uint64_t i = 0; i < k; ++i) out.push_back(population[order[i]]);
  return out;
}

std::vector<std::uint64_t> noise_mask(std::span<const TokenSample> samples,
                                      double noise_fraction,
                                      std::uint64_t noise_seed) {
  check_fraction(noise_fraction, "noise fraction");
  std::vector<std::uint64_t> marked;
  for (const TokenSample& s : samples)
    if (priority(noise_seed, s.sample_id) < noise_fraction)
      marked.push_back(s.sample_id);
  std::sort(marked.begin(), marked.end());
  return marked;
}

std::uint64_t channel_seed(std::uint64_t noise_seed, std::uint64_t sample_id) {
  return rng::key2(noise_seed ^ kChannelTag, sample_id);
}

TokenSample corrupt_pad(const TokenSample& sample, const VocabularySpec& vocab,
                        double token_fraction, std::uint64_t seed) {
  check_token_fraction(token_fraction);
  std::vector<std::uint32_t> pos = non_special_positions(sample, vocab);
  const std::uint64_t count =
      round_half_up(token_fraction * static_cast<double>(pos.size()));
  TokenSample out = sample;
  if (count == 0) return out;
  rng::SplitMix64 stream(seed);
  for (const std::uint32_t p : pick_positions(std::move(pos), count, stream))
    out.tokens[p] = vocab.pad_id;
  return out;
}

TokenSample corrupt_swap(const TokenSample& sample, const VocabularySpec& vocab,
                         double token_fraction, std::uint64_t seed) {
  check_token_fraction(token_fraction);
  std::vector<std::uint32_t> pos = non_special_positions(sample, vocab);
  const std::uint64_t count =
      round_half_up(token_fraction * static_cast<double>(pos.size()));
  TokenSample out = sample;
  if (count == 0) return out;
  rng::SplitMix64 stream(seed);
  const std::uint64_t n_choices = vocab.non_special_count();
  for (const std::uint32_t p : pick_positions(std::move(pos), count, stream))
    out.tokens[p] = vocab.non_special_at(stream.next_below(n_choices));
  return out;
}

std::string sample_ids_digest(std::span<const TokenSample> samples) {
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const TokenSample& s : samples) {
    std::uint64_t id = s.sample_id;
    for (int byte = 0; byte < 8; ++byte) {
      h ^= id & 0xFFu;
      h *= 0x100000001B3ull;
      id >>= 8;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

DatasetVariant build_variant(std::span<const TokenSample> population,
                             std::uint64_t subset_size, double noise_fraction,
                             NoiseChannel channel, const VocabularySpec& vocab,
                             std::uint64_t working_seed,
                             std::uint64_t noise_seed, double token_fraction,
                             CorruptExec exec, int threads) {
  check_fraction(noise_fraction, "noise fraction");
  DatasetVariant variant;
  variant.samples = nested_subset(population, subset_size, working_seed);

  const auto corrupt_one = [&](TokenSample& s) {
    if (priority(noise_seed, s.sample_id) >= noise_fraction) return;
    const std::uint64_t seed = channel_seed(noise_seed, s.sample_id);
    s = channel == NoiseChannel::pad
            ? corrupt_pad(s, vocab, token_fraction, seed)
            : corrupt_swap(s, vocab, token_fraction, seed);
  };

  const std::int64_t n = static_cast<std::int64_t>(variant.samples.size());
  if (exec == CorruptExec::parallel) {
#ifdef _OPENMP
    const int n_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(static) num_threads(n_threads)
    for (std::int64_t i = 0; i < n; ++i) corrupt_one(variant.samples[i]);
#else
    for (std::int64_t i = 0; i < n; ++i) corrupt_one(variant.samples[i]);
#endif
  } else {
    for (std::int64_t i = 0; i < n; ++i) corrupt_one(variant.samples[i]);
  }

  DatasetManifest& m = variant.manifest;
  m.working_seed = working_seed;
  m.subset_size = subset_size;
  m.noise_fraction = noise_fraction;
  m.noise_seed = noise_seed;
  m.quality = quality_from_corruption_rate(noise_fraction);
  m.token_count = 0;
  for (const TokenSample& s : variant.samples) m.token_count += s.tokens.size();
  m.sample_ids_digest = sample_ids_digest(variant.samples);
  return variant;
}

}  // namespace qscale
