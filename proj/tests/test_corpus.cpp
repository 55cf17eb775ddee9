// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include <doctest.h>

#include "helpers.hpp"
#include "qscale/corpus.hpp"
#include "qscale/errors.hpp"
#include "qscale/rng.hpp"

using namespace qscale;

namespace {

VocabularySpec small_vocab() {
  VocabularySpec vocab;
  vocab.vocab_size = 64;
  vocab.special_ids = {0, 1, 2};
  vocab.pad_id = 2;
  vocab.validate();
  return vocab;
}

std::vector<TokenSample> random_population(std::size_t count,
                                           std::size_t max_len,
                                           const VocabularySpec& vocab,
                                           std::uint64_t seed) {
  std::vector<TokenSample> population(count);
  rng::SplitMix64 stream(seed);
  for (std::size_t i = 0; i < count; ++i) {
    population[i].sample_id = i;
    population[i].tokens.resize(1 + stream.next_below(max_len));
    for (std::uint32_t& tok : population[i].tokens)
      tok = static_cast<std::uint32_t>(stream.next_below(vocab.vocab_size));
  }
  return population;
}

std::set<std::uint64_t> id_set(std::span<const TokenSample> samples) {
  std::set<std::uint64_t> ids;
  for (const TokenSample& s : samples) ids.insert(s.sample_id);
  return ids;
}

}  // namespace

TEST_CASE("vocabulary spec validation and non-special indexing") {
  VocabularySpec vocab = small_vocab();
  CHECK(vocab.non_special_count() == 61);
  CHECK(vocab.is_special(2));
  CHECK_FALSE(vocab.is_special(3));
  CHECK(vocab.non_special_at(0) == 3);  // 0,1,2 are special
  CHECK(vocab.non_special_at(60) == 63);

  VocabularySpec bad = vocab;
  bad.pad_id = 5;  // not special
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = vocab;
  bad.special_ids = {0, 1, 99};
  CHECK_THROWS_AS(bad.validate(), DomainError);
  VocabularySpec all_special;
  all_special.vocab_size = 2;
  all_special.special_ids = {0, 1};
  all_special.pad_id = 0;
  CHECK_THROWS_AS(all_special.validate(), DomainError);
}

TEST_CASE("priority: determinism, uniformity, and seed independence") {
  CHECK(priority(42, 7) == priority(42, 7));
  CHECK(priority(42, 7) != priority(43, 7));

  const std::size_t n = 1000000;
  double sum1 = 0.0, sum2 = 0.0;
  std::vector<double> p1(n), p2(n);
  for (std::size_t i = 0; i < n; ++i) {
    p1[i] = priority(1, i);
    p2[i] = priority(2, i);
    CHECK(p1[i] >= 0.0);
    CHECK(p1[i] < 1.0);
    sum1 += p1[i];
    sum2 += p2[i];
  }
  const double mean1 = sum1 / n;
  const double mean2 = sum2 / n;
  CHECK(std::fabs(mean1 - 0.5) < 0.01);
  CHECK(std::fabs(mean2 - 0.5) < 0.01);

  // Sample Pearson correlation between two seeds' priority streams.
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = p1[i] - mean1;
    const double b = p2[i] - mean2;
    sxy += a * b;
    sxx += a * a;
    syy += b * b;
  }
  CHECK(std::fabs(sxy / std::sqrt(sxx * syy)) < 0.01);
}

TEST_CASE("nested subsets") {
  const VocabularySpec vocab = small_vocab();
  const std::vector<TokenSample> population =
      random_population(1000, 16, vocab, 31);

  const std::vector<TokenSample> all =
      nested_subset(population, population.size(), 5);
  CHECK(all.size() == population.size());
  CHECK(id_set(all) == id_set(population));

  CHECK(nested_subset(population, 0, 5).empty());
  CHECK_THROWS_AS(nested_subset(population, 1001, 5), DomainError);

  const std::vector<TokenSample> s10 = nested_subset(population, 10, 5);
  const std::vector<TokenSample> s100 = nested_subset(population, 100, 5);
  const std::set<std::uint64_t> ids10 = id_set(s10);
  const std::set<std::uint64_t> ids100 = id_set(s100);
  CHECK(std::includes(ids100.begin(), ids100.end(), ids10.begin(),
                      ids10.end()));
  // Smaller subsets are prefixes of larger ones (priority order).
  for (std::size_t i = 0; i < s10.size(); ++i)
    CHECK(s10[i] == s100[i]);

  // Totally nested chain.
  std::set<std::uint64_t> prev;
  for (const std::uint64_t k : {25u, 50u, 200u, 800u}) {
    const std::set<std::uint64_t> ids = id_set(nested_subset(population, k, 9));
    CHECK(ids.size() == k);
    CHECK(std::includes(ids.begin(), ids.end(), prev.begin(), prev.end()));
    prev = ids;
  }
}

TEST_CASE("noise masks: nesting and binomial count") {
  const VocabularySpec vocab = small_vocab();
  const std::vector<TokenSample> population =
      random_population(100000, 4, vocab, 17);

  CHECK(noise_mask(population, 0.0, 3).empty());

  const std::vector<std::uint64_t> m10 = noise_mask(population, 0.10, 3);
  const std::vector<std::uint64_t> m25 = noise_mask(population, 0.25, 3);
  const std::vector<std::uint64_t> m40 = noise_mask(population, 0.40, 3);
  CHECK(std::includes(m25.begin(), m25.end(), m10.begin(), m10.end()));
  CHECK(std::includes(m40.begin(), m40.end(), m25.begin(), m25.end()));

  // Binomial(1e5, 0.25): mean 25000, sigma ~136.9; allow 3 sigma.
  CHECK(std::fabs(static_cast<double>(m25.size()) - 25000.0) < 411.0);

  CHECK_THROWS_AS(noise_mask(population, 1.0, 3), DomainError);
  CHECK_THROWS_AS(noise_mask(population, -0.1, 3), DomainError);
}

TEST_CASE("corrupt_pad: counts, preservation, determinism") {
  const VocabularySpec vocab = small_vocab();

  TokenSample all_special{1, {0, 1, 2, 0}};
  CHECK(corrupt_pad(all_special, vocab, 0.5, 99) == all_special);

  TokenSample plain{2, {7, 9, 11, 13}};
  const TokenSample padded = corrupt_pad(plain, vocab, 0.5, 99);
  CHECK(padded.tokens.size() == 4);
  CHECK(std::count(padded.tokens.begin(), padded.tokens.end(), vocab.pad_id) ==
        2);
  CHECK(corrupt_pad(plain, vocab, 0.5, 99) == padded);
  CHECK(corrupt_pad(plain, vocab, 0.0, 99) == plain);

  // Odd count rounds half up: 5 non-special tokens -> 3 pads.
  TokenSample odd{3, {7, 9, 11, 13, 15}};
  const TokenSample odd_padded = corrupt_pad(odd, vocab, 0.5, 99);
  CHECK(std::count(odd_padded.tokens.begin(), odd_padded.tokens.end(),
                   vocab.pad_id) == 3);

  // Special positions never move or change.
  rng::SplitMix64 stream(55);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSample s{static_cast<std::uint64_t>(trial), {}};
    s.tokens.resize(1 + stream.next_below(40));
    for (std::uint32_t& tok : s.tokens)
      tok = static_cast<std::uint32_t>(stream.next_below(vocab.vocab_size));
    const TokenSample out = corrupt_pad(s, vocab, 0.5, stream.next_u64());
    REQUIRE(out.tokens.size() == s.tokens.size());
    std::size_t m = 0;
    std::size_t changed = 0;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (vocab.is_special(s.tokens[i])) {
        CHECK(out.tokens[i] == s.tokens[i]);
      } else {
        ++m;
        if (out.tokens[i] != s.tokens[i]) CHECK(out.tokens[i] == vocab.pad_id);
        if (out.tokens[i] == vocab.pad_id) ++changed;
      }
    }
    CHECK(changed == static_cast<std::size_t>(std::floor(0.5 * m + 0.5)));
  }
}

TEST_CASE("corrupt_swap: range contract and uniformity") {
  const VocabularySpec vocab = small_vocab();

  TokenSample plain{2, {7, 9, 11, 13}};
  CHECK(corrupt_swap(plain, vocab, 0.0, 5) == plain);

  // Replaced positions always hold non-special ids; count is exact.
  rng::SplitMix64 stream(66);
  for (int trial = 0; trial < 200; ++trial) {
    TokenSample s{static_cast<std::uint64_t>(trial), {}};
    s.tokens.resize(1 + stream.next_below(40));
    for (std::uint32_t& tok : s.tokens)
      tok = static_cast<std::uint32_t>(stream.next_below(vocab.vocab_size));
    const TokenSample out = corrupt_swap(s, vocab, 0.5, stream.next_u64());
    REQUIRE(out.tokens.size() == s.tokens.size());
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (vocab.is_special(s.tokens[i]))
        CHECK(out.tokens[i] == s.tokens[i]);
      else
        CHECK_FALSE(vocab.is_special(out.tokens[i]));
    }
  }

  // Chi-square uniformity of the replacement distribution over the 61
  // non-special ids; critical value for dof 60 at the 0.01 level is 88.38.
  const std::size_t n_draws = 1000000;
  TokenSample big{1, std::vector<std::uint32_t>(n_draws, 7)};
  const TokenSample swapped = corrupt_swap(big, vocab, 1.0, 4242);
  std::vector<std::size_t> counts(vocab.vocab_size, 0);
  for (const std::uint32_t tok : swapped.tokens) ++counts[tok];
  const double expected =
      static_cast<double>(n_draws) / vocab.non_special_count();
  double chi2 = 0.0;
  for (std::uint32_t id = 0; id < vocab.vocab_size; ++id) {
    if (vocab.is_special(id)) {
      CHECK(counts[id] == 0);
      continue;
    }
    const double diff = counts[id] - expected;
    chi2 += diff * diff / expected;
  }
  CHECK(chi2 < 88.38);
}

TEST_CASE("build_variant: composition, monotonicity, manifest") {
  const VocabularySpec vocab = small_vocab();
  const std::vector<TokenSample> population =
      random_population(5000, 24, vocab, 151);

  // noise 0: byte-identical to the nested subset, q = 1.
  const DatasetVariant clean = build_variant(
      population, 2000, 0.0, NoiseChannel::swap, vocab, 11, 22);
  CHECK(clean.samples == nested_subset(population, 2000, 11));
  CHECK(clean.manifest.quality.q == 1.0);
  CHECK(clean.manifest.quality.provenance == Provenance::corruption_rate);

  // Manifest q for p = 0.25 is 0.75.
  const DatasetVariant noisy = build_variant(
      population, 2000, 0.25, NoiseChannel::swap, vocab, 11, 22);
  CHECK(noisy.manifest.quality.q == doctest::Approx(0.75));
  CHECK(noisy.manifest.noise_fraction == 0.25);
  CHECK(noisy.manifest.subset_size == 2000);
  CHECK(noisy.manifest.working_seed == 11);
  CHECK(noisy.manifest.noise_seed == 22);
  CHECK(noisy.manifest.sample_ids_digest ==
        clean.manifest.sample_ids_digest);  // same subset, same order
  std::uint64_t tokens = 0;
  for (const TokenSample& s : noisy.samples) tokens += s.tokens.size();
  CHECK(noisy.manifest.token_count == tokens);

  // Noise monotonicity: corrupted sets nest and shared samples are

  // byte-identical across fractions.
  const DatasetVariant v1 = build_variant(
      population, 2000, 0.1, NoiseChannel::pad, vocab, 11, 22);
  const DatasetVariant v2 = build_variant(
      population, 2000, 0.2, NoiseChannel::pad, vocab, 11, 22);
  std::set<std::uint64_t> corrupted1, corrupted2;
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const TokenSample& base = clean.samples[i];
    if (v1.samples[i] != base) corrupted1.insert(base.sample_id);
    if (v2.samples[i] != base) corrupted2.insert(base.sample_id);
    if (v1.samples[i] != base) CHECK(v1.samples[i] == v2.samples[i]);
  }
  CHECK(std::includes(corrupted2.begin(), corrupted2.end(), corrupted1.begin(),
                      corrupted1.end()));

  // Serial and parallel execution produce identical bytes; reruns too.
  const DatasetVariant serial = build_variant(
      population, 2000, 0.25, NoiseChannel::swap, vocab, 11, 22, 0.5,
      CorruptExec::serial);
  const DatasetVariant parallel = build_variant(
      population, 2000, 0.25, NoiseChannel::swap, vocab, 11, 22, 0.5,
      CorruptExec::parallel);
  CHECK(serial.samples == parallel.samples);
  CHECK(serial.samples == noisy.samples);
  CHECK(serial.manifest.sample_ids_digest ==
        parallel.manifest.sample_ids_digest);
}

TEST_CASE("sample monotonicity composes with noise across subset sizes") {
  const VocabularySpec vocab = small_vocab();
  const std::vector<TokenSample> population =
      random_population(3000, 12, vocab, 77);

  // A sample present in both subset sizes is corrupted identically.
  const DatasetVariant small = build_variant(
      population, 500, 0.3, NoiseChannel::swap, vocab, 4, 9);
  const DatasetVariant large = build_variant(
      population, 2500, 0.3, NoiseChannel::swap, vocab, 4, 9);
  for (std::size_t i = 0; i < small.samples.size(); ++i)
    CHECK(small.samples[i] == large.samples[i]);  // prefix property
}

TEST_CASE("token id above the vocabulary is rejected") {
  const VocabularySpec vocab = small_vocab();
  TokenSample bad{1, {7, 64}};
  CHECK_THROWS_AS(corrupt_pad(bad, vocab, 0.5, 1), DomainError);
  CHECK_THROWS_AS(corrupt_swap(bad, vocab, 0.5, 1), DomainError);
}
