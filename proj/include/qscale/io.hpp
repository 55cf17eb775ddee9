// SPDX-License-Identifier: Apache-2.0
//
// File formats: delimited run logs, line-delimited token datasets, JSON
// vocabulary specs, fit reports, and dataset manifests. All numeric parsing
// and formatting is locale-independent.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "qscale/corpus.hpp"
#include "qscale/fit.hpp"
#include "qscale/law.hpp"

namespace qscale::io {

inline constexpr const char* kToolVersion = "0.1.0";

// Fixed scientific formatting with 9 significant digits.
std::string fmt_sci(double v);
// 6 significant digits (prediction output).
std::string fmt_g6(double v);

double parse_double(std::string_view text, const std::string& context);
std::int64_t parse_int(std::string_view text, const std::string& context);

// --- run logs -------------------------------------------------------------
// Delimited text with a header row naming the columns task, n_params,
// d_tokens, quality, loss and optionally replicate, seed. Comma, tab, or
// space delimited. Unknown columns are ignored with a warning on stderr.
std::vector<RunRecord> load_runlog(const std::filesystem::path& path);
void save_runlog(std::span<const RunRecord> runs,
                 const std::filesystem::path& path);

// --- token datasets --------------------------------------------------------
// One sample per line: sample_id followed by space-separated token ids.
std::vector<TokenSample> load_tokens(const std::filesystem::path& path);
void save_tokens(std::span<const TokenSample> samples,
                 const std::filesystem::path& path);

// --- vocabulary ------------------------------------------------------------
VocabularySpec load_vocab(const std::filesystem::path& path);
void save_vocab(const VocabularySpec& vocab,
                const std::filesystem::path& path);

// --- manifests -------------------------------------------------------------
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

// --- fit reports -----------------------------------------------------------
struct ReportFile {
  FitMethod method = FitMethod::huber;
  LawForm law_form = LawForm::reduced;
  ScalingParams params;
  double objective = 0.0;
  int n_runs = 0;
  int n_starts = 0;
  int n_converged = 0;
  int best_start_index = -1;
  std::vector<double> best_start;
  double rms_log_residual = 0.0;
  std::vector<std::string> bound_hits;
  std::string tool_version;
  nlohmann::ordered_json config_echo;

  bool operator==(const ReportFile&) const = default;
};

nlohmann::ordered_json config_to_json(const FitConfig& config);

void save_report(const FitReport& report, const FitConfig& config,
                 const std::filesystem::path& path);
void save_report(const ReportFile& report, const std::filesystem::path& path);
ReportFile load_report(const std::filesystem::path& path);

// Parameters alone (accepts either a bare params object or a full report).
ScalingParams load_params(const std::filesystem::path& path);
void save_params(const ScalingParams& params,
                 const std::filesystem::path& path);

// fnv1a-64 of a file's bytes, as 16 hex digits (fixture pinning).
std::string file_digest(const std::filesystem::path& path);

}  // namespace qscale::io
