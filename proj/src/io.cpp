// SPDX-License-Identifier: Apache-2.0

#include "qscale/io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qscale/errors.hpp"

namespace qscale::io {

namespace {

using nlohmann::ordered_json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write " + path.string());
  out << text;
  if (!out) throw ParseError("write failed for " + path.string());
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> fields;
  if (delim == ' ') {
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) fields.push_back(line.substr(start, i - start));
    }
  } else {
    std::size_t start = 0;
    while (true) {
      const std::size_t end = line.find(delim, start);
      fields.push_back(line.substr(start, end - start));
      if (end == std::string_view::npos) break;
      start = end + 1;
    }
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

Task parse_task(std::string_view text) {
  const std::string t = lower(trim(text));
  if (t == "nmt") return Task::nmt;
  if (t == "clm") return Task::clm;
  return Task::other;
}

const char* task_name(Task task) {
  switch (task) {
    case Task::nmt: return "NMT";
    case Task::clm: return "CLM";
    default: return "other";
  }
}

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::corruption_rate: return "corruption_rate";
    case Provenance::deficiency: return "deficiency";
    default: return "assigned";
  }
}

Provenance parse_provenance(const std::string& s) {
  if (s == "corruption_rate") return Provenance::corruption_rate;
  if (s == "deficiency") return Provenance::deficiency;
  if (s == "assigned") return Provenance::assigned;
  throw ParseError("unknown quality provenance: " + s);
}

const char* method_name(FitMethod m) {
  return m == FitMethod::huber ? "huber" : "least_squares";
}

FitMethod parse_method(const std::string& s) {
  if (s == "huber") return FitMethod::huber;
  if (s == "least_squares") return FitMethod::least_squares;
  throw ParseError("unknown fit method: " + s);
}

const char* form_name(LawForm f) {
  return f == LawForm::full ? "full" : "reduced";
}

LawForm parse_form(const std::string& s) {
  if (s == "full") return LawForm::full;
  if (s == "reduced") return LawForm::reduced;
  throw ParseError("unknown law form: " + s);
}

ordered_json params_to_json(const ScalingParams& params) {
  ordered_json j;
  j["form"] = form_name(params.form);
  if (params.form == LawForm::full) {
    j["A"] = *params.a;
    j["alpha"] = *params.alpha;
  }
  j["B"] = params.b;
  j["beta"] = params.beta;
  j["gamma"] = params.gamma;
  j["E"] = params.e_floor;
  return j;
}

ScalingParams params_from_json(const ordered_json& j) {
  const LawForm form = parse_form(j.at("form").get<std::string>());
  if (form == LawForm::full) {
    return ScalingParams::full(j.at("A").get<double>(),
                               j.at("alpha").get<double>(),
                               j.at("B").get<double>(),
                               j.at("beta").get<double>(),
                               j.at("gamma").get<double>(),
                               j.at("E").get<double>());
  }
  return ScalingParams::reduced(j.at("B").get<double>(),
                                j.at("beta").get<double>(),
                                j.at("gamma").get<double>(),
                                j.at("E").get<double>());
}

ordered_json range_to_json(const Range& r) {
  return ordered_json{{"lo", r.lo}, {"hi", r.hi}, {"step", r.step}};
}

ordered_json parse_json(const std::string& text, const std::string& what) {
  ordered_json j = ordered_json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ParseError("malformed JSON in " + what);
  return j;
}

}  // namespace

std::string fmt_sci(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.8e", v);
  return buf;
}

std::string fmt_g6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

double parse_double(std::string_view text, const std::string& context) {
  text = trim(text);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("bad number '" + std::string(text) + "' in " + context);
  return value;
}

std::int64_t parse_int(std::string_view text, const std::string& context) {
  text = trim(text);
  std::int64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ParseError("bad integer '" + std::string(text) + "' in " + context);
  return value;
}

std::vector<RunRecord> load_runlog(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) return {};  // empty file: no runs

  const char delim = line.find(',') != std::string::npos   ? ','
                     : line.find('\t') != std::string::npos ? '\t'
                                                            : ' ';
  std::vector<std::string_view> header = split_fields(line, delim);
  int col_task = -1, col_n = -1, col_d = -1, col_q = -1, col_loss = -1,
      col_rep = -1, col_seed = -1;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    const std::string name = lower(trim(header[i]));
    if (name == "task") col_task = i;
    else if (name == "n_params") col_n = i;
    else if (name == "d_tokens") col_d = i;
    else if (name == "quality") col_q = i;
    else if (name == "loss") col_loss = i;
    else if (name == "replicate") col_rep = i;
    else if (name == "seed") col_seed = i;
    else if (!name.empty())
      std::cerr << "warning: " << path.string() << ": ignoring unknown column '"
                << name << "'\n";
  }
  if (col_task < 0 || col_n < 0 || col_d < 0 || col_q < 0 || col_loss < 0)
    throw ParseError(path.string() +
                     ": header must name task, n_params, d_tokens, quality, loss");

  std::vector<RunRecord> runs;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const std::vector<std::string_view> fields = split_fields(line, delim);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto field = [&](int col) -> std::string_view {
      if (col >= static_cast<int>(fields.size()))
        throw ParseError(where + ": missing column");
      return fields[col];
    };
    RunRecord run;
    run.task = parse_task(field(col_task));
    run.n_params = parse_double(field(col_n), where);
    run.d_tokens = parse_double(field(col_d), where);
    run.quality = {parse_double(field(col_q), where), Provenance::assigned};
    run.loss = parse_double(field(col_loss), where);
    if (col_rep >= 0 && col_rep < static_cast<int>(fields.size()) &&
        !trim(fields[col_rep]).empty())
      run.replicate = static_cast<int>(parse_int(fields[col_rep], where));
    if (col_seed >= 0 && col_seed < static_cast<int>(fields.size()) &&
        !trim(fields[col_seed]).empty())
      run.seed = parse_int(fields[col_seed], where);
    try {
      run.validate();
    } catch (const DomainError& err) {
      throw ParseError(where + ": " + err.what());
    }
    runs.push_back(run);
  }
  return runs;
}

void save_runlog(std::span<const RunRecord> runs,
                 const std::filesystem::path& path) {
  std::string out = "task,n_params,d_tokens,quality,loss,replicate,seed\n";
  char buf[64];
  for (const RunRecord& run : runs) {
    out += task_name(run.task);
    std::snprintf(buf, sizeof buf, ",%.0f,%.0f,", run.n_params, run.d_tokens);
    out += buf;
    out += fmt_sci(run.quality.q);
    out += ',';
    out += fmt_sci(run.loss);
    out += ',';
    if (run.replicate) out += std::to_string(*run.replicate);
    out += ',';
    if (run.seed) out += std::to_string(*run.seed);
    out += '\n';
  }
  write_file(path, out);
}

std::vector<TokenSample> load_tokens(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::istringstream in(text);
  std::string line;
  std::vector<TokenSample> samples;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view trimmed = trim(line);
    if (trimmed.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const std::vector<std::string_view> fields = split_fields(trimmed, ' ');
    TokenSample sample;
    const std::int64_t id = parse_int(fields[0], where);
    if (id < 0) throw ParseError(where + ": sample id must be >= 0");
    sample.sample_id = static_cast<std::uint64_t>(id);
    sample.tokens.reserve(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const std::int64_t tok = parse_int(fields[i], where);
      if (tok < 0) throw ParseError(where + ": token id must be >= 0");
      sample.tokens.push_back(static_cast<std::uint32_t>(tok));
    }
    samples.push_back(std::move(sample));
  }
  return samples;
}

void save_tokens(std::span<const TokenSample> samples,
                 const std::filesystem::path& path) {
  std::string out;
  for (const TokenSample& s : samples) {
    out += std::to_string(s.sample_id);
    for (const std::uint32_t tok : s.tokens) {
      out += ' ';
      out += std::to_string(tok);
    }
    out += '\n';
  }
  write_file(path, out);
}

VocabularySpec load_vocab(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path), path.string());
  VocabularySpec vocab;
  try {
    vocab.vocab_size = j.at("vocab_size").get<std::uint32_t>();
    vocab.special_ids = j.at("special_ids").get<std::vector<std::uint32_t>>();
    vocab.pad_id = j.at("pad_id").get<std::uint32_t>();
  } catch (const ordered_json::exception& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  try {
    vocab.validate();
  } catch (const DomainError& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  return vocab;
}

void save_vocab(const VocabularySpec& vocab,
                const std::filesystem::path& path) {
  ordered_json j;
  j["vocab_size"] = vocab.vocab_size;
  j["special_ids"] = vocab.special_ids;
  j["pad_id"] = vocab.pad_id;
  write_file(path, j.dump(2) + "\n");
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  ordered_json j;
  j["working_seed"] = manifest.working_seed;
  j["subset_size"] = manifest.subset_size;
  j["noise_fraction"] = manifest.noise_fraction;
  j["noise_seed"] = manifest.noise_seed;
  j["quality"] = {{"q", manifest.quality.q},
                  {"provenance", provenance_name(manifest.quality.provenance)}};
  j["token_count"] = manifest.token_count;
  j["sample_ids_digest"] = manifest.sample_ids_digest;
  write_file(path, j.dump(2) + "\n");
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path), path.string());
  DatasetManifest m;
  try {
    m.working_seed = j.at("working_seed").get<std::uint64_t>();
    m.subset_size = j.at("subset_size").get<std::uint64_t>();
    m.noise_fraction = j.at("noise_fraction").get<double>();
    m.noise_seed = j.at("noise_seed").get<std::uint64_t>();
    m.quality.q = j.at("quality").at("q").get<double>();
    m.quality.provenance =
        parse_provenance(j.at("quality").at("provenance").get<std::string>());
    m.token_count = j.at("token_count").get<std::uint64_t>();
    m.sample_ids_digest = j.at("sample_ids_digest").get<std::string>();
  } catch (const ordered_json::exception& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  return m;
}

nlohmann::ordered_json config_to_json(const FitConfig& config) {
  ordered_json j;
  j["method"] = method_name(config.method);
  j["law_form"] = form_name(config.law_form);
  j["huber_delta"] = config.huber_delta;
  ordered_json grid;
  grid["b"] = range_to_json(config.grid.b_range);
  grid["e"] = range_to_json(config.grid.e_range);
  grid["beta"] = range_to_json(config.grid.beta_range);
  grid["gamma"] = range_to_json(config.grid.gamma_range);
  if (config.grid.a_range) grid["a"] = range_to_json(*config.grid.a_range);
  if (config.grid.alpha_range)
    grid["alpha"] = range_to_json(*config.grid.alpha_range);
  j["grid"] = grid;
  ordered_json bounds;
  bounds["b"] = {config.b_bounds.lo, config.b_bounds.hi};
  bounds["e"] = {config.e_bounds.lo, config.e_bounds.hi};
  bounds["beta"] = {config.beta_bounds.lo, config.beta_bounds.hi};
  bounds["gamma"] = {config.gamma_bounds.lo, config.gamma_bounds.hi};
  if (config.law_form == LawForm::full) {
    bounds["a"] = {config.a_bounds.lo, config.a_bounds.hi};
    bounds["alpha"] = {config.alpha_bounds.lo, config.alpha_bounds.hi};
  }
  j["bounds"] = bounds;
  j["max_iterations"] = config.max_iterations;
  j["convergence_tol"] = config.convergence_tol;
  j["threads"] = config.threads;
  return j;
}

void save_report(const FitReport& report, const FitConfig& config,
                 const std::filesystem::path& path) {
  ReportFile file;
  file.method = report.method;
  file.law_form = report.params.form;
  file.params = report.params;
  file.objective = report.objective_value;
  file.n_runs = report.n_runs;
  file.n_starts = report.n_starts;
  file.n_converged = report.n_converged;
  file.best_start_index = report.best_start_index;
  file.best_start = report.best_start;
  file.rms_log_residual = report.rms_log_residual;
  file.bound_hits = report.bound_hits;
  file.tool_version = kToolVersion;
  file.config_echo = config_to_json(config);
  save_report(file, path);
}

void save_report(const ReportFile& report, const std::filesystem::path& path) {
  ordered_json j;
  j["method"] = method_name(report.method);
  j["law_form"] = form_name(report.law_form);
  j["params"] = params_to_json(report.params);
  j["objective"] = report.objective;
  j["n_runs"] = report.n_runs;
  j["n_starts"] = report.n_starts;
  j["n_converged"] = report.n_converged;
  j["best_start"] = {{"index", report.best_start_index},
                     {"theta", report.best_start}};
  j["rms_log_residual"] = report.rms_log_residual;
  j["bound_hits"] = report.bound_hits;
  j["tool_version"] = report.tool_version;
  j["config_echo"] = report.config_echo;
  write_file(path, j.dump(2) + "\n");
}

ReportFile load_report(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path), path.string());
  ReportFile file;
  try {
    file.method = parse_method(j.at("method").get<std::string>());
    file.law_form = parse_form(j.at("law_form").get<std::string>());
    file.params = params_from_json(j.at("params"));
    file.objective = j.at("objective").get<double>();
    file.n_runs = j.at("n_runs").get<int>();
    file.n_starts = j.at("n_starts").get<int>();
    file.n_converged = j.at("n_converged").get<int>();
    file.best_start_index = j.at("best_start").at("index").get<int>();
    file.best_start = j.at("best_start").at("theta").get<std::vector<double>>();
    file.rms_log_residual = j.at("rms_log_residual").get<double>();
    file.bound_hits = j.at("bound_hits").get<std::vector<std::string>>();
    file.tool_version = j.at("tool_version").get<std::string>();
    file.config_echo = j.at("config_echo");
  } catch (const ordered_json::exception& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
  if (file.law_form != file.params.form)
    throw ParseError(path.string() + ": law_form disagrees with params.form");
  return file;
}

ScalingParams load_params(const std::filesystem::path& path) {
  const ordered_json j = parse_json(read_file(path), path.string());
  try {
    if (j.contains("params")) return params_from_json(j.at("params"));
    return params_from_json(j);
  } catch (const ordered_json::exception& err) {
    throw ParseError(path.string() + ": " + err.what());
  }
}

void save_params(const ScalingParams& params,
                 const std::filesystem::path& path) {
  write_file(path, params_to_json(params).dump(2) + "\n");
}

std::string file_digest(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace qscale::io
