// SPDX-License-Identifier: Apache-2.0
#pragma once

// Batch runner: dataset ingestion, run configuration, the per-case worker
// pool, scoring, and report emission.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucagents/backend.hpp"
#include "ucagents/backend_http.hpp"
#include "ucagents/case.hpp"
#include "ucagents/error.hpp"
#include "ucagents/metrics.hpp"
#include "ucagents/prompts.hpp"
#include "ucagents/protocol.hpp"
#include "ucagents/transcript.hpp"

namespace ucagents {

namespace fs = std::filesystem;

inline constexpr std::uintmax_t kDefaultMaxImageBytes = 8u << 20;

// ---------------------------------------------------------------------------
// Dataset

struct DatasetRecord {
  MedicalCase medical_case;
  std::string subset = "closed";  // "closed" or "open"
  std::optional<fs::path> image_path;
};

struct IngestOptions {
  std::uintmax_t max_image_bytes = kDefaultMaxImageBytes;
};

inline std::string media_type_for(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".jpg" || ext == ".jpeg") return "image/jpeg";
  if (ext == ".gif") return "image/gif";
  if (ext == ".webp") return "image/webp";
  if (ext == ".bmp") return "image/bmp";
  return "image/png";
}

inline std::vector<std::uint8_t> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + p.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline Image load_image(const fs::path& p, std::uintmax_t max_bytes = kDefaultMaxImageBytes) {
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot stat image " + p.string() + ": " + ec.message());
  if (size > max_bytes) {
    throw Error(ErrorCode::ImageTooLarge, p.string() + " is " + std::to_string(size) + " bytes, limit " +
                                              std::to_string(max_bytes));
  }
  return Image{read_bytes(p), media_type_for(p)};
}

namespace detail {

inline std::vector<Option> options_from_json(const Json& j) {
  if (!j.is_array()) throw Error(ErrorCode::InvalidCase, "options must be an array");
  std::vector<Option> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const Json& o = j[i];
    if (o.is_string()) {
      out.push_back(Option{static_cast<char>('A' + i), o.get<std::string>()});
    } else if (o.is_object()) {
      const auto letter = o.at("letter").get<std::string>();
      if (letter.size() != 1) throw Error(ErrorCode::InvalidCase, "option letter must be one character");
      out.push_back(Option{letter[0], o.at("text").get<std::string>()});
    } else {
      throw Error(ErrorCode::InvalidCase, "option entries must be strings or {letter, text} objects");
    }
  }
  return out;
}

inline std::optional<std::string> opt_string(const Json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

inline char letter_from_json(const Json& j, const char* what) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw Error(ErrorCode::InvalidCase, std::string(what) + " must be a single letter");
  return s[0];
}

}  // namespace detail

/// One JSON object per line:
///   {"case_id", "question", "options": [...], "gold": "B", "subset": "closed"|"open",
///    "image_path"?, "field_hint"?, "imaging_modalities"?, "imaging_type"?}
/// Relative image paths resolve against the dataset file's directory.
inline std::vector<DatasetRecord> ingest(const fs::path& path, const IngestOptions& opts = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read dataset " + path.string());
  const fs::path base = path.parent_path();
  std::vector<DatasetRecord> out;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::string where = path.filename().string() + ":" + std::to_string(lineno) + ": ";
    DatasetRecord rec;
    try {
      const Json j = Json::parse(line);
      if (!j.is_object()) throw Error(ErrorCode::InvalidCase, "record is not an object");
      MedicalCase& c = rec.medical_case;
      c.case_id = j.at("case_id").get<std::string>();
      c.question = j.at("question").get<std::string>();
      c.options = detail::options_from_json(j.at("options"));
      if (!j.contains("gold")) throw Error(ErrorCode::InvalidCase, "gold letter missing");
      c.gold_answer = detail::letter_from_json(j.at("gold"), "gold");
      c.field_hint = detail::opt_string(j, "field_hint");
      c.imaging_modalities = detail::opt_string(j, "imaging_modalities");
      c.imaging_type = detail::opt_string(j, "imaging_type");
      rec.subset = j.at("subset").get<std::string>();
      if (rec.subset != "closed" && rec.subset != "open") {
        throw Error(ErrorCode::InvalidCase, "subset must be \"closed\" or \"open\"");
      }
      validate_case(c);
      if (auto img = detail::opt_string(j, "image_path")) {
        fs::path p = *img;
        if (p.is_relative()) p = base / p;
        rec.image_path = p;
        c.image = load_image(p, opts.max_image_bytes);
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::MalformedRecord, where + e.what());
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ImageTooLarge) throw Error(ErrorCode::ImageTooLarge, where + e.what());
      throw Error(ErrorCode::MalformedRecord, where + e.what());
    }
    if (auto [it, fresh] = seen.emplace(rec.medical_case.case_id, lineno); !fresh) {
      throw Error(ErrorCode::DuplicateCaseId, where + "case_id '" + it->first + "' already defined on line " +
                                                  std::to_string(it->second));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Case serialization (recordings embed the case so replay needs nothing else)

inline std::vector<std::uint8_t> base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::vector<std::uint8_t> out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    if (c == '=') break;
    const int v = value(c);
    if (v < 0) throw Error(ErrorCode::ContractViolation, "invalid base64");
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
    }
  }
  return out;
}

inline Json case_to_json(const MedicalCase& c) {
  Json opts = Json::array();
  for (const auto& o : c.options) opts.push_back(Json{{"letter", std::string(1, o.letter)}, {"text", o.text}});
  Json j{{"case_id", c.case_id}, {"question", c.question}, {"options", std::move(opts)}};
  j["gold"] = c.gold_answer ? Json(std::string(1, *c.gold_answer)) : Json(nullptr);
  if (c.field_hint) j["field_hint"] = *c.field_hint;
  if (c.imaging_modalities) j["imaging_modalities"] = *c.imaging_modalities;
  if (c.imaging_type) j["imaging_type"] = *c.imaging_type;
  if (c.image) j["image"] = Json{{"media_type", c.image->media_type}, {"base64", base64_encode(c.image->bytes)}};
  return j;
}

inline MedicalCase case_from_json(const Json& j) {
  MedicalCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.question = j.at("question").get<std::string>();
  c.options = detail::options_from_json(j.at("options"));
  if (j.contains("gold") && !j["gold"].is_null()) c.gold_answer = detail::letter_from_json(j["gold"], "gold");
  c.field_hint = detail::opt_string(j, "field_hint");
  c.imaging_modalities = detail::opt_string(j, "imaging_modalities");
  c.imaging_type = detail::opt_string(j, "imaging_type");
  if (j.contains("image")) {
    c.image = Image{base64_decode(j["image"].at("base64").get<std::string>()),
                    j["image"].at("media_type").get<std::string>()};
  }
  validate_case(c);
  return c;
}

inline Json templates_to_json(const TemplateSet& t) {
  Json j = Json::object();
  for (auto k : kAllTemplateKinds) j[std::string(template_file_name(k))] = t.get(k).body;
  return j;
}

inline TemplateSet templates_from_json(const Json& j) {
  TemplateSet t;
  for (auto k : kAllTemplateKinds) {
    if (const std::string key(template_file_name(k)); j.contains(key)) t.set(k, j[key].get<std::string>());
  }
  return t;
}

// ---------------------------------------------------------------------------
// Run configuration

struct BackendSettings {
  std::string kind = "http";  // "http" or "scripted"
  HttpBackendConfig http;
  fs::path script;  // kind == "scripted"
};

struct RunConfig {
  BackendSettings backend;
  EngineConfig engine;
  std::optional<fs::path> templates_dir;
  int max_parallel = 4;
  int trials = 1;
  std::string seed_label;
  fs::path output_dir = "out";
  PriceTable prices;
  std::uintmax_t max_image_bytes = kDefaultMaxImageBytes;
};

inline void validate_run_config(const RunConfig& c) {
  if (c.max_parallel < 1) throw Error(ErrorCode::ConfigError, "max_parallel must be >= 1");
  if (c.trials < 1) throw Error(ErrorCode::ConfigError, "trials must be >= 1");
  if (c.engine.max_parse_retries < 0) throw Error(ErrorCode::ConfigError, "max_parse_retries must be >= 0");
  if (c.backend.kind != "http" && c.backend.kind != "scripted") {
    throw Error(ErrorCode::ConfigError, "backend.kind must be \"http\" or \"scripted\"");
  }
  if (c.backend.kind == "scripted" && c.backend.script.empty()) {
    throw Error(ErrorCode::ConfigError, "scripted backend needs backend.script");
  }
  if (c.prices.input_per_1k < 0 || c.prices.output_per_1k < 0) {
    throw Error(ErrorCode::ConfigError, "prices must be >= 0");
  }
}

/// Relative paths in the document resolve against `base_dir`.
inline RunConfig run_config_from_json(const Json& j, const fs::path& base_dir = {}) {
  auto resolve = [&](const std::string& s) {
    fs::path p = s;
    return p.is_relative() ? base_dir / p : p;
  };
  RunConfig c;
  try {
    if (j.contains("backend")) {
      const Json& b = j["backend"];
      c.backend.kind = b.value("kind", c.backend.kind);
      auto& h = c.backend.http;
      h.base_url = b.value("base_url", h.base_url);
      h.model_id = b.value("model_id", h.model_id);
      h.api_key_env = b.value("api_key_env", h.api_key_env);
      h.timeout = std::chrono::milliseconds(b.value("timeout_ms", h.timeout.count()));
      h.max_retries = b.value("max_retries", h.max_retries);
      h.backoff_initial = std::chrono::milliseconds(b.value("backoff_initial_ms", h.backoff_initial.count()));
      h.backoff_max = std::chrono::milliseconds(b.value("backoff_max_ms", h.backoff_max.count()));
      h.max_in_flight = b.value("max_in_flight", h.max_in_flight);
      if (b.contains("script")) c.backend.script = resolve(b["script"].get<std::string>());
    }
    if (j.contains("engine")) c.engine = engine_config_from_json(j["engine"]);
    if (c.engine.model_id.empty()) c.engine.model_id = c.backend.http.model_id;
    if (j.contains("templates_dir") && !j["templates_dir"].is_null()) {
      c.templates_dir = resolve(j["templates_dir"].get<std::string>());
      c.engine.templates = std::make_shared<const TemplateSet>(TemplateSet::load(*c.templates_dir));
    }
    c.max_parallel = j.value("max_parallel", c.max_parallel);
    c.trials = j.value("trials", c.trials);
    c.seed_label = j.value("seed_label", c.seed_label);
    if (j.contains("output_dir")) c.output_dir = resolve(j["output_dir"].get<std::string>());
    if (j.contains("prices")) {
      c.prices.input_per_1k = j["prices"].value("input_per_1k", 0.0);
      c.prices.output_per_1k = j["prices"].value("output_per_1k", 0.0);
    }
    c.max_image_bytes = j.value("max_image_bytes", c.max_image_bytes);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  validate_run_config(c);
  return c;
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

inline std::unique_ptr<Backend> make_backend(const BackendSettings& s) {
  if (s.kind == "scripted") {
    std::ifstream in(s.script);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot read script " + s.script.string());
    try {
      return ScriptedBackend::from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ConfigError, s.script.string() + ": " + e.what());
    }
  }
  return std::make_unique<HttpBackend>(s.http);
}

// ---------------------------------------------------------------------------
// Report

struct CaseRow {
  std::string case_id;
  int trial = 1;
  std::string subset;
  std::optional<char> gold;
  std::optional<char> answer;  // unset when the case failed
  std::optional<Route> route;
  std::optional<ErrorCode> failure;
  std::string failure_message;
  std::uint64_t api_calls = 0;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;

  bool answered() const { return answer.has_value(); }
  bool correct() const { return answer && gold && *answer == *gold; }
};

struct TrialSummary {
  int trial = 1;
  std::uint64_t cases = 0;
  std::uint64_t answered = 0;
  std::uint64_t correct = 0;
  std::uint64_t closed_answered = 0;
  std::uint64_t closed_correct = 0;

  std::uint64_t unanswered() const { return cases - answered; }
  std::optional<double> full_accuracy() const {
    if (answered == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(answered);
  }
  std::optional<double> closed_accuracy() const {
    if (closed_answered == 0) return std::nullopt;
    return 100.0 * static_cast<double>(closed_correct) / static_cast<double>(closed_answered);
  }
};

struct AccuracyStat {
  std::optional<double> mean;
  std::optional<double> stddev;  // population std, only with >= 2 trials
};

/// Mean and population standard deviation over the defined values.
inline AccuracyStat summarize(const std::vector<std::optional<double>>& per_trial) {
  std::vector<double> v;
  for (const auto& x : per_trial) {
    if (x) v.push_back(*x);
  }
  AccuracyStat s;
  if (v.empty()) return s;
  double sum = 0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  s.mean = mean;
  if (v.size() >= 2) {
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    s.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  }
  return s;
}

/// "61.0±1.0", "61.0" with a single trial, "n/a" when undefined.
inline std::string format_accuracy(const AccuracyStat& s) {
  if (!s.mean) return "n/a";
  char buf[64];
  if (s.stddev) {
    std::snprintf(buf, sizeof buf, "%.1f±%.1f", *s.mean, *s.stddev);
  } else {
    std::snprintf(buf, sizeof buf, "%.1f", *s.mean);
  }
  return buf;
}

struct RunReport {
  std::string model_id;
  std::string seed_label;
  PriceTable prices;
  std::vector<TrialSummary> trials;
  RouteTable routes{RouteRow{Route::T1_T2}, RouteRow{Route::T1_T3}, RouteRow{Route::T1_T2_T3}};
  UsageLedger ledger;
  std::vector<CaseRow> rows;

  AccuracyStat full_accuracy() const {
    std::vector<std::optional<double>> v;
    for (const auto& t : trials) v.push_back(t.full_accuracy());
    return summarize(v);
  }
  AccuracyStat closed_accuracy() const {
    std::vector<std::optional<double>> v;
    for (const auto& t : trials) v.push_back(t.closed_accuracy());
    return summarize(v);
  }
  std::uint64_t unanswered() const {
    std::uint64_t n = 0;
    for (const auto& t : trials) n += t.unanswered();
    return n;
  }
  std::uint64_t case_runs() const { return rows.size(); }
  double mean_calls_per_case() const {
    return rows.empty() ? 0.0 : static_cast<double>(ledger.api_calls()) / static_cast<double>(rows.size());
  }
};

inline CaseRow row_from_transcript(const Transcript& t) {
  CaseRow row;
  row.case_id = t.case_id;
  row.trial = t.trial;
  row.subset = t.subset.value_or("closed");
  row.gold = t.gold_answer;
  if (auto v = t.verdict()) {
    row.answer = v->answer;
    row.route = v->route_taken;
  }
  if (auto f = t.failure()) {
    row.failure = f->code;
    row.failure_message = f->message;
  }
  for (const auto* c : t.all<ModelCallEvent>()) {
    ++row.api_calls;
    row.input_tokens += c->usage.input_tokens;
    row.output_tokens += c->usage.output_tokens;
  }
  return row;
}

/// Aggregates finished transcripts. Trials are discovered from the
/// transcripts themselves; rows are ordered by (trial, case_id).
inline RunReport build_report(std::span<const Transcript> transcripts, const PriceTable& prices = {},
                              std::string model_id = {}, std::string seed_label = {}) {
  RunReport r;
  r.model_id = std::move(model_id);
  r.seed_label = std::move(seed_label);
  r.prices = prices;
  std::map<int, TrialSummary> by_trial;
  for (const auto& t : transcripts) {
    CaseRow row = row_from_transcript(t);
    if (row.answered() && !row.gold) throw Error(ErrorCode::MissingGold, row.case_id);
    auto& s = by_trial[row.trial];
    s.trial = row.trial;
    ++s.cases;
    if (row.answered()) {
      ++s.answered;
      if (row.correct()) ++s.correct;
      if (row.subset == "closed") {
        ++s.closed_answered;
        if (row.correct()) ++s.closed_correct;
      }
    }
    r.ledger.merge(ledger_from_transcript(t));
    r.rows.push_back(std::move(row));
  }
  for (auto& [_, s] : by_trial) r.trials.push_back(s);
  r.routes = route_stats(transcripts);
  std::sort(r.rows.begin(), r.rows.end(), [](const CaseRow& a, const CaseRow& b) {
    return std::tie(a.trial, a.case_id) < std::tie(b.trial, b.case_id);
  });
  return r;
}

namespace detail {

inline Json opt_letter(const std::optional<char>& c) { return c ? Json(std::string(1, *c)) : Json(nullptr); }

inline Json opt_number(const std::optional<double>& x) { return x ? Json(*x) : Json(nullptr); }

}  // namespace detail

inline Json to_json(const RunReport& r) {
  Json trials = Json::array();
  for (const auto& t : r.trials) {
    trials.push_back(Json{{"trial", t.trial},
                          {"cases", t.cases},
                          {"answered", t.answered},
                          {"unanswered", t.unanswered()},
                          {"correct", t.correct},
                          {"closed_answered", t.closed_answered},
                          {"closed_correct", t.closed_correct},
                          {"full_accuracy", detail::opt_number(t.full_accuracy())},
                          {"closed_accuracy", detail::opt_number(t.closed_accuracy())}});
  }
  Json routes = Json::array();
  for (const auto& row : r.routes) {
    routes.push_back(Json{{"route", to_string(row.route)},
                          {"cases", row.cases},
                          {"correct", row.correct},
                          {"accuracy", detail::opt_number(row.accuracy_percent())}});
  }
  Json rows = Json::array();
  for (const auto& c : r.rows) {
    rows.push_back(Json{{"case_id", c.case_id},
                        {"trial", c.trial},
                        {"subset", c.subset},
                        {"gold", detail::opt_letter(c.gold)},
                        {"answer", detail::opt_letter(c.answer)},
                        {"correct", c.correct()},
                        {"route", c.route ? Json(to_string(*c.route)) : Json(nullptr)},
                        {"failure", c.failure ? Json(to_string(*c.failure)) : Json(nullptr)},
                        {"failure_message", c.failure_message},
                        {"api_calls", c.api_calls},
                        {"input_tokens", c.input_tokens},
                        {"output_tokens", c.output_tokens}});
  }
  const auto full = r.full_accuracy();
  const auto closed = r.closed_accuracy();
  return Json{{"model_id", r.model_id},
              {"seed_label", r.seed_label},
              {"accuracy",
               {{"full", {{"mean", detail::opt_number(full.mean)}, {"std", detail::opt_number(full.stddev)}}},
                {"closed", {{"mean", detail::opt_number(closed.mean)}, {"std", detail::opt_number(closed.stddev)}}},
                {"display", format_accuracy(full) + "/" + format_accuracy(closed)},
                {"unanswered", r.unanswered()}}},
              {"trials", std::move(trials)},
              {"routes", std::move(routes)},
              {"usage",
               {{"api_calls", r.ledger.api_calls()},
                {"input_tokens", r.ledger.input_tokens()},
                {"output_tokens", r.ledger.output_tokens()},
                {"estimated_rows", r.ledger.estimated_rows()},
                {"tokens_k", format_token_pair(r.ledger.input_tokens(), r.ledger.output_tokens())},
                {"mean_calls_per_case", r.mean_calls_per_case()},
                {"prices", {{"input_per_1k", r.prices.input_per_1k}, {"output_per_1k", r.prices.output_per_1k}}},
                {"cost", r.ledger.cost(r.prices)}}},
              {"cases", std::move(rows)}};
}

inline std::string render_report_table(const RunReport& r) {
  std::ostringstream os;
  char buf[256];
  os << "model: " << (r.model_id.empty() ? "-" : r.model_id);
  if (!r.seed_label.empty()) os << "  seed: " << r.seed_label;
  os << "  trials: " << r.trials.size() << "\n\n";

  os << "Accuracy (full/closed, %): " << format_accuracy(r.full_accuracy()) << "/"
     << format_accuracy(r.closed_accuracy()) << "  unanswered: " << r.unanswered() << "\n";
  for (const auto& t : r.trials) {
    const auto f = t.full_accuracy(), c = t.closed_accuracy();
    os << "  trial " << t.trial << ": " << format_accuracy({f, std::nullopt}) << "/"
       << format_accuracy({c, std::nullopt}) << "  answered " << t.answered << "/" << t.cases << "\n";
  }

  os << "\nRoute          Cases  Correct  Accuracy\n";
  for (const auto& row : r.routes) {
    const auto acc = row.accuracy_percent();
    char acc_buf[16] = "n/a";
    if (acc) std::snprintf(acc_buf, sizeof acc_buf, "%.1f", *acc);
    std::snprintf(buf, sizeof buf, "%-13s %6llu  %7llu  %8s\n", std::string(route_label(row.route)).c_str(),
                  static_cast<unsigned long long>(row.cases), static_cast<unsigned long long>(row.correct), acc_buf);
    os << buf;
  }

  const auto n = r.rows.size();
  os << "\nTokens(K) Input/Output total: " << format_token_pair(r.ledger.input_tokens(), r.ledger.output_tokens())
     << "\n";
  if (n > 0) {
    const auto per_in = (r.ledger.input_tokens() + n / 2) / n;
    const auto per_out = (r.ledger.output_tokens() + n / 2) / n;
    std::snprintf(buf, sizeof buf, "%.2f", r.mean_calls_per_case());
    os << "Tokens(K) Input/Output per case: " << format_token_pair(per_in, per_out) << "\n";
    os << "API calls per case: " << buf << "\n";
  }
  std::snprintf(buf, sizeof buf, "%.4f", r.ledger.cost(r.prices));
  os << "API calls: " << r.ledger.api_calls() << "  cost: " << buf;
  if (r.ledger.estimated_rows() > 0) os << "  (" << r.ledger.estimated_rows() << " calls with estimated usage)";
  os << "\n";

  os << "\nTrial  Case                  Subset  Gold  Answer  Route        Calls  Tokens(K)    Status\n";
  for (const auto& c : r.rows) {
    std::snprintf(buf, sizeof buf, "%5d  %-20s  %-6s  %-4s  %-6s  %-11s  %5llu  %-11s  ", c.trial,
                  c.case_id.c_str(), c.subset.c_str(), c.gold ? std::string(1, *c.gold).c_str() : "-",
                  c.answer ? std::string(1, *c.answer).c_str() : "-",
                  c.route ? std::string(route_label(*c.route)).c_str() : "-",
                  static_cast<unsigned long long>(c.api_calls),
                  format_token_pair(c.input_tokens, c.output_tokens).c_str());
    os << buf;
    if (c.failure) {
      os << to_string(*c.failure);
    } else {
      os << (c.correct() ? "correct" : "wrong");
    }
    os << "\n";
  }
  return os.str();
}

/// Writes report.json and report.txt into `dir`.
inline void emit_report(const RunReport& r, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::OutputUnwritable, dir.string() + ": " + ec.message());
  auto write = [&](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error(ErrorCode::OutputUnwritable, p.string());
    out << text;
    if (!out) throw Error(ErrorCode::OutputUnwritable, p.string());
  };
  write(dir / "report.json", to_json(r).dump(2) + "\n");
  write(dir / "report.txt", render_report_table(r));
}

// ---------------------------------------------------------------------------
// Batch execution

/// Filename-safe form of a case id.
inline std::string file_stem(const std::string& case_id) {
  std::string out;
  for (unsigned char c : case_id) out += (std::isalnum(c) || c == '-' || c == '_' || c == '.') ? char(c) : '_';
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

inline fs::path transcript_path(const fs::path& output_dir, int trial, const std::string& case_id) {
  return output_dir / "transcripts" / ("trial-" + std::to_string(trial)) / (file_stem(case_id) + ".json");
}

inline fs::path recording_path(const fs::path& output_dir, int trial, const std::string& case_id) {
  return output_dir / "recordings" / ("trial-" + std::to_string(trial)) / (file_stem(case_id) + ".json");
}

struct BenchmarkOptions {
  bool persist = true;  // write transcripts under config.output_dir
  bool record = false;  // also write per-case recordings for replay
  std::function<void(const CaseRow&)> on_case;
};

struct BenchmarkResult {
  RunReport report;
  std::vector<Transcript> transcripts;  // ordered by (trial, dataset order)
};

/// Runs every case `config.trials` times. Per-case errors become failure
/// rows; only I/O problems abort the run.
inline BenchmarkResult run_benchmark(const std::vector<DatasetRecord>& dataset, const RunConfig& config,
                                     Backend& backend, const BenchmarkOptions& opts = {}) {
  validate_run_config(config);
  if (dataset.empty()) throw Error(ErrorCode::ConfigError, "dataset is empty");

  std::optional<RecordingBackend> recorder;
  if (opts.record) recorder.emplace(backend);
  Backend& used = recorder ? static_cast<Backend&>(*recorder) : backend;

  if (opts.persist) {
    for (int trial = 1; trial <= config.trials; ++trial) {
      std::error_code ec;
      fs::create_directories(transcript_path(config.output_dir, trial, "x").parent_path(), ec);
      if (!ec && opts.record) fs::create_directories(recording_path(config.output_dir, trial, "x").parent_path(), ec);
      if (ec) throw Error(ErrorCode::OutputUnwritable, config.output_dir.string() + ": " + ec.message());
    }
  }

  const std::size_t n = dataset.size();
  std::vector<Transcript> transcripts(n * static_cast<std::size_t>(config.trials));
  std::mutex io_mu;
  std::exception_ptr io_error;

  for (int trial = 1; trial <= config.trials; ++trial) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard lock(io_mu);
          if (io_error) return;
        }
        const DatasetRecord& rec = dataset[i];
        Deliberation d(rec.medical_case, config.engine, used, trial);
        try {
          d.run();
        } catch (const std::exception&) {
          // recorded as a FailureEvent in the transcript
        }
        Transcript t = d.take_transcript();
        t.subset = rec.subset;
        try {
          if (opts.persist) {
            save_transcript(t, transcript_path(config.output_dir, trial, t.case_id));
            if (recorder) {
              Recording r = recorder->take_case(t.case_id, trial);
              r.session = Json{{"case", case_to_json(rec.medical_case)},
                               {"subset", rec.subset},
                               {"trial", trial},
                               {"engine", to_json(config.engine)},
                               {"templates", templates_to_json(*config.engine.templates)},
                               {"verdict", t.verdict() ? to_json(*t.verdict()) : Json(nullptr)},
                               {"failure", t.failure() ? Json(to_string(t.failure()->code)) : Json(nullptr)}};
              r.save(recording_path(config.output_dir, trial, t.case_id));
            }
          }
        } catch (...) {
          std::lock_guard lock(io_mu);
          if (!io_error) io_error = std::current_exception();
          return;
        }
        if (opts.on_case) {
          CaseRow row = row_from_transcript(t);
          std::lock_guard lock(io_mu);
          opts.on_case(row);
        }
        transcripts[static_cast<std::size_t>(trial - 1) * n + i] = std::move(t);
      }
    };
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.max_parallel), n);
    {
      std::vector<std::jthread> pool;
      for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
      worker();
    }
    if (io_error) std::rethrow_exception(io_error);
  }

  RunReport report = build_report(transcripts, config.prices, config.engine.model_id, config.seed_label);
  return BenchmarkResult{std::move(report), std::move(transcripts)};
}

/// Loads every *.json transcript below `dir` (recursively).
inline std::vector<Transcript> load_transcripts(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Transcript> out;
  for (const auto& f : files) out.push_back(load_transcript(f));
  return out;
}

inline RunReport score_transcripts(const fs::path& dir, const PriceTable& prices = {}) {
  const auto ts = load_transcripts(dir);
  return build_report(ts, prices);
}

// ---------------------------------------------------------------------------
// Replay

struct ReplayOutcome {
  fs::path file;
  std::string case_id;
  int trial = 1;
  bool matched = false;
  std::string message;
  std::optional<Verdict> verdict;
};

/// Re-runs one recorded case against its own recording and compares the
/// verdict with the recorded one. A recorded failure matches when replay
/// fails with the same error code.
inline ReplayOutcome replay_recording(const Recording& rec, const fs::path& file = {}) {
  ReplayOutcome out;
  out.file = file;
  const Json& s = rec.session;
  MedicalCase c;
  EngineConfig engine;
  try {
    c = case_from_json(s.at("case"));
    engine = engine_config_from_json(s.value("engine", Json::object()));
    if (s.contains("templates")) engine.templates = std::make_shared<const TemplateSet>(templates_from_json(s["templates"]));
    out.trial = s.value("trial", 1);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, file.string() + ": session metadata: " + e.what());
  }
  out.case_id = c.case_id;
  ReplayBackend backend(rec);
  Deliberation d(c, engine, backend, out.trial);
  const std::string recorded_failure =
      s.contains("failure") && s["failure"].is_string() ? s["failure"].get<std::string>() : "";
  try {
    out.verdict = d.run();
  } catch (const Error& e) {
    out.matched = recorded_failure == to_string(e.code());
    out.message = e.what();
    return out;
  }
  const Json& expected = s.contains("verdict") ? s["verdict"] : Json(nullptr);
  if (expected.is_null()) {
    out.message = "recording has no verdict but replay produced one";
    return out;
  }
  const Verdict want = verdict_from_json(expected);
  out.matched = want == *out.verdict;
  if (!out.matched) out.message = "verdict differs from recording";
  return out;
}

inline std::vector<ReplayOutcome> replay_directory(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<ReplayOutcome> out;
  for (const auto& f : files) out.push_back(replay_recording(Recording::load(f), f));
  return out;
}

}  // namespace ucagents
