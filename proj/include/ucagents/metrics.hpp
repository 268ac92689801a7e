// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ucagents/backend.hpp"
#include "ucagents/error.hpp"
#include "ucagents/prompts.hpp"
#include "ucagents/transcript.hpp"
#include "ucagents/types.hpp"

namespace ucagents {

// ---------------------------------------------------------------------------
// Decision-trajectory entropy

struct TrajectoryMetrics {
  std::vector<char> hypotheses;
  double entropy_bits = 0.0;
  int distinct_count = 0;
};

/// Shannon entropy (bits) of the empirical letter distribution.
inline TrajectoryMetrics trajectory_entropy(std::span<const char> hypotheses) {
  if (hypotheses.empty()) throw Error(ErrorCode::EmptyTrajectory, "no hypotheses");
  std::array<std::uint32_t, 256> counts{};
  for (char h : hypotheses) ++counts[static_cast<unsigned char>(h)];
  const double total = static_cast<double>(hypotheses.size());
  TrajectoryMetrics m;
  m.hypotheses.assign(hypotheses.begin(), hypotheses.end());
  double h = 0.0;
  for (std::uint32_t c : counts) {
    if (c == 0) continue;
    ++m.distinct_count;
    if (c == hypotheses.size()) continue;  // exact zero for unanimity
    const double p = c / total;
    h -= p * std::log2(p);
  }
  m.entropy_bits = h;
  return m;
}

/// Letters proposed during one case: both tier-1 answers, the tier-2 answer
/// when present, and the final verdict. Critics audit and do not propose.
inline std::vector<char> hypotheses_from_transcript(const Transcript& t) {
  std::vector<char> out;
  for (const auto* p : t.all<ParseOutcomeEvent>()) {
    if (!p->ok) continue;
    if (p->phase == Phase::Diagnose || p->phase == Phase::Review) {
      out.push_back(p->fields.at("answer").get<std::string>().at(0));
    }
  }
  if (auto v = t.verdict()) out.push_back(v->answer);
  return out;
}

// ---------------------------------------------------------------------------
// Token / cost ledger

struct PriceTable {
  double input_per_1k = 0.0;
  double output_per_1k = 0.0;
};

struct LedgerRow {
  std::string agent;
  std::string phase;
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  bool estimated = false;
};

/// Token sums are exact integers; cost is the only real-valued quantity.
class UsageLedger {
 public:
  void add(LedgerRow row) {
    input_total_ += row.input_tokens;
    output_total_ += row.output_tokens;
    if (row.estimated) ++estimated_rows_;
    rows_.push_back(std::move(row));
  }

  void merge(const UsageLedger& other) {
    for (const auto& r : other.rows_) add(r);
  }

  const std::vector<LedgerRow>& rows() const { return rows_; }
  std::uint64_t input_tokens() const { return input_total_; }
  std::uint64_t output_tokens() const { return output_total_; }
  std::uint64_t api_calls() const { return rows_.size(); }
  std::uint64_t estimated_rows() const { return estimated_rows_; }

  double cost(const PriceTable& prices) const {
    return (static_cast<double>(input_total_) * prices.input_per_1k +
            static_cast<double>(output_total_) * prices.output_per_1k) /
           1000.0;
  }

 private:
  std::vector<LedgerRow> rows_;
  std::uint64_t input_total_ = 0;
  std::uint64_t output_total_ = 0;
  std::uint64_t estimated_rows_ = 0;
};

/// One row per ModelCall event, parse retries included.
inline UsageLedger ledger_from_transcript(const Transcript& t) {
  UsageLedger ledger;
  for (const auto* call : t.all<ModelCallEvent>()) {
    ledger.add(LedgerRow{call->agent.name(), std::string(to_string(call->phase)), call->usage.input_tokens,
                         call->usage.output_tokens, call->usage.estimated});
  }
  return ledger;
}

/// Thousands of tokens with two decimals, rounded half-up to the nearest
/// ten tokens in integer arithmetic: 4400 -> "4.40", 365 -> "0.37".
inline std::string format_kilotokens(std::uint64_t tokens) {
  const std::uint64_t tens = (tokens + 5) / 10;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%llu.%02llu", static_cast<unsigned long long>(tens / 100),
                static_cast<unsigned long long>(tens % 100));
  return buf;
}

/// "<input>/<output>" in K units.
inline std::string format_token_pair(std::uint64_t input_tokens, std::uint64_t output_tokens) {
  return format_kilotokens(input_tokens) + "/" + format_kilotokens(output_tokens);
}

/// Inverse of format_kilotokens: "4.40" -> 4400.
inline std::uint64_t parse_kilotokens(std::string_view s) {
  const auto dot = s.find('.');
  if (dot == std::string_view::npos || s.size() - dot != 3 || dot == 0) {
    throw Error(ErrorCode::ContractViolation, "not an X.XX kilotoken value: " + std::string(s));
  }
  std::uint64_t whole = 0;
  for (char c : s.substr(0, dot)) {
    if (c < '0' || c > '9') throw Error(ErrorCode::ContractViolation, "bad kilotoken value: " + std::string(s));
    whole = whole * 10 + static_cast<std::uint64_t>(c - '0');
  }
  const char d1 = s[dot + 1], d2 = s[dot + 2];
  if (d1 < '0' || d1 > '9' || d2 < '0' || d2 > '9') {
    throw Error(ErrorCode::ContractViolation, "bad kilotoken value: " + std::string(s));
  }
  return whole * 1000 + static_cast<std::uint64_t>(d1 - '0') * 100 + static_cast<std::uint64_t>(d2 - '0') * 10;
}

// ---------------------------------------------------------------------------
// Per-route accuracy

struct RouteOutcome {
  std::string case_id;
  Route route = Route::T1_T2;
  char answer = 'A';
  std::optional<char> gold;
};

struct RouteRow {
  Route route = Route::T1_T2;
  std::uint64_t cases = 0;
  std::uint64_t correct = 0;
  std::optional<double> accuracy_percent() const {
    if (cases == 0) return std::nullopt;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(cases);
  }
};

using RouteTable = std::array<RouteRow, 3>;

inline RouteTable route_stats(std::span<const RouteOutcome> outcomes) {
  RouteTable table{RouteRow{Route::T1_T2}, RouteRow{Route::T1_T3}, RouteRow{Route::T1_T2_T3}};
  for (const auto& o : outcomes) {
    if (!o.gold) throw Error(ErrorCode::MissingGold, o.case_id);
    auto& row = table[static_cast<std::size_t>(o.route)];
    ++row.cases;
    if (o.answer == *o.gold) ++row.correct;
  }
  return table;
}

/// Transcripts without a verdict (failed cases) belong to no route and are
/// skipped.
inline RouteTable route_stats(std::span<const Transcript> transcripts) {
  std::vector<RouteOutcome> outcomes;
  for (const auto& t : transcripts) {
    if (auto v = t.verdict()) outcomes.push_back(RouteOutcome{t.case_id, v->route_taken, v->answer, t.gold_answer});
  }
  return route_stats(std::span<const RouteOutcome>(outcomes));
}

// ---------------------------------------------------------------------------
// Judge-assisted metrics

struct NoiseMetrics {
  std::uint64_t evidence_sentences = 0;
  std::uint64_t noise_sentences = 0;
  std::optional<double> ratio;  // unset when evidence_sentences == 0
  std::string judge_model_id;
};

struct EvidenceCoverage {
  std::uint64_t identified = 0;
  std::uint64_t missed = 0;
  std::optional<double> coverage;  // identified / (identified + missed)
  std::string judge_model_id;
};

namespace detail {

// Finds "<key> = <digits>" (also ':' instead of '='), case-insensitive;
// last occurrence wins.
inline std::optional<std::uint64_t> find_count(std::string_view text, std::string_view key, std::size_t from = 0,
                                               std::size_t* end_out = nullptr) {
  std::optional<std::uint64_t> found;
  for (std::size_t i = from; i + key.size() <= text.size(); ++i) {
    bool match = true;
    for (std::size_t k = 0; k < key.size() && match; ++k) match = lower(text[i + k]) == lower(key[k]);
    if (!match) continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    std::size_t j = i + key.size();
    while (j < text.size() && (text[j] == ' ' || text[j] == '*')) ++j;
    if (j >= text.size() || (text[j] != '=' && text[j] != ':')) continue;
    ++j;
    while (j < text.size() && (text[j] == ' ' || text[j] == '*')) ++j;
    const std::size_t digits = j;
    std::uint64_t v = 0;
    while (j < text.size() && text[j] >= '0' && text[j] <= '9' && j - digits < 12) v = v * 10 + (text[j++] - '0');
    if (j == digits) continue;
    found = v;
    if (end_out) *end_out = j;
    if (from > 0 || end_out) return found;  // first hit after `from` when scanning sequentially
  }
  return found;
}

inline ChatResponse judge_call(Backend& judge, const std::string& prompt, const std::string& case_id,
                               const std::string& model_id, std::shared_ptr<const Image> image = nullptr) {
  ChatRequest req;
  req.messages.push_back(ChatMessage{MessageRole::User, prompt, std::move(image)});
  req.temperature = 0.0;
  req.model_id = model_id;
  req.context = CallContext{case_id, "judge"};
  try {
    return judge.complete(req);
  } catch (const Error& e) {
    throw Error(ErrorCode::JudgeUnavailable, e.what());
  }
}

}  // namespace detail

inline NoiseMetrics noise_from_counts(std::uint64_t evidence, std::uint64_t noise, std::string judge_model_id) {
  NoiseMetrics m{evidence, noise, std::nullopt, std::move(judge_model_id)};
  if (evidence > 0) m.ratio = static_cast<double>(noise) / static_cast<double>(evidence);
  return m;
}

/// Parses a judge reply of the form "evidence=<n> noise=<m>".
inline NoiseMetrics parse_noise_reply(std::string_view reply, std::string judge_model_id = {}) {
  auto evidence = detail::find_count(reply, "evidence");
  auto noise = detail::find_count(reply, "noise");
  if (!evidence || !noise) {
    throw Error(ErrorCode::JudgeOutputUnparsable, "expected \"evidence=<n> noise=<m>\" in judge reply");
  }
  return noise_from_counts(*evidence, *noise, std::move(judge_model_id));
}

/// Sentence classification is delegated to the judge model; the counts are
/// read from its structured reply.
inline NoiseMetrics judge_noise_ratio(const Transcript& t, Backend& judge, const PromptTemplate& judge_prompt,
                                      const std::string& judge_model_id = {}) {
  if (t.events.empty()) throw Error(ErrorCode::PreconditionViolation, "empty transcript");
  const std::string prompt = render(judge_prompt, Bindings{{"DIAGNOSTIC RECORD", deliberation_record(t)}});
  const ChatResponse resp = detail::judge_call(judge, prompt, t.case_id, judge_model_id);
  return parse_noise_reply(resp.text, judge_model_id);
}

/// Several records per judge call. The reply must list one
/// "evidence=<n> noise=<m>" pair per record, in record order.
inline std::vector<NoiseMetrics> judge_noise_ratio_batched(std::span<const Transcript> transcripts, Backend& judge,
                                                           const PromptTemplate& judge_prompt,
                                                           std::size_t batch_size,
                                                           const std::string& judge_model_id = {}) {
  if (batch_size == 0) throw Error(ErrorCode::PreconditionViolation, "batch_size must be >= 1");
  std::vector<NoiseMetrics> out;
  for (std::size_t start = 0; start < transcripts.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, transcripts.size() - start);
    std::string records;
    std::string batch_id;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& t = transcripts[start + k];
      records += "Record " + std::to_string(k + 1) + ":\n" + deliberation_record(t) + "\n";
      batch_id += (k ? "+" : "") + t.case_id;
    }
    if (n > 1) {
      records += "Report one line per record, in order: Record <k>: evidence=<n> noise=<m>\n";
    }
    const std::string prompt = render(judge_prompt, Bindings{{"DIAGNOSTIC RECORD", records}});
    const ChatResponse resp = detail::judge_call(judge, prompt, batch_id, judge_model_id);
    std::size_t pos = 0;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t end = 0;
      auto ev = detail::find_count(resp.text, "evidence", pos, &end);
      if (!ev) throw Error(ErrorCode::JudgeOutputUnparsable, "missing evidence count for record " + std::to_string(k + 1));
      pos = end;
      auto no = detail::find_count(resp.text, "noise", pos, &end);
      if (!no) throw Error(ErrorCode::JudgeOutputUnparsable, "missing noise count for record " + std::to_string(k + 1));
      pos = end;
      out.push_back(noise_from_counts(*ev, *no, judge_model_id));
    }
  }
  return out;
}

/// Judge-dependent by nature; reported, never asserted numerically.
inline EvidenceCoverage judge_evidence_coverage(const Transcript& t, const MedicalCase& c, Backend& judge,
                                                const PromptTemplate& judge_prompt,
                                                const std::string& judge_model_id = {}) {
  const std::string prompt = render(judge_prompt, Bindings{{"MEDICAL CASE", format_medical_case(c)},
                                                           {"DIAGNOSTIC RECORD", deliberation_record(t)}});
  std::shared_ptr<const Image> image;
  if (c.image) image = std::make_shared<const Image>(*c.image);
  const ChatResponse resp = detail::judge_call(judge, prompt, t.case_id, judge_model_id, image);
  auto identified = detail::find_count(resp.text, "identified");
  auto missed = detail::find_count(resp.text, "missed");
  if (!identified || !missed) {
    throw Error(ErrorCode::JudgeOutputUnparsable, "expected \"identified=<n> missed=<m>\" in judge reply");
  }
  EvidenceCoverage cov{*identified, *missed, std::nullopt, judge_model_id};
  if (*identified + *missed > 0) cov.coverage = static_cast<double>(*identified) / static_cast<double>(*identified + *missed);
  return cov;
}

}  // namespace ucagents
