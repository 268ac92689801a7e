// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucagents/backend.hpp"
#include "ucagents/error.hpp"
#include "ucagents/types.hpp"

namespace ucagents {

struct ModelCallEvent {
  AgentId agent;
  Phase phase = Phase::Diagnose;
  int attempt = 1;
  double temperature = 0.0;
  RequestDigest request;
  std::string response;
  Usage usage;
  double wall_ms = 0.0;
};

struct ParseOutcomeEvent {
  AgentId agent;
  Phase phase = Phase::Diagnose;
  int attempt = 1;
  bool ok = false;
  std::optional<ErrorCode> error;
  std::string error_message;
  Json fields = Json::object();
};

struct RoutingEvent {
  RouteDecision decision;
};

struct InquiryEvent {
  Inquiry inquiry;
};

struct VerdictEvent {
  Verdict verdict;
};

/// Written instead of a verdict when a case aborts (harness partial saves).
struct FailureEvent {
  ErrorCode code = ErrorCode::ParseExhausted;
  std::string message;
};

using EventBody = std::variant<ModelCallEvent, ParseOutcomeEvent, RoutingEvent, InquiryEvent, VerdictEvent, FailureEvent>;

struct Event {
  std::uint64_t seq = 0;
  EventBody body;
};

struct Transcript {
  static constexpr int kSchemaVersion = 1;
  int schema_version = kSchemaVersion;
  std::string case_id;
  int trial = 1;
  std::optional<char> gold_answer;
  std::optional<std::string> subset;
  std::vector<Event> events;

  void append(EventBody body) {
    const std::uint64_t seq = events.empty() ? 1 : events.back().seq + 1;
    events.push_back(Event{seq, std::move(body)});
  }

  template <class T>
  std::vector<const T*> all() const {
    std::vector<const T*> out;
    for (const auto& e : events) {
      if (const auto* p = std::get_if<T>(&e.body)) out.push_back(p);
    }
    return out;
  }

  std::optional<Verdict> verdict() const {
    for (const auto& e : events) {
      if (const auto* v = std::get_if<VerdictEvent>(&e.body)) return v->verdict;
    }
    return std::nullopt;
  }

  std::optional<FailureEvent> failure() const {
    for (const auto& e : events) {
      if (const auto* f = std::get_if<FailureEvent>(&e.body)) return *f;
    }
    return std::nullopt;
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline Json letter_json(char c) { return Json(std::string(1, c)); }

inline char letter_from_json(const Json& j) {
  const auto s = j.get<std::string>();
  if (s.size() != 1) throw Error(ErrorCode::ContractViolation, "expected a single letter, got \"" + s + "\"");
  return s[0];
}

inline ErrorCode error_code_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::IoError); ++i) {
    if (to_string(static_cast<ErrorCode>(i)) == s) return static_cast<ErrorCode>(i);
  }
  throw Error(ErrorCode::ContractViolation, "unknown error code: " + std::string(s));
}

inline Destination destination_from_string(std::string_view s) {
  for (auto d : {Destination::Tier2, Destination::Tier3, Destination::Terminate}) {
    if (to_string(d) == s) return d;
  }
  throw Error(ErrorCode::ContractViolation, "unknown destination: " + std::string(s));
}

}  // namespace detail

inline Json to_json(const RouteDecision& d) {
  Json j{{"stage", to_string(d.stage)}, {"destination", to_string(d.destination)}, {"divergence", d.divergence}};
  j["candidates"] = d.candidates ? Json::array({detail::letter_json(d.candidates->first),
                                                detail::letter_json(d.candidates->second)})
                                 : Json(nullptr);
  return j;
}

inline RouteDecision route_decision_from_json(const Json& j) {
  RouteDecision d;
  d.stage = j.at("stage").get<std::string>() == "after_tier1" ? RouteStage::AfterTier1 : RouteStage::AfterTier2;
  d.destination = detail::destination_from_string(j.at("destination").get<std::string>());
  d.divergence = j.at("divergence").get<bool>();
  if (j.contains("candidates") && !j["candidates"].is_null()) {
    d.candidates = std::pair{detail::letter_from_json(j["candidates"].at(0)),
                             detail::letter_from_json(j["candidates"].at(1))};
  }
  return d;
}

inline Json to_json(const Verdict& v) {
  return Json{{"answer", detail::letter_json(v.answer)},
              {"final_reasoning", v.final_reasoning},
              {"route", to_string(v.route_taken)},
              {"chose_outside_candidates", v.chose_outside_candidates}};
}

inline Verdict verdict_from_json(const Json& j) {
  return Verdict{detail::letter_from_json(j.at("answer")), j.at("final_reasoning").get<std::string>(),
                 route_from_string(j.at("route").get<std::string>()), j.at("chose_outside_candidates").get<bool>()};
}

struct TranscriptJsonOptions {
  bool include_timing = true;
};

inline Json to_json(const Transcript& t, TranscriptJsonOptions opts = {}) {
  Json events = Json::array();
  for (const auto& e : t.events) {
    Json je{{"seq", e.seq}};
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, ModelCallEvent>) {
            je["type"] = "model_call";
            je["agent"] = b.agent.name();
            je["phase"] = to_string(b.phase);
            je["attempt"] = b.attempt;
            je["temperature"] = b.temperature;
            je["request"] = to_json(b.request);
            je["response"] = b.response;
            je["usage"] = to_json(b.usage);
            if (opts.include_timing) je["wall_ms"] = b.wall_ms;
          } else if constexpr (std::is_same_v<T, ParseOutcomeEvent>) {
            je["type"] = "parse_outcome";
            je["agent"] = b.agent.name();
            je["phase"] = to_string(b.phase);
            je["attempt"] = b.attempt;
            je["ok"] = b.ok;
            je["error"] = b.error ? Json(std::string(to_string(*b.error))) : Json(nullptr);
            if (!b.ok) je["error_message"] = b.error_message;
            je["fields"] = b.fields;
          } else if constexpr (std::is_same_v<T, RoutingEvent>) {
            je["type"] = "routing";
            je["decision"] = to_json(b.decision);
          } else if constexpr (std::is_same_v<T, InquiryEvent>) {
            je["type"] = "inquiry";
            je["addressed_to"] = b.inquiry.addressed_to;
            je["reviewed_option"] = detail::letter_json(b.inquiry.reviewed_option);
            je["question"] = b.inquiry.question;
          } else if constexpr (std::is_same_v<T, VerdictEvent>) {
            je["type"] = "verdict";
            je["verdict"] = to_json(b.verdict);
          } else if constexpr (std::is_same_v<T, FailureEvent>) {
            je["type"] = "failure";
            je["code"] = to_string(b.code);
            je["message"] = b.message;
          }
        },
        e.body);
    events.push_back(std::move(je));
  }
  Json j{{"schema_version", t.schema_version}, {"case_id", t.case_id}, {"trial", t.trial}};
  j["gold_answer"] = t.gold_answer ? detail::letter_json(*t.gold_answer) : Json(nullptr);
  j["subset"] = t.subset ? Json(*t.subset) : Json(nullptr);
  j["events"] = std::move(events);
  return j;
}

inline Transcript transcript_from_json(const Json& j) {
  if (!j.contains("schema_version")) throw Error(ErrorCode::ContractViolation, "transcript lacks schema_version");
  const int version = j["schema_version"].get<int>();
  if (version != Transcript::kSchemaVersion) {
    throw Error(ErrorCode::ContractViolation, "unsupported transcript schema_version " + std::to_string(version));
  }
  Transcript t;
  t.case_id = j.at("case_id").get<std::string>();
  t.trial = j.value("trial", 1);
  if (j.contains("gold_answer") && !j["gold_answer"].is_null()) {
    t.gold_answer = detail::letter_from_json(j["gold_answer"]);
  }
  if (j.contains("subset") && !j["subset"].is_null()) t.subset = j["subset"].get<std::string>();
  for (const auto& je : j.at("events")) {
    Event e;
    e.seq = je.at("seq").get<std::uint64_t>();
    const auto type = je.at("type").get<std::string>();
    if (type == "model_call") {
      ModelCallEvent b;
      b.agent = AgentId::parse(je.at("agent").get<std::string>());
      b.phase = phase_from_string(je.at("phase").get<std::string>());
      b.attempt = je.at("attempt").get<int>();
      b.temperature = je.at("temperature").get<double>();
      b.request = digest_from_json(je.at("request"));
      b.response = je.at("response").get<std::string>();
      b.usage = usage_from_json(je.at("usage"));
      b.wall_ms = je.value("wall_ms", 0.0);
      e.body = std::move(b);
    } else if (type == "parse_outcome") {
      ParseOutcomeEvent b;
      b.agent = AgentId::parse(je.at("agent").get<std::string>());
      b.phase = phase_from_string(je.at("phase").get<std::string>());
      b.attempt = je.at("attempt").get<int>();
      b.ok = je.at("ok").get<bool>();
      if (!je.at("error").is_null()) b.error = detail::error_code_from_string(je["error"].get<std::string>());
      b.error_message = je.value("error_message", std::string{});
      b.fields = je.value("fields", Json::object());
      e.body = std::move(b);
    } else if (type == "routing") {
      e.body = RoutingEvent{route_decision_from_json(je.at("decision"))};
    } else if (type == "inquiry") {
      e.body = InquiryEvent{Inquiry{je.at("addressed_to").get<int>(), detail::letter_from_json(je.at("reviewed_option")),
                                    je.at("question").get<std::string>()}};
    } else if (type == "verdict") {
      e.body = VerdictEvent{verdict_from_json(je.at("verdict"))};
    } else if (type == "failure") {
      e.body = FailureEvent{detail::error_code_from_string(je.at("code").get<std::string>()),
                            je.at("message").get<std::string>()};
    } else {
      throw Error(ErrorCode::ContractViolation, "unknown event type: " + type);
    }
    t.events.push_back(std::move(e));
  }
  return t;
}

inline void save_transcript(const Transcript& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::OutputUnwritable, path.string());
  out << to_json(t).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::OutputUnwritable, path.string());
}

inline Transcript load_transcript(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read transcript " + path.string());
  try {
    return transcript_from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ContractViolation, path.string() + ": " + e.what());
  }
}

/// Ordering and pairing rules every transcript must satisfy. Returns a list
/// of human-readable violations, empty when the transcript is well formed.
inline std::vector<std::string> structural_violations(const Transcript& t) {
  std::vector<std::string> out;
  std::uint64_t prev = 0;
  std::size_t verdicts = 0;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto& e = t.events[i];
    if (e.seq <= prev) out.push_back("seq " + std::to_string(e.seq) + " is not increasing");
    prev = e.seq;
    if (const auto* call = std::get_if<ModelCallEvent>(&e.body)) {
      const ParseOutcomeEvent* next =
          i + 1 < t.events.size() ? std::get_if<ParseOutcomeEvent>(&t.events[i + 1].body) : nullptr;
      if (!next || !(next->agent == call->agent) || next->phase != call->phase || next->attempt != call->attempt) {
        out.push_back("model call at seq " + std::to_string(e.seq) + " is not followed by its parse outcome");
      }
    } else if (std::holds_alternative<ParseOutcomeEvent>(e.body)) {
      if (i == 0 || !std::holds_alternative<ModelCallEvent>(t.events[i - 1].body)) {
        out.push_back("parse outcome at seq " + std::to_string(e.seq) + " has no model call");
      }
    } else if (std::holds_alternative<VerdictEvent>(e.body)) {
      ++verdicts;
      if (i + 1 != t.events.size()) out.push_back("verdict is not the last event");
    }
  }
  const bool failed = t.failure().has_value();
  if (!failed && verdicts != 1) out.push_back("expected exactly one verdict, found " + std::to_string(verdicts));
  if (failed && verdicts != 0) out.push_back("failed transcript carries a verdict");
  return out;
}

// ---------------------------------------------------------------------------
// Human-readable renderings

/// Agent outputs only, labelled by seat; what a judge model reads.
inline std::string deliberation_record(const Transcript& t) {
  std::string out;
  for (std::size_t i = 0; i < t.events.size(); ++i) {
    const auto* call = std::get_if<ModelCallEvent>(&t.events[i].body);
    if (!call) continue;
    const auto* parsed =
        i + 1 < t.events.size() ? std::get_if<ParseOutcomeEvent>(&t.events[i + 1].body) : nullptr;
    if (parsed && !parsed->ok) continue;  // rejected attempts are not part of the discussion
    out += "[" + call->agent.name() + " / " + std::string(to_string(call->phase)) + "] " + call->response + "\n";
  }
  return out;
}

inline std::string render_trace(const Transcript& t) {
  std::ostringstream os;
  os << "Case " << t.case_id << " (trial " << t.trial << ")";
  if (t.gold_answer) os << "  gold=" << *t.gold_answer;
  if (t.subset) os << "  subset=" << *t.subset;
  os << "\n";
  for (const auto& e : t.events) {
    os << "#" << e.seq << " ";
    std::visit(
        [&](const auto& b) {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, ModelCallEvent>) {
            os << "call " << b.agent.name() << " " << to_string(b.phase) << " attempt " << b.attempt
               << " T=" << b.temperature << "  tokens " << b.usage.input_tokens << "/" << b.usage.output_tokens
               << (b.usage.estimated ? " (est)" : "") << "\n";
            std::istringstream lines(b.response);
            for (std::string line; std::getline(lines, line);) os << "    | " << line << "\n";
          } else if constexpr (std::is_same_v<T, ParseOutcomeEvent>) {
            os << "parse " << b.agent.name() << (b.ok ? " ok " : " FAILED ");
            if (b.ok) {
              if (b.fields.contains("answer")) os << "answer=" << b.fields["answer"].template get<std::string>();
              if (b.fields.contains("target")) os << "target=" << b.fields["target"].template get<std::string>();
            } else {
              os << b.error_message;
            }
            os << "\n";
          } else if constexpr (std::is_same_v<T, RoutingEvent>) {
            const auto& d = b.decision;
            os << "route " << to_string(d.stage) << " -> " << to_string(d.destination) << " (D=" << d.divergence;
            if (d.candidates) os << ", candidates " << d.candidates->first << "," << d.candidates->second;
            os << ")\n";
          } else if constexpr (std::is_same_v<T, InquiryEvent>) {
            os << "inquiry to expert " << b.inquiry.addressed_to << " (reviews " << b.inquiry.reviewed_option
               << "): " << b.inquiry.question << "\n";
          } else if constexpr (std::is_same_v<T, VerdictEvent>) {
            os << "VERDICT " << b.verdict.answer << " via " << route_label(b.verdict.route_taken)
               << (b.verdict.chose_outside_candidates ? " (outside candidates)" : "") << "\n";
            std::istringstream lines(b.verdict.final_reasoning);
            for (std::string line; std::getline(lines, line);) os << "    | " << line << "\n";
          } else if constexpr (std::is_same_v<T, FailureEvent>) {
            os << "FAILURE " << to_string(b.code) << ": " << b.message << "\n";
          }
        },
        e.body);
  }
  return os.str();
}

}  // namespace ucagents
