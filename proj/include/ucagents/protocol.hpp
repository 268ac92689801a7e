// SPDX-License-Identifier: Apache-2.0
#pragma once

// The three-tier deliberation for a single case.
//
//   Tier-1  two identically prompted experts diagnose independently.
//           Agreement goes to Tier-2, disagreement straight to Tier-3.
//   Tier-2  one supervisor re-checks the consensus against the evidence.
//           Agreement terminates; an alternative escalates to Tier-3.
//   Tier-3  two critics each attack exactly one candidate, the leader asks
//           each critic one question, the critics answer once, and the
//           leader arbitrates (possibly outside the candidate pair).
//
// No agent revises a stance once stated and information only flows forward.

#include <array>
#include <chrono>
#include <exception>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucagents/backend.hpp"
#include "ucagents/case.hpp"
#include "ucagents/error.hpp"
#include "ucagents/metrics.hpp"
#include "ucagents/prompts.hpp"
#include "ucagents/transcript.hpp"
#include "ucagents/types.hpp"

namespace ucagents {

struct EngineConfig {
  std::string model_id;
  double tier1_temperature = 0.7;
  double tier2_temperature = 0.5;
  double tier3_critic_temperature = 0.5;
  double tier3_inquiry_temperature = 0.1;  // leader inquiry and critic responses
  double arbitration_temperature = 0.1;
  int max_parse_retries = 2;
  std::optional<int> max_output_tokens;
  bool concurrent_calls = true;
  std::string default_medical_field = "medical";
  std::string default_imaging_modalities = "medical imaging";
  std::string default_imaging_type = "medical";
  std::shared_ptr<const TemplateSet> templates = std::make_shared<const TemplateSet>();

  double temperature_for(Phase phase) const {
    switch (phase) {
      case Phase::Diagnose: return tier1_temperature;
      case Phase::Review: return tier2_temperature;
      case Phase::RiskReport: return tier3_critic_temperature;
      case Phase::Inquiry:
      case Phase::InquiryResponse: return tier3_inquiry_temperature;
      case Phase::Arbitration: return arbitration_temperature;
      case Phase::Judge: return 0.0;
    }
    return 0.0;
  }
};

inline Json to_json(const EngineConfig& c) {
  Json j{{"model_id", c.model_id},
         {"temperatures",
          {{"tier1", c.tier1_temperature},
           {"tier2", c.tier2_temperature},
           {"tier3_critic", c.tier3_critic_temperature},
           {"tier3_inquiry", c.tier3_inquiry_temperature},
           {"arbitration", c.arbitration_temperature}}},
         {"max_parse_retries", c.max_parse_retries},
         {"concurrent_calls", c.concurrent_calls},
         {"prompt_defaults",
          {{"medical_field", c.default_medical_field},
           {"imaging_modalities", c.default_imaging_modalities},
           {"imaging_type", c.default_imaging_type}}}};
  j["max_output_tokens"] = c.max_output_tokens ? Json(*c.max_output_tokens) : Json(nullptr);
  return j;
}

/// Reads the engine keys of a config document; absent keys keep defaults.
/// Templates are not part of the document and stay at their defaults.
inline EngineConfig engine_config_from_json(const Json& j) {
  EngineConfig c;
  c.model_id = j.value("model_id", c.model_id);
  if (j.contains("temperatures")) {
    const auto& t = j["temperatures"];
    c.tier1_temperature = t.value("tier1", c.tier1_temperature);
    c.tier2_temperature = t.value("tier2", c.tier2_temperature);
    c.tier3_critic_temperature = t.value("tier3_critic", c.tier3_critic_temperature);
    c.tier3_inquiry_temperature = t.value("tier3_inquiry", c.tier3_inquiry_temperature);
    c.arbitration_temperature = t.value("arbitration", c.arbitration_temperature);
  }
  c.max_parse_retries = j.value("max_parse_retries", c.max_parse_retries);
  c.concurrent_calls = j.value("concurrent_calls", c.concurrent_calls);
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
    c.max_output_tokens = j["max_output_tokens"].get<int>();
  }
  if (j.contains("prompt_defaults")) {
    const auto& p = j["prompt_defaults"];
    c.default_medical_field = p.value("medical_field", c.default_medical_field);
    c.default_imaging_modalities = p.value("imaging_modalities", c.default_imaging_modalities);
    c.default_imaging_type = p.value("imaging_type", c.default_imaging_type);
  }
  for (double t : {c.tier1_temperature, c.tier2_temperature, c.tier3_critic_temperature, c.tier3_inquiry_temperature,
                   c.arbitration_temperature}) {
    if (t < 0.0 || t > 2.0) throw Error(ErrorCode::ConfigError, "temperatures must lie in [0,2]");
  }
  if (c.max_parse_retries < 0) throw Error(ErrorCode::ConfigError, "max_parse_retries must be >= 0");
  return c;
}

// ---------------------------------------------------------------------------
// Routing

inline RouteDecision route_after_tier1(char h11, char h12) {
  RouteDecision d;
  d.stage = RouteStage::AfterTier1;
  d.divergence = h11 != h12;
  if (d.divergence) {
    d.destination = Destination::Tier3;
    d.candidates = std::pair{h11, h12};
  } else {
    d.destination = Destination::Tier2;
  }
  return d;
}

inline RouteDecision route_after_tier1(const AgentReport& r1, const AgentReport& r2) {
  return route_after_tier1(r1.hypothesis, r2.hypothesis);
}

inline RouteDecision route_after_tier2(char h1, char h2) {
  RouteDecision d;
  d.stage = RouteStage::AfterTier2;
  d.divergence = h1 != h2;
  if (d.divergence) {
    d.destination = Destination::Tier3;
    d.candidates = std::pair{h1, h2};
  } else {
    d.destination = Destination::Terminate;
  }
  return d;
}

inline RouteDecision route_after_tier2(char h1, const AgentReport& supervisor) {
  return route_after_tier2(h1, supervisor.hypothesis);
}

struct Tier3Outcome {
  Verdict verdict;
  std::vector<RiskReport> risks;
  std::vector<Inquiry> inquiries;
  std::vector<InquiryResponse> responses;
};

struct CaseResult {
  Verdict verdict;
  Transcript transcript;
  UsageLedger ledger;
};

// ---------------------------------------------------------------------------

/// Runs one case against one backend, accumulating a transcript. The tier
/// steps are public so they can be driven and tested individually; run()
/// drives the whole protocol.
class Deliberation {
 public:
  Deliberation(MedicalCase c, const EngineConfig& config, Backend& backend, int trial = 1)
      : case_(std::move(c)), config_(config), backend_(backend), trial_(trial) {
    validate_case(case_);
    if (case_.image) image_ = std::make_shared<const Image>(*case_.image);
    transcript_.case_id = case_.case_id;
    transcript_.trial = trial_;
    transcript_.gold_answer = case_.gold_answer;
  }

  std::pair<AgentReport, AgentReport> tier1_diagnose() {
    const std::string prompt = render(TemplateKind::Tier1, base_bindings());
    auto [r1, r2] = run_pair<AgentReport>([&](int i, Log& log) {
      return diagnose(AgentId::tier1(i), Phase::Diagnose, Grammar::Diagnosis, {user(prompt)}, log);
    });
    return {r1, r2};
  }

  AgentReport tier2_review(const std::pair<AgentReport, AgentReport>& consensus) {
    if (consensus.first.hypothesis != consensus.second.hypothesis) {
      throw Error(ErrorCode::PreconditionViolation, "tier-2 review needs a tier-1 consensus, got " +
                                                        std::string(1, consensus.first.hypothesis) + " vs " +
                                                        std::string(1, consensus.second.hypothesis));
    }
    auto b = base_bindings();
    b["TIER 1 REPORT"] = "Expert 1: " + consensus.first.raw_text + "\nExpert 2: " + consensus.second.raw_text;
    const std::string prompt = render(TemplateKind::Tier2, b);
    Log log;
    auto guard = merge_on_exit(log);
    return diagnose(AgentId::supervisor(), Phase::Review, Grammar::Review, {user(prompt)}, log);
  }

  Tier3Outcome tier3_audit(std::pair<char, char> candidates, const std::vector<AgentReport>& prior_reports) {
    const auto [ha, hb] = candidates;
    if (ha == hb) throw Error(ErrorCode::PreconditionViolation, "tier-3 candidates must differ");
    if (!case_.has_option(ha) || !case_.has_option(hb)) {
      throw Error(ErrorCode::PreconditionViolation, "tier-3 candidates must be case options");
    }
    const std::array<char, 2> targets = {ha, hb};
    auto b = base_bindings();
    b["AGGREGATED REPORT"] = aggregated_report(prior_reports);

    // Step 1: one risk report per candidate.
    std::array<std::string, 2> critic_prompts;
    for (int i = 0; i < 2; ++i) {
      auto bi = b;
      bi["OPTION"] = std::string(1, targets[i]);
      critic_prompts[i] = render(TemplateKind::Critic, bi);
    }
    auto [risk1, risk2] = run_pair<RiskReport>([&](int i, Log& log) {
      const char target = targets[i - 1];
      auto [parsed, raw] = call_with_retries<CritiqueReport>(
          AgentId::critic(i), Phase::RiskReport, Grammar::Critique, {user(critic_prompts[i - 1])}, log,
          ErrorCode::ParseExhausted, [&](const std::string& text) {
            auto r = parse_critique(text);
            Json f{{"target", std::string(1, target)}, {"flaws", r.flaws}, {"counter_evidence", r.counter_evidence}};
            return std::pair{r, f};
          });
      return RiskReport{i, target, parsed.flaws, parsed.counter_evidence, raw};
    });
    const std::array<RiskReport, 2> risks = {risk1, risk2};

    // Step 2: one leader call, one question per critic.
    b["RISK REPORT"] = "Expert 1 who reviews " + std::string(1, ha) + ": " + risk1.raw_text + "\nExpert 2 who reviews " +
                       std::string(1, hb) + ": " + risk2.raw_text;
    const std::string inquiry_prompt = render(TemplateKind::LeaderInquiry, b);
    std::vector<Inquiry> inquiries;
    std::string inquiry_raw;
    {
      Log log;
      auto guard = merge_on_exit(log);
      auto [parsed, raw] = call_with_retries<std::vector<ParsedInquiry>>(
          AgentId::leader(), Phase::Inquiry, Grammar::Inquiries, {user(inquiry_prompt)}, log,
          ErrorCode::InquiryMismatch, [&](const std::string& text) {
            auto qs = parse_inquiries(text);
            Json arr = Json::array();
            for (const auto& q : qs) {
              if (q.reviewed_option != targets[q.expert - 1]) {
                throw Error(ErrorCode::InquiryMismatch,
                            "Expert " + std::to_string(q.expert) + " reviews " + std::string(1, targets[q.expert - 1]) +
                                ", inquiry names " + std::string(1, q.reviewed_option));
              }
              arr.push_back(Json{{"expert", q.expert},
                                 {"reviewed_option", std::string(1, q.reviewed_option)},
                                 {"question", q.question}});
            }
            return std::pair{qs, Json{{"inquiries", arr}}};
          });
      inquiry_raw = raw;
      for (const auto& q : parsed) {
        inquiries.push_back(Inquiry{q.expert, q.reviewed_option, q.question});
        log.push_back(InquiryEvent{inquiries.back()});
      }
    }

    // Step 3: each critic answers its one question, stance unchanged.
    auto [resp1, resp2] = run_pair<InquiryResponse>([&](int i, Log& log) {
      const char target = targets[i - 1];
      std::vector<ChatMessage> msgs = {user(critic_prompts[i - 1]), assistant(risks[i - 1].raw_text)};
      Bindings rb{{"INQUIRY", inquiries[i - 1].question}};
      msgs.push_back(user(render(TemplateKind::CriticResponse, rb), false));
      auto [text, raw] = call_with_retries<std::string>(
          AgentId::critic(i), Phase::InquiryResponse, std::nullopt, msgs, log, ErrorCode::ParseExhausted,
          [&](const std::string& t) {
            std::string trimmed = detail::trim(t);
            if (trimmed.empty()) throw Error(ErrorCode::EmptyResponse, "empty inquiry response");
            return std::pair{trimmed, Json{{"target", std::string(1, target)}, {"response", trimmed}}};
          });
      return InquiryResponse{i, text};
    });

    // Step 4: arbitration continues the leader's conversation.
    std::vector<ChatMessage> msgs = {user(inquiry_prompt), assistant(inquiry_raw)};
    Bindings vb{{"RESPONSE", "Expert 1 who reviews " + std::string(1, ha) + ": " + resp1.response +
                                 "\nExpert 2 who reviews " + std::string(1, hb) + ": " + resp2.response}};
    msgs.push_back(user(render(TemplateKind::LeaderVerdict, vb), false));
    Log log;
    auto guard = merge_on_exit(log);
    auto [final_report, raw] = call_with_retries<FinalReport>(
        AgentId::leader(), Phase::Arbitration, Grammar::Verdict, msgs, log, ErrorCode::ParseExhausted,
        [&](const std::string& text) {
          auto r = parse_final(text);
          require_option(r.answer);
          return std::pair{r, Json{{"answer", std::string(1, r.answer)}, {"reasoning", r.reasoning}}};
        });

    Tier3Outcome out;
    out.verdict.answer = final_report.answer;
    out.verdict.final_reasoning = final_report.reasoning;
    out.verdict.chose_outside_candidates = final_report.answer != ha && final_report.answer != hb;
    out.verdict.route_taken = Route::T1_T3;
    out.risks = {risk1, risk2};
    out.inquiries = inquiries;
    out.responses = {resp1, resp2};
    return out;
  }

  /// Full protocol. On failure the transcript ends with a FailureEvent and
  /// the error is rethrown.
  Verdict run() {
    try {
      Verdict v = run_protocol();
      transcript_.append(VerdictEvent{v});
      return v;
    } catch (const Error& e) {
      transcript_.append(FailureEvent{e.code(), e.what()});
      throw;
    } catch (const std::exception& e) {
      transcript_.append(FailureEvent{ErrorCode::ContractViolation, e.what()});
      throw Error(ErrorCode::ContractViolation, e.what());
    }
  }

  const Transcript& transcript() const { return transcript_; }
  Transcript take_transcript() { return std::move(transcript_); }
  const MedicalCase& medical_case() const { return case_; }

 private:
  using Log = std::vector<EventBody>;

  // Appends a local log to the transcript when the scope ends, including
  // during unwinding, so failed calls still show up.
  struct LogMerger {
    Transcript& t;
    Log& log;
    ~LogMerger() {
      for (auto& e : log) t.append(std::move(e));
      log.clear();
    }
  };
  LogMerger merge_on_exit(Log& log) { return LogMerger{transcript_, log}; }

  Verdict run_protocol() {
    auto [r1, r2] = tier1_diagnose();
    const RouteDecision first = route_after_tier1(r1, r2);
    transcript_.append(RoutingEvent{first});
    if (first.destination == Destination::Tier3) {
      Tier3Outcome t3 = tier3_audit(*first.candidates, {r1, r2});
      t3.verdict.route_taken = Route::T1_T3;
      return t3.verdict;
    }
    AgentReport sup = tier2_review({r1, r2});
    const RouteDecision second = route_after_tier2(r1.hypothesis, sup);
    transcript_.append(RoutingEvent{second});
    if (second.destination == Destination::Terminate) {
      return Verdict{r1.hypothesis, sup.reasoning, Route::T1_T2, false};
    }
    Tier3Outcome t3 = tier3_audit(*second.candidates, {r1, r2, sup});
    t3.verdict.route_taken = Route::T1_T2_T3;
    return t3.verdict;
  }

  Bindings base_bindings() const {
    return Bindings{
        {"MEDICAL CASE", format_medical_case(case_)},
        {"MEDICAL FIELD", case_.field_hint.value_or(config_.default_medical_field)},
        {"IMAGING MODALITIES", case_.imaging_modalities.value_or(config_.default_imaging_modalities)},
        {"IMAGING TYPE", case_.imaging_type.value_or(config_.default_imaging_type)},
    };
  }

  std::string render(TemplateKind kind, const Bindings& b) const { return ucagents::render(config_.templates->get(kind), b); }

  // Every prompt carrying the case itself also carries the image.
  ChatMessage user(std::string text, bool with_image = true) const {
    return ChatMessage{MessageRole::User, std::move(text), with_image ? image_ : nullptr};
  }
  static ChatMessage assistant(std::string text) { return ChatMessage{MessageRole::Assistant, std::move(text), nullptr}; }

  static std::string aggregated_report(const std::vector<AgentReport>& reports) {
    std::string out;
    for (const auto& r : reports) {
      if (!out.empty()) out += '\n';
      switch (r.agent.role) {
        case Role::Tier1Expert: out += "Tier-1 Expert " + std::to_string(r.agent.index) + ": "; break;
        case Role::Tier2Supervisor: out += "Tier-2 Supervisor: "; break;
        default: out += r.agent.name() + ": "; break;
      }
      out += r.raw_text;
    }
    return out;
  }

  void require_option(char letter) const {
    if (!case_.has_option(letter)) {
      throw Error(ErrorCode::AnswerNotAnOption, std::string(1, letter) + " is not an option of this case");
    }
  }

  AgentReport diagnose(AgentId agent, Phase phase, Grammar grammar, std::vector<ChatMessage> msgs, Log& log) {
    auto [parsed, raw] = call_with_retries<DiagnosisReport>(
        agent, phase, grammar, std::move(msgs), log, ErrorCode::ParseExhausted, [&](const std::string& text) {
          auto r = parse_diagnosis(text, grammar);
          require_option(r.answer);
          return std::pair{r, Json{{"answer", std::string(1, r.answer)}, {"reasoning", r.reasoning}}};
        });
    return AgentReport{agent, parsed.answer, parsed.reasoning, config_.temperature_for(phase), raw};
  }

  // One logical agent step: generate, parse, and on a parse failure
  // regenerate with the corrective instruction, up to max_parse_retries.
  template <class T, class ParseFn>
  std::pair<T, std::string> call_with_retries(AgentId agent, Phase phase, std::optional<Grammar> grammar,
                                              std::vector<ChatMessage> base, Log& log, ErrorCode exhausted,
                                              ParseFn&& parse) {
    std::vector<ChatMessage> msgs = base;
    std::string last_error;
    const int attempts = 1 + config_.max_parse_retries;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
      ChatRequest req;
      req.messages = msgs;
      req.temperature = config_.temperature_for(phase);
      req.max_output_tokens = config_.max_output_tokens;
      req.model_id = config_.model_id;
      req.context = CallContext{case_.case_id, agent.name(), trial_};
      const auto started = std::chrono::steady_clock::now();
      ChatResponse resp = backend_.complete(req);
      const std::chrono::duration<double, std::milli> wall = std::chrono::steady_clock::now() - started;
      log.push_back(ModelCallEvent{agent, phase, attempt, req.temperature, digest(req), resp.text, resp.usage,
                                   wall.count()});
      try {
        auto [value, fields] = parse(resp.text);
        log.push_back(ParseOutcomeEvent{agent, phase, attempt, true, std::nullopt, {}, std::move(fields)});
        return {std::move(value), resp.text};
      } catch (const Error& e) {
        last_error = e.what();
        log.push_back(ParseOutcomeEvent{agent, phase, attempt, false, e.code(), e.what(), Json::object()});
        msgs = base;
        msgs.push_back(assistant(resp.text));
        msgs.push_back(user(grammar ? corrective_instruction(*grammar)
                                    : std::string("Your previous output was empty. Answer the question in 1-3 "
                                                  "sentences."),
                            false));
      }
    }
    throw Error(exhausted, agent.name() + " " + std::string(to_string(phase)) + " failed after " +
                               std::to_string(attempts) + " attempts; last: " + last_error);
  }

  // Runs fn(1, log1) and fn(2, log2), concurrently when configured. Logs are
  // merged in agent order regardless of completion order.
  template <class T, class Fn>
  std::pair<T, T> run_pair(Fn&& fn) {
    Log log1, log2;
    std::optional<T> v1, v2;
    std::exception_ptr err1, err2;
    auto run_one = [&](int i, Log& log, std::optional<T>& out, std::exception_ptr& err) {
      try {
        out = fn(i, log);
      } catch (...) {
        err = std::current_exception();
      }
    };
    if (config_.concurrent_calls) {
      auto second = std::async(std::launch::async, [&] { run_one(2, log2, v2, err2); });
      run_one(1, log1, v1, err1);
      second.get();
    } else {
      run_one(1, log1, v1, err1);
      if (!err1) run_one(2, log2, v2, err2);
    }
    for (auto* log : {&log1, &log2}) {
      for (auto& e : *log) transcript_.append(std::move(e));
    }
    if (err1) std::rethrow_exception(err1);
    if (err2) std::rethrow_exception(err2);
    return {std::move(*v1), std::move(*v2)};
  }

  MedicalCase case_;
  EngineConfig config_;
  Backend& backend_;
  int trial_ = 1;
  std::shared_ptr<const Image> image_;
  Transcript transcript_;
};

inline CaseResult run_case(const MedicalCase& c, const EngineConfig& config, Backend& backend) {
  Deliberation d(c, config, backend);
  Verdict v = d.run();
  Transcript t = d.take_transcript();
  UsageLedger ledger = ledger_from_transcript(t);
  return CaseResult{v, std::move(t), std::move(ledger)};
}

// ---------------------------------------------------------------------------
// Protocol-level checks over a finished transcript

inline std::vector<std::string> route_decision_violations(const RouteDecision& d) {
  std::vector<std::string> out;
  if (d.stage == RouteStage::AfterTier1) {
    if (d.divergence && (d.destination != Destination::Tier3 || !d.candidates)) {
      out.push_back("divergent tier-1 must go to tier-3 with candidates");
    }
    if (!d.divergence && (d.destination != Destination::Tier2 || d.candidates)) {
      out.push_back("tier-1 consensus must go to tier-2 without candidates");
    }
    if (d.candidates && d.candidates->first == d.candidates->second) out.push_back("tier-3 candidates must differ");
  } else {
    if (d.destination == Destination::Tier2) out.push_back("after tier-2 cannot route to tier-2");
    if (d.divergence != (d.destination == Destination::Tier3)) out.push_back("tier-2 divergence/destination mismatch");
    if ((d.destination == Destination::Tier3) != d.candidates.has_value()) {
      out.push_back("tier-3 escalation needs candidates");
    }
  }
  return out;
}

/// Everything the protocol promises about a transcript: call counts per
/// route, one inquiry per critic, stance immutability, the temperature
/// schedule, and information isolation between seats.
inline std::vector<std::string> protocol_violations(const Transcript& t, const EngineConfig& config) {
  std::vector<std::string> out = structural_violations(t);
  const auto verdict = t.verdict();

  int first_attempts = 0;
  for (const auto* call : t.all<ModelCallEvent>()) {
    if (call->attempt == 1) ++first_attempts;
    if (call->temperature != config.temperature_for(call->phase) ||
        call->request.temperature != call->temperature) {
      out.push_back(call->agent.name() + " " + std::string(to_string(call->phase)) + " ran at T=" +
                    std::to_string(call->temperature));
    }
  }
  if (verdict && first_attempts != expected_call_count(verdict->route_taken)) {
    out.push_back("route " + std::string(to_string(verdict->route_taken)) + " made " + std::to_string(first_attempts) +
                  " model calls, expected " + std::to_string(expected_call_count(verdict->route_taken)));
  }

  // One inquiry per critic, only in tier-3.
  std::map<int, int> inquiries_per_critic;
  for (const auto* q : t.all<InquiryEvent>()) ++inquiries_per_critic[q->inquiry.addressed_to];
  for (const auto& [critic, n] : inquiries_per_critic) {
    if (n > 1) out.push_back("critic " + std::to_string(critic) + " was inquired " + std::to_string(n) + " times");
  }
  if (verdict && verdict->route_taken == Route::T1_T2 && !inquiries_per_critic.empty()) {
    out.push_back("inquiry outside tier-3");
  }

  // Stance immutability.
  std::map<std::string, std::set<std::string>> stances;
  for (const auto* p : t.all<ParseOutcomeEvent>()) {
    if (!p->ok) continue;
    if (p->fields.contains("answer")) stances[p->agent.name()].insert(p->fields["answer"].get<std::string>());
    if (p->fields.contains("target")) stances[p->agent.name() + ".target"].insert(p->fields["target"].get<std::string>());
  }
  for (const auto& [agent, letters] : stances) {
    if (letters.size() > 1) out.push_back(agent + " changed stance");
  }

  // Routing decisions and verdict consistency.
  std::optional<char> tier1_consensus;
  for (const auto* r : t.all<RoutingEvent>()) {
    for (auto& v : route_decision_violations(r->decision)) out.push_back(std::move(v));
  }
  {
    std::set<std::string> tier1_letters;
    for (const auto* p : t.all<ParseOutcomeEvent>()) {
      if (p->ok && p->agent.role == Role::Tier1Expert) tier1_letters.insert(p->fields["answer"].get<std::string>());
    }
    if (tier1_letters.size() == 1) tier1_consensus = tier1_letters.begin()->at(0);
  }
  if (verdict) {
    if (verdict->route_taken == Route::T1_T2 && (!tier1_consensus || *tier1_consensus != verdict->answer)) {
      out.push_back("T1_T2 verdict differs from tier-1 consensus");
    }
    if (verdict->route_taken == Route::T1_T2 && verdict->chose_outside_candidates) {
      out.push_back("outside-candidate verdict on a non tier-3 route");
    }
  }

  // Information isolation on the recorded prompts.
  std::map<std::string, std::string> accepted;  // agent.phase -> accepted response
  for (std::size_t i = 0; i + 1 < t.events.size(); ++i) {
    const auto* call = std::get_if<ModelCallEvent>(&t.events[i].body);
    const auto* parsed = std::get_if<ParseOutcomeEvent>(&t.events[i + 1].body);
    if (call && parsed && parsed->ok) {
      accepted[call->agent.name() + "." + std::string(to_string(call->phase))] = call->response;
    }
  }
  for (const auto* call : t.all<ModelCallEvent>()) {
    if (call->request.messages.empty()) continue;
    const std::string& prompt = call->request.messages.front().text;
    auto contains = [&](const std::string& key) {
      auto it = accepted.find(key);
      return it != accepted.end() && !it->second.empty() && prompt.find(it->second) != std::string::npos;
    };
    if (call->phase == Phase::Diagnose) {
      const std::string other = "tier1_expert_" + std::to_string(3 - call->agent.index) + ".diagnose";
      if (contains(other)) out.push_back(call->agent.name() + " saw the other tier-1 report");
    } else if (call->phase == Phase::Review) {
      if (!contains("tier1_expert_1.diagnose") || !contains("tier1_expert_2.diagnose")) {
        out.push_back("tier-2 prompt lacks a tier-1 report");
      }
    } else if (call->phase == Phase::RiskReport) {
      const std::string other = "critic_" + std::to_string(3 - call->agent.index) + ".risk_report";
      if (contains(other)) out.push_back(call->agent.name() + " saw the other critic's report");
    }
  }
  return out;
}

}  // namespace ucagents
