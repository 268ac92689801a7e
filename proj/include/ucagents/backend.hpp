// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ucagents/case.hpp"
#include "ucagents/error.hpp"

namespace ucagents {

using Json = nlohmann::json;

enum class MessageRole { System, User, Assistant };

constexpr std::string_view to_string(MessageRole r) {
  switch (r) {
    case MessageRole::System: return "system";
    case MessageRole::User: return "user";
    case MessageRole::Assistant: return "assistant";
  }
  return "user";
}

inline MessageRole message_role_from_string(std::string_view s) {
  if (s == "system") return MessageRole::System;
  if (s == "user") return MessageRole::User;
  if (s == "assistant") return MessageRole::Assistant;
  throw Error(ErrorCode::ContractViolation, "unknown message role: " + std::string(s));
}

struct ChatMessage {
  MessageRole role = MessageRole::User;
  std::string text;
  std::shared_ptr<const Image> image;  // user messages only
};

/// Who is asking. Not sent over the wire; used by scripted and replay
/// backends to key their per-agent call streams.
struct CallContext {
  std::string case_id;
  std::string agent;
  int trial = 1;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  std::optional<int> max_output_tokens;
  std::string model_id;
  CallContext context;
};

inline void validate_request(const ChatRequest& req) {
  if (req.messages.empty()) throw Error(ErrorCode::PreconditionViolation, "chat request has no messages");
  for (const auto& m : req.messages) {
    if (m.image && m.role != MessageRole::User) {
      throw Error(ErrorCode::PreconditionViolation, "image parts are only allowed in user messages");
    }
  }
  if (req.temperature < 0.0 || req.temperature > 2.0) {
    throw Error(ErrorCode::PreconditionViolation, "temperature out of [0,2]");
  }
}

struct Usage {
  std::uint64_t input_tokens = 0;
  std::uint64_t output_tokens = 0;
  bool estimated = false;
  bool operator==(const Usage&) const = default;
};

struct ChatResponse {
  std::string text;
  Usage usage;
  std::chrono::duration<double, std::milli> latency{0};
};

/// ceil(characters / 4); the fallback when a server omits usage.
inline std::uint64_t estimate_tokens(std::string_view text) { return (text.size() + 3) / 4; }

inline Usage estimate_usage(const ChatRequest& req, std::string_view response) {
  std::uint64_t in = 0;
  for (const auto& m : req.messages) in += estimate_tokens(m.text);
  return Usage{in, estimate_tokens(response), true};
}

/// What a transcript or recording keeps of a request: full prompt text and
/// the image size, never the image bytes.
struct RequestDigest {
  struct Message {
    MessageRole role = MessageRole::User;
    std::string text;
    std::uint64_t image_bytes = 0;
    std::string media_type;
    bool operator==(const Message&) const = default;
  };
  std::string model_id;
  double temperature = 0.0;
  std::optional<int> max_output_tokens;
  std::vector<Message> messages;
  bool operator==(const RequestDigest&) const = default;
};

inline RequestDigest digest(const ChatRequest& req) {
  RequestDigest d;
  d.model_id = req.model_id;
  d.temperature = req.temperature;
  d.max_output_tokens = req.max_output_tokens;
  for (const auto& m : req.messages) {
    RequestDigest::Message dm{m.role, m.text, 0, ""};
    if (m.image) {
      dm.image_bytes = m.image->bytes.size();
      dm.media_type = m.image->media_type;
    }
    d.messages.push_back(std::move(dm));
  }
  return d;
}

inline Json to_json(const Usage& u) {
  return Json{{"input_tokens", u.input_tokens}, {"output_tokens", u.output_tokens}, {"estimated", u.estimated}};
}

inline Usage usage_from_json(const Json& j) {
  return Usage{j.at("input_tokens").get<std::uint64_t>(), j.at("output_tokens").get<std::uint64_t>(),
               j.value("estimated", false)};
}

inline Json to_json(const RequestDigest& d) {
  Json msgs = Json::array();
  for (const auto& m : d.messages) {
    Json jm{{"role", to_string(m.role)}, {"text", m.text}};
    if (m.image_bytes > 0) {
      jm["image_bytes"] = m.image_bytes;
      jm["media_type"] = m.media_type;
    }
    msgs.push_back(std::move(jm));
  }
  Json j{{"model", d.model_id}, {"temperature", d.temperature}, {"messages", std::move(msgs)}};
  j["max_output_tokens"] = d.max_output_tokens ? Json(*d.max_output_tokens) : Json(nullptr);
  return j;
}

inline RequestDigest digest_from_json(const Json& j) {
  RequestDigest d;
  d.model_id = j.at("model").get<std::string>();
  d.temperature = j.at("temperature").get<double>();
  if (j.contains("max_output_tokens") && !j["max_output_tokens"].is_null()) {
    d.max_output_tokens = j["max_output_tokens"].get<int>();
  }
  for (const auto& jm : j.at("messages")) {
    RequestDigest::Message m;
    m.role = message_role_from_string(jm.at("role").get<std::string>());
    m.text = jm.at("text").get<std::string>();
    m.image_bytes = jm.value("image_bytes", std::uint64_t{0});
    m.media_type = jm.value("media_type", std::string{});
    d.messages.push_back(std::move(m));
  }
  return d;
}

/// Chat-completion backend. Implementations must tolerate concurrent
/// complete() calls.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual ChatResponse complete(const ChatRequest& request) = 0;
};

namespace detail {

// Per (case, agent) call counters; keeps scripted and replayed streams
// deterministic when independent calls run concurrently.
class StreamCounter {
 public:
  int next(const CallContext& ctx) { return ++counts_[{ctx.case_id, ctx.agent, ctx.trial}]; }

 private:
  std::map<std::tuple<std::string, std::string, int>, int> counts_;
};

inline std::string all_text(const ChatRequest& req) {
  std::string out;
  for (const auto& m : req.messages) {
    out += m.text;
    out += '\n';
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scripted backend

struct ScriptEntry {
  enum class Match { ByRoleSequence, ByPromptSubstring };
  Match match = Match::ByRoleSequence;
  std::string agent;    // ByRoleSequence
  int position = 1;     // 1-based call index within the agent's stream
  std::string pattern;  // ByPromptSubstring
  std::string response_text;
  std::optional<Usage> synthetic_usage;
  std::string case_id;  // empty matches every case

  bool applies_to(const CallContext& ctx) const { return case_id.empty() || case_id == ctx.case_id; }

  static ScriptEntry by_role(std::string agent, int position, std::string text,
                             std::optional<Usage> usage = std::nullopt) {
    return ScriptEntry{Match::ByRoleSequence, std::move(agent), position, {}, std::move(text), usage, {}};
  }
  static ScriptEntry by_substring(std::string pattern, std::string text, std::optional<Usage> usage = std::nullopt) {
    return ScriptEntry{Match::ByPromptSubstring, {}, 0, std::move(pattern), std::move(text), usage, {}};
  }
};

/// Answers from a fixed script. Role-sequence entries are tried first, then
/// substring entries in declaration order; case-specific entries win over
/// generic ones within each kind. Unmatched requests are errors.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend() = default;
  explicit ScriptedBackend(std::vector<ScriptEntry> entries) : entries_(std::move(entries)) {}

  void add(ScriptEntry e) {
    std::lock_guard lock(mu_);
    entries_.push_back(std::move(e));
  }

  ChatResponse complete(const ChatRequest& request) override {
    validate_request(request);
    std::optional<ScriptEntry> hit;
    int position = 0;
    {
      std::lock_guard lock(mu_);
      position = counter_.next(request.context);
      auto find = [&](auto&& pred) {
        for (bool specific : {true, false}) {
          for (const auto& e : entries_) {
            if (e.case_id.empty() != specific && e.applies_to(request.context) && pred(e)) return std::optional(e);
          }
        }
        return std::optional<ScriptEntry>{};
      };
      hit = find([&](const ScriptEntry& e) {
        return e.match == ScriptEntry::Match::ByRoleSequence && e.agent == request.context.agent &&
               e.position == position;
      });
      if (!hit) {
        const std::string text = detail::all_text(request);
        hit = find([&](const ScriptEntry& e) {
          return e.match == ScriptEntry::Match::ByPromptSubstring && text.find(e.pattern) != std::string::npos;
        });
      }
    }
    if (!hit) {
      throw Error(ErrorCode::ScriptUnmatched, "no script entry for agent '" + request.context.agent + "' call " +
                                                  std::to_string(position) + " of case '" + request.context.case_id +
                                                  "'");
    }
    ChatResponse resp;
    resp.text = hit->response_text;
    resp.usage = hit->synthetic_usage ? *hit->synthetic_usage : estimate_usage(request, resp.text);
    return resp;
  }

  static std::unique_ptr<ScriptedBackend> from_json(const Json& j) {
    std::vector<ScriptEntry> entries;
    for (const auto& je : j.at("entries")) {
      std::optional<Usage> usage;
      if (je.contains("usage")) {
        const auto& u = je["usage"];
        usage = Usage{u.at(0).get<std::uint64_t>(), u.at(1).get<std::uint64_t>(), false};
      }
      if (je.contains("agent")) {
        entries.push_back(ScriptEntry::by_role(je["agent"].get<std::string>(), je.value("position", 1),
                                               je.at("response").get<std::string>(), usage));
      } else if (je.contains("contains")) {
        entries.push_back(ScriptEntry::by_substring(je["contains"].get<std::string>(),
                                                    je.at("response").get<std::string>(), usage));
      } else {
        throw Error(ErrorCode::ConfigError, "script entry needs \"agent\" or \"contains\"");
      }
      entries.back().case_id = je.value("case_id", std::string{});
    }
    return std::make_unique<ScriptedBackend>(std::move(entries));
  }

 private:
  std::mutex mu_;
  std::vector<ScriptEntry> entries_;
  detail::StreamCounter counter_;
};

/// Delegates to a callable; the callable must be thread-safe.
class CallbackBackend : public Backend {
 public:
  using Fn = std::function<ChatResponse(const ChatRequest&)>;
  explicit CallbackBackend(Fn fn) : fn_(std::move(fn)) {}

  ChatResponse complete(const ChatRequest& request) override {
    validate_request(request);
    return fn_(request);
  }

 private:
  Fn fn_;
};

// ---------------------------------------------------------------------------
// Record / replay

struct RecordedCall {
  std::string case_id;
  std::string agent;
  int ordinal = 1;
  RequestDigest request;
  std::string response;
  Usage usage;
  int trial = 1;
};

/// One session: ordered (request digest, response, usage) triples plus free
/// form session metadata (the harness stores the case and engine config).
struct Recording {
  static constexpr int kSchemaVersion = 1;
  Json session = Json::object();
  std::vector<RecordedCall> calls;

  Json to_json() const {
    Json jc = Json::array();
    for (const auto& c : calls) {
      jc.push_back(Json{{"case_id", c.case_id},
                        {"agent", c.agent},
                        {"trial", c.trial},
                        {"ordinal", c.ordinal},
                        {"request", ucagents::to_json(c.request)},
                        {"response", c.response},
                        {"usage", ucagents::to_json(c.usage)}});
    }
    return Json{{"schema_version", kSchemaVersion}, {"session", session}, {"calls", std::move(jc)}};
  }

  static Recording from_json(const Json& j) {
    if (j.value("schema_version", 0) != kSchemaVersion) {
      throw Error(ErrorCode::ContractViolation, "unsupported recording schema_version");
    }
    Recording r;
    r.session = j.value("session", Json::object());
    for (const auto& jc : j.at("calls")) {
      r.calls.push_back(RecordedCall{jc.at("case_id").get<std::string>(), jc.at("agent").get<std::string>(),
                                     jc.at("ordinal").get<int>(), digest_from_json(jc.at("request")),
                                     jc.at("response").get<std::string>(), usage_from_json(jc.at("usage")),
                                     jc.value("trial", 1)});
    }
    return r;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::OutputUnwritable, path.string());
    out << to_json().dump(2) << '\n';
  }

  static Recording load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read recording " + path.string());
    try {
      return from_json(Json::parse(in));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ContractViolation, path.string() + ": " + e.what());
    }
  }
};

/// Passes every request to `inner` and records the exchange.
class RecordingBackend : public Backend {
 public:
  explicit RecordingBackend(Backend& inner) : inner_(inner) {}

  ChatResponse complete(const ChatRequest& request) override {
    ChatResponse resp = inner_.complete(request);
    std::lock_guard lock(mu_);
    const int ordinal = counter_.next(request.context);
    recording_.calls.push_back(
        RecordedCall{request.context.case_id, request.context.agent, ordinal, digest(request), resp.text, resp.usage,
                     request.context.trial});
    return resp;
  }

  Recording recording() const {
    std::lock_guard lock(mu_);
    return recording_;
  }

  /// Calls recorded for one case and trial, for per-case session files.
  Recording take_case(const std::string& case_id, int trial = 1) {
    std::lock_guard lock(mu_);
    Recording out;
    std::vector<RecordedCall> rest;
    for (auto& c : recording_.calls) {
      (c.case_id == case_id && c.trial == trial ? out.calls : rest).push_back(std::move(c));
    }
    recording_.calls = std::move(rest);
    return out;
  }

 private:
  Backend& inner_;
  mutable std::mutex mu_;
  Recording recording_;
  detail::StreamCounter counter_;
};

/// Serves a recording back. The k-th request of each (case, agent) stream
/// must carry exactly the digest recorded at that position.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(Recording recording) : recording_(std::move(recording)) {}

  ChatResponse complete(const ChatRequest& request) override {
    validate_request(request);
    std::lock_guard lock(mu_);
    const int ordinal = counter_.next(request.context);
    const RecordedCall* hit = nullptr;
    for (const auto& c : recording_.calls) {
      if (c.case_id == request.context.case_id && c.agent == request.context.agent &&
          c.trial == request.context.trial && c.ordinal == ordinal) {
        hit = &c;
        break;
      }
    }
    const std::string where = "agent '" + request.context.agent + "' call " + std::to_string(ordinal) +
                              " of case '" + request.context.case_id + "'";
    if (!hit) throw Error(ErrorCode::ReplayDivergence, "no recorded response for " + where);
    if (!(hit->request == digest(request))) {
      throw Error(ErrorCode::ReplayDivergence, "prompt digest differs from recording at " + where);
    }
    ++served_;
    return ChatResponse{hit->response, hit->usage, {}};
  }

  std::size_t served() const {
    std::lock_guard lock(mu_);
    return served_;
  }

 private:
  mutable std::mutex mu_;
  Recording recording_;
  detail::StreamCounter counter_;
  std::size_t served_ = 0;
};

}  // namespace ucagents
