// SPDX-License-Identifier: Apache-2.0
#pragma once

// OpenAI-compatible chat-completions client. Works against hosted APIs and
// local servers (Ollama, vLLM, llama.cpp) that expose /chat/completions.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <semaphore>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "httplib.h"
#include "ucagents/backend.hpp"
#include "ucagents/error.hpp"

namespace ucagents {

struct HttpBackendConfig {
  std::string base_url = "http://localhost:11434/v1";
  std::string model_id;  // used when a request leaves model_id empty
  std::string api_key_env = "UCA_API_KEY";
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  std::chrono::milliseconds backoff_initial{500};
  std::chrono::milliseconds backoff_max{30'000};
  int max_in_flight = 8;
};

struct HttpResult {
  bool transport_ok = false;
  int status = 0;
  std::string body;
  std::string error;
};

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;
using HttpTransport = std::function<HttpResult(const std::string& base, const std::string& path,
                                               const HttpHeaders& headers, const std::string& body,
                                               std::chrono::milliseconds timeout)>;
using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline std::string base64_encode(const std::vector<std::uint8_t>& in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{in[i]} << 16) | (std::uint32_t{in[i + 1]} << 8) | in[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (i + 1 == in.size()) {
    const std::uint32_t v = std::uint32_t{in[i]} << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const std::uint32_t v = (std::uint32_t{in[i]} << 16) | (std::uint32_t{in[i + 1]} << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

/// Request body in chat-completions shape; images travel as data-URL parts.
inline Json build_wire_request(const ChatRequest& req, const std::string& fallback_model = {}) {
  Json messages = Json::array();
  for (const auto& m : req.messages) {
    Json jm{{"role", to_string(m.role)}};
    if (m.image) {
      Json parts = Json::array();
      parts.push_back(Json{{"type", "text"}, {"text", m.text}});
      parts.push_back(Json{
          {"type", "image_url"},
          {"image_url", {{"url", "data:" + m.image->media_type + ";base64," + base64_encode(m.image->bytes)}}}});
      jm["content"] = std::move(parts);
    } else {
      jm["content"] = m.text;
    }
    messages.push_back(std::move(jm));
  }
  Json body{{"model", req.model_id.empty() ? fallback_model : req.model_id},
            {"messages", std::move(messages)},
            {"temperature", req.temperature},
            {"stream", false}};
  if (req.max_output_tokens) body["max_tokens"] = *req.max_output_tokens;
  return body;
}

/// Missing usage falls back to the character estimator, flagged estimated.
inline ChatResponse parse_wire_response(const std::string& body, const ChatRequest& req) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ContractViolation, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw Error(ErrorCode::ContractViolation, "response has no choices");
  }
  const Json& msg = j["choices"][0].value("message", Json::object());
  if (!msg.is_object() || !msg.contains("content")) {
    throw Error(ErrorCode::ContractViolation, "choices[0].message.content missing");
  }
  ChatResponse out;
  if (msg["content"].is_string()) {
    out.text = msg["content"].get<std::string>();
  } else if (!msg["content"].is_null()) {
    throw Error(ErrorCode::ContractViolation, "choices[0].message.content is not a string");
  }
  const Json usage = j.value("usage", Json(nullptr));
  if (usage.is_object() && usage.contains("prompt_tokens") && usage.contains("completion_tokens") &&
      usage["prompt_tokens"].is_number_unsigned() && usage["completion_tokens"].is_number_unsigned()) {
    out.usage = Usage{usage["prompt_tokens"].get<std::uint64_t>(), usage["completion_tokens"].get<std::uint64_t>(),
                      false};
  } else {
    out.usage = estimate_usage(req, out.text);
  }
  return out;
}

namespace detail {

// "http://host:port/v1" -> {"http://host:port", "/v1"}
inline std::pair<std::string, std::string> split_base_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::ConfigError, "base_url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, ""};
  std::string path = url.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  return {url.substr(0, slash), path};
}

inline HttpResult httplib_transport(const std::string& base, const std::string& path, const HttpHeaders& headers,
                                    const std::string& body, std::chrono::milliseconds timeout) {
  httplib::Client cli(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  cli.set_connection_timeout(secs.count(), usecs.count());
  cli.set_read_timeout(secs.count(), usecs.count());
  cli.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers h;
  for (const auto& [k, v] : headers) h.emplace(k, v);
  auto res = cli.Post(path, h, body, "application/json");
  if (!res) return HttpResult{false, 0, {}, httplib::to_string(res.error())};
  return HttpResult{true, res->status, res->body, {}};
}

}  // namespace detail

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(HttpBackendConfig config, HttpTransport transport = detail::httplib_transport,
                       Sleeper sleeper = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })
      : config_(std::move(config)),
        transport_(std::move(transport)),
        sleeper_(std::move(sleeper)),
        in_flight_(std::clamp(config_.max_in_flight, 1, 1024)) {
    if (config_.max_retries < 0) throw Error(ErrorCode::ConfigError, "max_retries must be >= 0");
    std::tie(base_, path_) = detail::split_base_url(config_.base_url);
    path_ += "/chat/completions";
  }

  ChatResponse complete(const ChatRequest& request) override {
    validate_request(request);
    const std::string body = build_wire_request(request, config_.model_id).dump();
    HttpHeaders headers;
    if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
      headers.emplace_back("Authorization", std::string("Bearer ") + key);
    }

    std::string last_error;
    auto backoff = config_.backoff_initial;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        sleeper_(backoff);
        backoff = std::min(backoff * 2, config_.backoff_max);
      }
      const auto started = std::chrono::steady_clock::now();
      HttpResult res;
      {
        in_flight_.acquire();
        try {
          res = transport_(base_, path_, headers, body, config_.timeout);
        } catch (...) {
          in_flight_.release();
          throw;
        }
        in_flight_.release();
      }
      if (!res.transport_ok) {
        last_error = "transport: " + res.error;
        continue;
      }
      if (res.status == 429 || res.status >= 500) {
        last_error = "HTTP " + std::to_string(res.status);
        continue;
      }
      if (res.status < 200 || res.status >= 300) {
        throw Error(ErrorCode::BackendUnavailable,
                    "HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 200));
      }
      ChatResponse out = parse_wire_response(res.body, request);
      out.latency = std::chrono::steady_clock::now() - started;
      return out;
    }
    throw Error(ErrorCode::BackendUnavailable, "giving up after " + std::to_string(config_.max_retries + 1) +
                                                   " attempts; last error: " + last_error);
  }

  const HttpBackendConfig& config() const { return config_; }

 private:
  HttpBackendConfig config_;
  HttpTransport transport_;
  Sleeper sleeper_;
  std::counting_semaphore<1024> in_flight_;
  std::string base_;
  std::string path_;
};

}  // namespace ucagents
