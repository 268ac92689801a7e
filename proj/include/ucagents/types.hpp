// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "ucagents/error.hpp"

namespace ucagents {

enum class Role { Tier1Expert, Tier2Supervisor, Critic, Leader, Judge };

/// A fixed seat in the deliberation. `index` is 1 or 2 for the paired
/// roles and 0 otherwise.
struct AgentId {
  Role role = Role::Tier1Expert;
  int index = 0;

  static AgentId tier1(int i) { return {Role::Tier1Expert, i}; }
  static AgentId supervisor() { return {Role::Tier2Supervisor, 0}; }
  static AgentId critic(int i) { return {Role::Critic, i}; }
  static AgentId leader() { return {Role::Leader, 0}; }
  static AgentId judge() { return {Role::Judge, 0}; }

  std::string name() const {
    switch (role) {
      case Role::Tier1Expert: return "tier1_expert_" + std::to_string(index);
      case Role::Tier2Supervisor: return "tier2_supervisor";
      case Role::Critic: return "critic_" + std::to_string(index);
      case Role::Leader: return "leader";
      case Role::Judge: return "judge";
    }
    return "unknown";
  }

  static AgentId parse(std::string_view s) {
    if (s == "tier1_expert_1") return tier1(1);
    if (s == "tier1_expert_2") return tier1(2);
    if (s == "tier2_supervisor") return supervisor();
    if (s == "critic_1") return critic(1);
    if (s == "critic_2") return critic(2);
    if (s == "leader") return leader();
    if (s == "judge") return judge();
    throw Error(ErrorCode::ContractViolation, "unknown agent: " + std::string(s));
  }

  bool operator==(const AgentId&) const = default;
  auto operator<=>(const AgentId&) const = default;
};

enum class Phase { Diagnose, Review, RiskReport, Inquiry, InquiryResponse, Arbitration, Judge };

constexpr std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Diagnose: return "diagnose";
    case Phase::Review: return "review";
    case Phase::RiskReport: return "risk_report";
    case Phase::Inquiry: return "inquiry";
    case Phase::InquiryResponse: return "inquiry_response";
    case Phase::Arbitration: return "arbitration";
    case Phase::Judge: return "judge";
  }
  return "";
}

inline Phase phase_from_string(std::string_view s) {
  for (auto p : {Phase::Diagnose, Phase::Review, Phase::RiskReport, Phase::Inquiry, Phase::InquiryResponse,
                 Phase::Arbitration, Phase::Judge}) {
    if (to_string(p) == s) return p;
  }
  throw Error(ErrorCode::ContractViolation, "unknown phase: " + std::string(s));
}

struct AgentReport {
  AgentId agent;
  char hypothesis = 'A';
  std::string reasoning;
  double temperature = 0.0;
  std::string raw_text;
};

struct RiskReport {
  int critic_index = 1;
  char target_hypothesis = 'A';
  std::string flaws;
  std::string counter_evidence;
  std::string raw_text;
};

struct Inquiry {
  int addressed_to = 1;
  char reviewed_option = 'A';
  std::string question;
  bool operator==(const Inquiry&) const = default;
};

struct InquiryResponse {
  int critic_index = 1;
  std::string response;
};

enum class RouteStage { AfterTier1, AfterTier2 };
enum class Destination { Tier2, Tier3, Terminate };

constexpr std::string_view to_string(RouteStage s) {
  return s == RouteStage::AfterTier1 ? "after_tier1" : "after_tier2";
}

constexpr std::string_view to_string(Destination d) {
  switch (d) {
    case Destination::Tier2: return "tier2";
    case Destination::Tier3: return "tier3";
    case Destination::Terminate: return "terminate";
  }
  return "";
}

struct RouteDecision {
  RouteStage stage = RouteStage::AfterTier1;
  Destination destination = Destination::Tier2;
  bool divergence = false;
  std::optional<std::pair<char, char>> candidates;
  bool operator==(const RouteDecision&) const = default;
};

enum class Route { T1_T2, T1_T3, T1_T2_T3 };

inline constexpr Route kAllRoutes[] = {Route::T1_T2, Route::T1_T3, Route::T1_T2_T3};

constexpr std::string_view to_string(Route r) {
  switch (r) {
    case Route::T1_T2: return "T1_T2";
    case Route::T1_T3: return "T1_T3";
    case Route::T1_T2_T3: return "T1_T2_T3";
  }
  return "";
}

constexpr std::string_view route_label(Route r) {
  switch (r) {
    case Route::T1_T2: return "T1->T2";
    case Route::T1_T3: return "T1->T3";
    case Route::T1_T2_T3: return "T1->T2->T3";
  }
  return "";
}

inline Route route_from_string(std::string_view s) {
  for (auto r : kAllRoutes) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::ContractViolation, "unknown route: " + std::string(s));
}

/// Model calls a route consumes, parse retries excluded.
constexpr int expected_call_count(Route r) {
  switch (r) {
    case Route::T1_T2: return 3;
    case Route::T1_T3: return 2 + 6;
    case Route::T1_T2_T3: return 3 + 6;
  }
  return 0;
}

struct Verdict {
  char answer = 'A';
  std::string final_reasoning;
  Route route_taken = Route::T1_T2;
  bool chose_outside_candidates = false;
  bool operator==(const Verdict&) const = default;
};

}  // namespace ucagents
