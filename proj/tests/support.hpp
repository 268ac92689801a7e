// SPDX-License-Identifier: Apache-2.0
#pragma once

// Shared fixtures: canonical agent outputs, scripted backends for a given
// route, seeded generators.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ucagents/backend.hpp"
#include "ucagents/case.hpp"
#include "ucagents/protocol.hpp"

namespace fixtures {

using namespace ucagents;

inline std::string diag(char letter, const std::string& why = "The lesion margins are irregular.") {
  return "#Reasoning: " + why + "\n#Answer: " + std::string(1, letter);
}

inline std::string review(char letter, const std::string& why = "Both reports cite the same focal finding.") {
  return "#Review Reasoning: " + why + "\n#Answer: " + std::string(1, letter);
}

inline std::string critique(const std::string& flaws = "The cited opacity is nonspecific.",
                            const std::string& counter = "Margins are smooth on the lateral view.") {
  return "#Flaws: " + flaws + "\nCounter Evidence: " + counter;
}

inline std::string inquiry(char a, char b) {
  return std::string("Inquiries:@ To Expert 1 who reviews ") + a + ": Which feature rules out the alternative? " +
         "@ To Expert 2 who reviews " + b + ": Is the counter evidence visible on this image?";
}

inline std::string final_answer(char letter, const std::string& why = "The audit of the alternative holds.") {
  return "#Final Reasoning: " + why + "\n#Final Answer: " + std::string(1, letter);
}

inline MedicalCase make_case(const std::string& id, int n_options = 4, std::optional<char> gold = 'A',
                             bool with_image = true) {
  MedicalCase c;
  c.case_id = id;
  c.question = "Which abnormality is shown in image " + id + "?";
  std::vector<std::string> texts;
  for (int i = 0; i < n_options; ++i) texts.push_back("finding " + std::to_string(i + 1));
  c.options = letter_options(texts);
  c.gold_answer = gold;
  if (with_image) c.image = Image{{0x89, 'P', 'N', 'G', 1, 2, 3, static_cast<std::uint8_t>(id.size())}, "image/png"};
  return c;
}

/// What each seat says for one case, first attempts only.
struct Plan {
  char t1 = 'A';
  char t2 = 'A';
  std::optional<char> supervisor;  // asked only when t1 == t2
  char leader = 'A';               // arbitration answer
};

/// The candidates tier 3 will audit under this plan, if it reaches tier 3.
inline std::optional<std::pair<char, char>> candidates(const Plan& p) {
  if (p.t1 != p.t2) return std::pair{p.t1, p.t2};
  if (p.supervisor && *p.supervisor != p.t1) return std::pair{p.t1, *p.supervisor};
  return std::nullopt;
}

inline Route expected_route(const Plan& p) {
  if (p.t1 != p.t2) return Route::T1_T3;
  if (p.supervisor && *p.supervisor != p.t1) return Route::T1_T2_T3;
  return Route::T1_T2;
}

/// Script entries for one case; `case_id` empty applies them to any case.
inline std::vector<ScriptEntry> plan_entries(const Plan& p, const std::string& case_id = {},
                                             std::optional<Usage> usage = Usage{120, 30, false}) {
  std::vector<ScriptEntry> out;
  out.push_back(ScriptEntry::by_role("tier1_expert_1", 1, diag(p.t1), usage));
  out.push_back(ScriptEntry::by_role("tier1_expert_2", 1, diag(p.t2), usage));
  out.push_back(ScriptEntry::by_role("tier2_supervisor", 1, review(p.supervisor.value_or(p.t1)), usage));
  const auto cand = candidates(p).value_or(std::pair{'A', 'B'});
  out.push_back(ScriptEntry::by_role("critic_1", 1, critique(), usage));
  out.push_back(ScriptEntry::by_role("critic_2", 1, critique(), usage));
  out.push_back(ScriptEntry::by_role("leader", 1, inquiry(cand.first, cand.second), usage));
  out.push_back(ScriptEntry::by_role("critic_1", 2, "The margin sign is visible in the upper lobe.", usage));
  out.push_back(ScriptEntry::by_role("critic_2", 2, "No, the lateral view is not provided.", usage));
  out.push_back(ScriptEntry::by_role("leader", 2, final_answer(p.leader), usage));
  for (auto& e : out) e.case_id = case_id;
  return out;
}

inline ScriptedBackend scripted(const Plan& p) {
  return ScriptedBackend(plan_entries(p));
}

inline EngineConfig sequential_config() {
  EngineConfig c;
  c.model_id = "scripted";
  c.concurrent_calls = false;
  return c;
}

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline int uniform_int(std::mt19937_64& g, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g); }

inline char random_letter(std::mt19937_64& g, int n) { return static_cast<char>('A' + uniform_int(g, 0, n - 1)); }

/// Random string over a hostile alphabet: markers, letters, punctuation,
/// whitespace and high bytes.
inline std::string noise_text(std::mt19937_64& g, int max_len = 120) {
  static const std::vector<std::string> atoms = {
      "#",      "Answer", "#Answer:", "#Final Answer:", "#Reasoning:", "#Review Reasoning:", "#Flaws:",
      "Counter Evidence:", "@", "@ To Expert ", "who reviews ", ":", " ", "\n", "A", "B", "z", "1", "2", "3",
      ".", ",", "?", "Inquiries:", "\xff", "\t", "To", "Expert", "or", "{", "}"};
  std::string s;
  const int n = uniform_int(g, 0, max_len / 4);
  for (int i = 0; i < n; ++i) s += atoms[static_cast<std::size_t>(uniform_int(g, 0, static_cast<int>(atoms.size()) - 1))];
  return s;
}

}  // namespace fixtures
