// SPDX-License-Identifier: Apache-2.0
#pragma once

// Prompt templates and the strict output grammars each agent must follow.
//
// Templates are plain text with {UPPER CASE} placeholders. Rendering is a
// single literal pass: substituted values are never re-scanned, so a binding
// that itself contains "{X}" is inserted verbatim.
//
// Parsers take the *last* occurrence of every marker, since models often
// restate the format block before answering.

#include <algorithm>
#include <array>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "ucagents/case.hpp"
#include "ucagents/error.hpp"

namespace ucagents {

enum class TemplateKind {
  Tier1,
  Tier2,
  Critic,
  LeaderInquiry,
  CriticResponse,
  LeaderVerdict,
  JudgeNoise,
  JudgeEvidence,
};

inline constexpr std::array<TemplateKind, 8> kAllTemplateKinds = {
    TemplateKind::Tier1,          TemplateKind::Tier2,         TemplateKind::Critic,
    TemplateKind::LeaderInquiry,  TemplateKind::CriticResponse, TemplateKind::LeaderVerdict,
    TemplateKind::JudgeNoise,     TemplateKind::JudgeEvidence,
};

constexpr std::string_view template_file_name(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Tier1: return "tier1.txt";
    case TemplateKind::Tier2: return "tier2.txt";
    case TemplateKind::Critic: return "critic.txt";
    case TemplateKind::LeaderInquiry: return "leader_inquiry.txt";
    case TemplateKind::CriticResponse: return "critic_response.txt";
    case TemplateKind::LeaderVerdict: return "leader_verdict.txt";
    case TemplateKind::JudgeNoise: return "judge_noise.txt";
    case TemplateKind::JudgeEvidence: return "judge_evidence.txt";
  }
  return "";
}

namespace defaults {

inline constexpr std::string_view kTier1 =
    "[Core Identity] You are a professional and rigorous {MEDICAL FIELD} expert specializing in diagnostic "
    "imaging interpretation ({IMAGING MODALITIES}). Your core goal is to make precise, evidence-based diagnoses "
    "for the given question strictly based on the provided {IMAGING TYPE} image and medical case.\n"
    "[Medical Case] {MEDICAL CASE}.\n"
    "[Reasoning Requirements] Follow these steps in your reasoning: 1. First check the image and read the "
    "question carefully. 2. Describe the key visual features observed in the image. 3. Explain the radiological "
    "implications of these findings. 4. Conclude which option is the best fit and clarify the rationale.\n"
    "[Strict Output Format] #Reasoning: <3-5 sentences of reasoning> #Answer: <a single letter of your choice, "
    "e.g. A or B.>.\n";

inline constexpr std::string_view kTier2 =
    "[Core Identity] You are an authoritative senior {MEDICAL FIELD} expert, highly proficient in {IMAGING "
    "MODALITIES} interpretation and diagnostic reasoning. Your role is to critically verify the consensus "
    "diagnosis made by two prior {MEDICAL FIELD} experts, ensuring it is logically sound, evidence-based, and "
    "consistent with {IMAGING MODALITIES} image features.\n"
    "[Task Focus] 1. First check the input image and read the question. 2. Evaluate whether the shared judgment "
    "aligns with the observed image findings and {IMAGING MODALITIES} criteria. 3. Identify any potential "
    "misinterpretation or overconfidence. 4. If their consensus is valid, reaffirm it; if not, provide your "
    "corrected final diagnosis.\n"
    "[Current Case] {MEDICAL CASE}.\n"
    "[Previous Reports] {TIER 1 REPORT}.\n"
    "[Output Format] #Review Reasoning: <Write a rigorous 3-5 sentence paragraph explaining (1) the observed "
    "image evidence, (2) the logic of the prior judgments, (3) potential flaws or confirmations, (4) your "
    "diagnostic reasoning, and (5) your conclusion.> #Answer: <a single letter of your choice, e.g. A or B>.\n";

inline constexpr std::string_view kCritic =
    "[Core Identity] You are an expert Critical Analyst, functioning as a Hypothesis Auditor. First check the "
    "input image, and read the question. Your task is to provide a balanced, objective, and rigorous review of a "
    "proposed hypothesis based on the provided source evidence. Your goal is to assess the overall viability and "
    "logical soundness of the hypothesis, not to attack it. You are assigned to uncover potential risks in option "
    "{OPTION} in the medical case and the supportive statements of option {OPTION} in [Historical Reports]. You "
    "should raise the risk that \"why this hypothesis may be wrong\", and your report would be given to a leader "
    "to make a decision.\n"
    "[Medical Case] {MEDICAL CASE}.\n"
    "[Historical Reports] {AGGREGATED REPORT}.\n"
    "[Output Format]#Flaws: <Describe the specific logical flaw, risk, or overlooked possibility in 3-5 CONCISE "
    "sentences.> Counter Evidence: <Cite specific evidence from the original case supporting your critique in 4 "
    "sentences.>.\n";

inline constexpr std::string_view kLeaderInquiry =
    "[Core Identity] You are the Lead Adjudicator, responsible for chairing an expert critical analysis of "
    "conflicting hypotheses. You are impartial, perceptive, and skilled at uncovering the truth through precise "
    "inquiry.\n"
    "[Task 1] First check the input image and read the question. You have just received the initial arguments on "
    "a medical case from the Critic Specialists. Your task is not to form your own opinion yet, but to act as a "
    "rigorous, impartial critic. You must critically analyze each review below, identify its single biggest "
    "weakness, logical flaw, or unsupported assumption, and formulate a targeted, challenging question for each "
    "specialist, the question should help you solve the case.\n"
    "[Inquiry Methodology] Strictly follow these steps in your thinking: 1.Synthesize Critiques: Comprehensively "
    "read and understand the report submitted by each Hypothesis Auditor. 2.Identify Core Conflict: What is the "
    "central point of disagreement or the most critical identified risk among the competing audits? 3.Formulate "
    "Targeted Questions: Based on this core conflict, design a challenging question for each auditor that forces "
    "them to defend their critique.\n"
    "[Output Format] Inquiries:@ To Expert <Expert No., e.g 1> who reviews <The option it reviews, e.g A>: <The "
    "single, most pointed question for the Expert who reviews Option, based on the risks they identified in their "
    "report.> @ To Expert <Expert No., e.g 2> who reviews <The option it reviews, e.g B>: <The single, most pointed "
    "question for the Expert who reviews Option>...(until each expert in [Critics on Assessments] is inquired, no "
    "other contents).\n"
    "[Medical Case] {MEDICAL CASE}. \n"
    "[Initial Independent Assessments] {AGGREGATED REPORT}.\n"
    "[Critics on Assessments] {RISK REPORT}.\n"
    "Now, begin your inquiry and output strictly according to the format and requirements:\n";

inline constexpr std::string_view kCriticResponse =
    "Please answer the question from the leader toward your support report in 1-3 sentences, do not change your "
    "stance:{INQUIRY}.\n";

inline constexpr std::string_view kLeaderVerdict =
    "[Response to your inquiries] {RESPONSE}\n"
    "[Task 2] You have received all critiques and the final responses to your inquiries. Your task is to render "
    "the final, binding verdict on this case. Your decision must be based on which hypothesis best survived the "
    "logical stress test.\n"
    "[Adjudication Methodology] Strictly follow these steps in your thinking: 1. Global Review: Re-examine the "
    "complete record: the source evidence, the Critique Reports from each Critic Agent, your inquiries, and the "
    "Critics' final responses to those inquiries. 2. Compare Critique Impact: Your primary task is to compare the "
    "severity and impact of the flaws identified. Synthesize all information to determine which hypothesis, after "
    "rigorous scrutiny, best survived its dedicated critique. 3. Justify the Verdict: You must explicitly state why "
    "one hypothesis survived better than the other(s). Your final reasoning MUST be based on this direct "
    "comparison. 4. Render Final Verdict: Formulate your final, reasoned judgment, you can choose an overlooked "
    "choice when you are very confident after careful thinking.\n"
    "[Strict Instruction] This is the final step. No further escalation is possible. \n"
    "[Strict Output Format] #Final Reasoning: <A report, within 6-8 sentences, summarizing the comparative impact "
    "of the critiques. This must explain the rationale for your final verdict.> #Final Answer: <Only the single "
    "letter of your choice, e.g., A or B>.\n";

inline constexpr std::string_view kJudgeNoise =
    "[Task] You are auditing the written record of a medical diagnostic discussion. Read every sentence in the "
    "record and classify it as either visual evidence (a statement that describes a concrete finding in the image "
    "or the case) or noise (rhetorical statements, procedural comments, or persuasive arguments lacking evidence). "
    "Count the sentences in each class.\n"
    "[Diagnostic Record] {DIAGNOSTIC RECORD}\n"
    "[Output Format] evidence=<number of evidence sentences> noise=<number of noise sentences>\n";

inline constexpr std::string_view kJudgeEvidence =
    "[Task] You are auditing the written record of a medical diagnostic discussion against the image. First list "
    "for yourself the key visual findings needed to answer the question. Then count how many of those key findings "
    "the record identifies and how many it misses.\n"
    "[Medical Case] {MEDICAL CASE}\n"
    "[Diagnostic Record] {DIAGNOSTIC RECORD}\n"
    "[Output Format] identified=<number of key findings identified> missed=<number of key findings missed>\n";

constexpr std::string_view body(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::Tier1: return kTier1;
    case TemplateKind::Tier2: return kTier2;
    case TemplateKind::Critic: return kCritic;
    case TemplateKind::LeaderInquiry: return kLeaderInquiry;
    case TemplateKind::CriticResponse: return kCriticResponse;
    case TemplateKind::LeaderVerdict: return kLeaderVerdict;
    case TemplateKind::JudgeNoise: return kJudgeNoise;
    case TemplateKind::JudgeEvidence: return kJudgeEvidence;
  }
  return "";
}

}  // namespace defaults

struct PromptTemplate {
  TemplateKind kind = TemplateKind::Tier1;
  std::string body;
};

using Bindings = std::map<std::string, std::string, std::less<>>;

namespace detail {

inline bool is_placeholder_char(char ch) {
  return (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == ' ' || ch == '_';
}

// Returns the end index (one past '}') of a placeholder starting at `pos`, or npos.
inline std::size_t placeholder_end(std::string_view text, std::size_t pos) {
  if (text[pos] != '{') return std::string_view::npos;
  std::size_t i = pos + 1;
  while (i < text.size() && is_placeholder_char(text[i])) ++i;
  if (i == pos + 1 || i >= text.size() || text[i] != '}') return std::string_view::npos;
  if (text[pos + 1] == ' ' || text[i - 1] == ' ') return std::string_view::npos;
  return i + 1;
}

}  // namespace detail

/// Names of every placeholder in `body`, in order of first appearance.
inline std::vector<std::string> placeholders(std::string_view body) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const std::size_t end = detail::placeholder_end(body, i);
    if (end == std::string_view::npos) continue;
    std::string name(body.substr(i + 1, end - i - 2));
    if (std::find(names.begin(), names.end(), name) == names.end()) names.push_back(std::move(name));
    i = end - 1;
  }
  return names;
}

inline std::string render(const PromptTemplate& tpl, const Bindings& bindings) {
  std::string out;
  out.reserve(tpl.body.size() * 2);
  const std::string_view body = tpl.body;
  std::size_t i = 0;
  while (i < body.size()) {
    const std::size_t end = detail::placeholder_end(body, i);
    if (end == std::string_view::npos) {
      out.push_back(body[i++]);
      continue;
    }
    const std::string_view name = body.substr(i + 1, end - i - 2);
    auto it = bindings.find(name);
    if (it == bindings.end()) throw Error(ErrorCode::MissingBinding, std::string(name));
    out += it->second;
    i = end;
  }
  return out;
}

/// The immutable set of templates the engine renders from.
class TemplateSet {
 public:
  TemplateSet() {
    for (auto kind : kAllTemplateKinds) {
      templates_[index(kind)] = PromptTemplate{kind, std::string(defaults::body(kind))};
    }
  }

  /// Defaults overridden by whichever `<name>.txt` files exist in `dir`.
  static TemplateSet load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
      throw Error(ErrorCode::ConfigError, "template directory not found: " + dir.string());
    }
    TemplateSet set;
    for (auto kind : kAllTemplateKinds) {
      const auto path = dir / std::string(template_file_name(kind));
      if (!std::filesystem::exists(path)) continue;
      std::ifstream in(path, std::ios::binary);
      if (!in) throw Error(ErrorCode::IoError, "cannot read template " + path.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      set.templates_[index(kind)].body = ss.str();
    }
    return set;
  }

  void write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    for (const auto& t : templates_) {
      std::ofstream out(dir / std::string(template_file_name(t.kind)), std::ios::binary);
      if (!out) throw Error(ErrorCode::OutputUnwritable, dir.string());
      out << t.body;
    }
  }

  const PromptTemplate& get(TemplateKind kind) const { return templates_[index(kind)]; }
  void set(TemplateKind kind, std::string body) { templates_[index(kind)].body = std::move(body); }

 private:
  static std::size_t index(TemplateKind kind) { return static_cast<std::size_t>(kind); }
  std::array<PromptTemplate, kAllTemplateKinds.size()> templates_;
};

/// {MEDICAL CASE}: the question, then one "A. <text>" line per option.
inline std::string format_medical_case(const MedicalCase& c) {
  std::string out = c.question;
  for (const auto& o : c.options) {
    out += '\n';
    out += o.letter;
    out += ". ";
    out += o.text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Output grammars

enum class Grammar {
  Diagnosis,  // #Reasoning / #Answer
  Review,     // #Review Reasoning / #Answer
  Critique,   // #Flaws / Counter Evidence
  Inquiries,  // Inquiries: @ To Expert n who reviews X: ...
  Verdict,    // #Final Reasoning / #Final Answer
};

constexpr std::string_view to_string(Grammar g) {
  switch (g) {
    case Grammar::Diagnosis: return "diagnosis";
    case Grammar::Review: return "review";
    case Grammar::Critique: return "critique";
    case Grammar::Inquiries: return "inquiries";
    case Grammar::Verdict: return "verdict";
  }
  return "";
}

struct DiagnosisReport {
  std::string reasoning;
  char answer = 'A';
  bool operator==(const DiagnosisReport&) const = default;
};

struct CritiqueReport {
  std::string flaws;
  std::string counter_evidence;
  bool operator==(const CritiqueReport&) const = default;
};

struct ParsedInquiry {
  int expert = 1;
  char reviewed_option = 'A';
  std::string question;
  bool operator==(const ParsedInquiry&) const = default;
};

struct FinalReport {
  std::string reasoning;
  char answer = 'A';
  bool operator==(const FinalReport&) const = default;
};

using ParsedReport = std::variant<DiagnosisReport, CritiqueReport, std::vector<ParsedInquiry>, FinalReport>;

inline constexpr int kCorrectiveInstructionVersion = 1;

/// The literal format block each grammar demands, used in corrective retries.
constexpr std::string_view format_instruction(Grammar g) {
  switch (g) {
    case Grammar::Diagnosis:
      return "#Reasoning: <3-5 sentences of reasoning> #Answer: <a single letter of your choice, e.g. A or B.>";
    case Grammar::Review:
      return "#Review Reasoning: <a rigorous 3-5 sentence paragraph> #Answer: <a single letter of your choice, "
             "e.g. A or B>";
    case Grammar::Critique:
      return "#Flaws: <3-5 concise sentences> Counter Evidence: <4 sentences citing evidence from the case>";
    case Grammar::Inquiries:
      return "Inquiries:@ To Expert 1 who reviews <option>: <one question> @ To Expert 2 who reviews <option>: "
             "<one question>";
    case Grammar::Verdict:
      return "#Final Reasoning: <6-8 sentences> #Final Answer: <Only the single letter of your choice, e.g., A or "
             "B>";
  }
  return "";
}

inline std::string corrective_instruction(Grammar g) {
  return "Your previous output violated the required format. Output strictly: " + std::string(format_instruction(g));
}

namespace detail {

inline char lower(char ch) { return static_cast<char>(std::tolower(static_cast<unsigned char>(ch))); }
inline bool is_space(char ch) { return std::isspace(static_cast<unsigned char>(ch)) != 0; }
inline bool is_alnum(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) != 0; }

struct MarkerSpec {
  std::array<std::string_view, 2> words;  // second may be empty
  bool hash_required = true;
};

struct MarkerHit {
  std::size_t begin;  // position of '#' or first letter
  std::size_t end;    // one past ':'
};

// Case-insensitive match of "#word [word]:" at `pos`, tolerating spaces and
// markdown asterisks between the parts.
inline std::optional<std::size_t> match_marker(std::string_view text, std::size_t pos, const MarkerSpec& m) {
  std::size_t i = pos;
  if (i < text.size() && text[i] == '#') {
    ++i;
    while (i < text.size() && (text[i] == ' ' || text[i] == '*')) ++i;
  } else {
    if (m.hash_required) return std::nullopt;
    if (pos > 0 && (is_alnum(text[pos - 1]) || text[pos - 1] == '#')) return std::nullopt;
  }
  bool first = true;
  for (auto word : m.words) {
    if (word.empty()) continue;
    if (!first) {
      std::size_t gap = i;
      while (i < text.size() && text[i] == ' ') ++i;
      if (i == gap) return std::nullopt;
    }
    first = false;
    if (i + word.size() > text.size()) return std::nullopt;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (lower(text[i + k]) != lower(word[k])) return std::nullopt;
    }
    i += word.size();
  }
  if (i < text.size() && is_alnum(text[i])) return std::nullopt;
  while (i < text.size() && (text[i] == ' ' || text[i] == '*')) ++i;
  if (i >= text.size() || text[i] != ':') return std::nullopt;
  ++i;
  while (i < text.size() && text[i] == '*') ++i;
  return i;
}

inline std::vector<MarkerHit> find_markers(std::string_view text, const MarkerSpec& m) {
  std::vector<MarkerHit> hits;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (auto end = match_marker(text, i, m)) {
      hits.push_back({i, *end});
      i = *end - 1;
    }
  }
  return hits;
}

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

// Like trim, also dropping markdown emphasis left around a field.
inline std::string trim_field(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (is_space(s[b]) || s[b] == '*')) ++b;
  while (e > b && (is_space(s[e - 1]) || s[e - 1] == '*')) --e;
  return std::string(s.substr(b, e - b));
}

// Text between the last hit of `field` and the next hit of any of `all`
// (or end of text).
inline std::optional<std::string> last_field(std::string_view text, const MarkerSpec& field,
                                             const std::vector<MarkerSpec>& all) {
  auto hits = find_markers(text, field);
  if (hits.empty()) return std::nullopt;
  const std::size_t start = hits.back().end;
  std::size_t stop = text.size();
  for (const auto& spec : all) {
    for (const auto& h : find_markers(text, spec)) {
      if (h.begin >= start && h.begin < stop) stop = h.begin;
    }
  }
  return trim_field(text.substr(start, stop - start));
}

inline std::optional<std::string> first_field(std::string_view text, std::initializer_list<MarkerSpec> alternatives,
                                              const std::vector<MarkerSpec>& all) {
  // Picks whichever spelling occurs last.
  std::optional<std::string> best;
  std::size_t best_pos = 0;
  for (const auto& spec : alternatives) {
    auto hits = find_markers(text, spec);
    if (hits.empty()) continue;
    if (!best || hits.back().begin >= best_pos) {
      best_pos = hits.back().begin;
      best = last_field(text, spec, all);
    }
  }
  return best;
}

inline const MarkerSpec kReasoning{{"Reasoning", ""}, true};
inline const MarkerSpec kReviewReasoning{{"Review", "Reasoning"}, true};
inline const MarkerSpec kAnswer{{"Answer", ""}, true};
inline const MarkerSpec kFlaws{{"Flaws", ""}, true};
inline const MarkerSpec kCounterEvidence{{"Counter", "Evidence"}, false};
inline const MarkerSpec kFinalReasoning{{"Final", "Reasoning"}, true};
inline const MarkerSpec kFinalAnswer{{"Final", "Answer"}, true};

}  // namespace detail

/// Strips whitespace and punctuation, uppercases, and requires exactly one
/// single-letter token. Only the first non-empty line is considered.
inline char normalize_answer(std::string_view raw) {
  std::string_view s = raw;
  std::size_t b = 0;
  while (b < s.size() && detail::is_space(s[b])) ++b;
  s.remove_prefix(b);
  s = s.substr(0, s.find('\n'));
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (char ch : s) {
    if (detail::is_space(ch)) {
      flush();
    } else if (detail::is_alnum(ch)) {
      current.push_back(ch);
    }
  }
  flush();
  if (tokens.size() != 1 || tokens[0].size() != 1 ||
      !std::isalpha(static_cast<unsigned char>(tokens[0][0]))) {
    throw Error(ErrorCode::AnswerNotALetter, "expected a single option letter, got \"" + std::string(s) + "\"");
  }
  return static_cast<char>(std::toupper(static_cast<unsigned char>(tokens[0][0])));
}

inline DiagnosisReport parse_diagnosis(std::string_view raw, Grammar grammar = Grammar::Diagnosis) {
  using namespace detail;
  const std::vector<MarkerSpec> all = {kReasoning, kReviewReasoning, kAnswer};
  std::optional<std::string> reasoning = grammar == Grammar::Review
                                             ? first_field(raw, {kReviewReasoning, kReasoning}, all)
                                             : last_field(raw, kReasoning, all);
  auto answer = last_field(raw, kAnswer, all);
  if (!answer) throw Error(ErrorCode::MarkerMissing, "#Answer");
  if (!reasoning) {
    throw Error(ErrorCode::MarkerMissing, grammar == Grammar::Review ? "#Review Reasoning" : "#Reasoning");
  }
  return DiagnosisReport{*reasoning, normalize_answer(*answer)};
}

inline CritiqueReport parse_critique(std::string_view raw) {
  using namespace detail;
  const std::vector<MarkerSpec> all = {kFlaws, kCounterEvidence};
  auto flaws = last_field(raw, kFlaws, all);
  if (!flaws) throw Error(ErrorCode::MarkerMissing, "#Flaws");
  auto counter = last_field(raw, kCounterEvidence, all);
  if (!counter) throw Error(ErrorCode::MarkerMissing, "Counter Evidence");
  if (flaws->empty()) throw Error(ErrorCode::EmptyResponse, "#Flaws section is empty");
  if (counter->empty()) throw Error(ErrorCode::EmptyResponse, "Counter Evidence section is empty");
  return CritiqueReport{*flaws, *counter};
}

inline FinalReport parse_final(std::string_view raw) {
  using namespace detail;
  const std::vector<MarkerSpec> all = {kFinalReasoning, kFinalAnswer};
  auto answer = last_field(raw, kFinalAnswer, all);
  if (!answer) throw Error(ErrorCode::MarkerMissing, "#Final Answer");
  auto reasoning = last_field(raw, kFinalReasoning, all);
  if (!reasoning) throw Error(ErrorCode::MarkerMissing, "#Final Reasoning");
  return FinalReport{*reasoning, normalize_answer(*answer)};
}

/// Exactly two inquiries, one per expert {1, 2}, sorted by expert index.
inline std::vector<ParsedInquiry> parse_inquiries(std::string_view raw) {
  using namespace detail;
  // Block starts: '@' followed by "To Expert".
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (raw[i] != '@') continue;
    std::size_t j = i + 1;
    while (j < raw.size() && is_space(raw[j])) ++j;
    if (j + 2 < raw.size() && lower(raw[j]) == 't' && lower(raw[j + 1]) == 'o' && is_space(raw[j + 2])) {
      starts.push_back(i);
    }
  }
  std::vector<ParsedInquiry> out;
  for (std::size_t b = 0; b < starts.size(); ++b) {
    const std::size_t end = b + 1 < starts.size() ? starts[b + 1] : raw.size();
    std::string_view block = raw.substr(starts[b] + 1, end - starts[b] - 1);
    std::size_t i = 0;
    auto skip_ws = [&] {
      while (i < block.size() && is_space(block[i])) ++i;
    };
    auto expect_word = [&](std::string_view w) {
      skip_ws();
      if (i + w.size() > block.size()) return false;
      for (std::size_t k = 0; k < w.size(); ++k) {
        if (lower(block[i + k]) != lower(w[k])) return false;
      }
      i += w.size();
      return true;
    };
    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::UnparsableHeader,
                   why + " in \"" + trim(block.substr(0, std::min<std::size_t>(block.size(), 60))) + "\"");
    };
    if (!expect_word("to") || !expect_word("expert")) throw fail("expected 'To Expert'");
    skip_ws();
    if (i < block.size() && (block[i] == '#' || block[i] == '.')) ++i;
    skip_ws();
    std::size_t digits = i;
    while (i < block.size() && std::isdigit(static_cast<unsigned char>(block[i]))) ++i;
    if (i == digits || i - digits > 3) throw fail("missing expert number");
    const int expert = std::stoi(std::string(block.substr(digits, i - digits)));
    skip_ws();
    if (i < block.size() && block[i] == ',') ++i;
    if (!expect_word("who") || !expect_word("reviews")) throw fail("expected 'who reviews'");
    skip_ws();
    {
      // optional "option"
      std::size_t save = i;
      if (!expect_word("option") || (i < block.size() && is_alnum(block[i]))) i = save;
    }
    skip_ws();
    if (i < block.size() && (block[i] == '(' || block[i] == '*')) ++i;
    if (i >= block.size() || !std::isalpha(static_cast<unsigned char>(block[i]))) throw fail("missing option letter");
    const char option = static_cast<char>(std::toupper(static_cast<unsigned char>(block[i])));
    ++i;
    if (i < block.size() && is_alnum(block[i])) throw fail("option must be a single letter");
    while (i < block.size() && (block[i] == ')' || block[i] == '*' || block[i] == ' ')) ++i;
    if (i >= block.size() || block[i] != ':') throw fail("missing ':' after header");
    ++i;
    std::string question = trim(block.substr(i));
    if (question.empty()) throw fail("empty question");
    if (expert < 1 || expert > 2) {
      throw Error(ErrorCode::WrongArity, "inquiry addressed to Expert " + std::to_string(expert));
    }
    for (const auto& prev : out) {
      if (prev.expert == expert) {
        throw Error(ErrorCode::DuplicateExpert, "Expert " + std::to_string(expert) + " inquired twice");
      }
    }
    out.push_back(ParsedInquiry{expert, option, std::move(question)});
  }
  if (out.size() != 2) {
    throw Error(ErrorCode::WrongArity, "expected 2 inquiries, found " + std::to_string(out.size()));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.expert < b.expert; });
  return out;
}

inline ParsedReport parse_report(std::string_view raw, Grammar grammar) {
  switch (grammar) {
    case Grammar::Diagnosis:
    case Grammar::Review: return parse_diagnosis(raw, grammar);
    case Grammar::Critique: return parse_critique(raw);
    case Grammar::Inquiries: return parse_inquiries(raw);
    case Grammar::Verdict: return parse_final(raw);
  }
  throw Error(ErrorCode::PreconditionViolation, "unknown grammar");
}

// Canonical marker forms; parse(format(x)) == x for trimmed, marker-free text.

inline std::string format_diagnosis(const DiagnosisReport& r, Grammar grammar = Grammar::Diagnosis) {
  return std::string(grammar == Grammar::Review ? "#Review Reasoning: " : "#Reasoning: ") + r.reasoning +
         " #Answer: " + r.answer;
}

inline std::string format_critique(const CritiqueReport& r) {
  return "#Flaws: " + r.flaws + " Counter Evidence: " + r.counter_evidence;
}

inline std::string format_inquiries(const std::vector<ParsedInquiry>& qs) {
  std::string out = "Inquiries:";
  for (const auto& q : qs) {
    if (out.size() > 10) out += ' ';
    out += "@ To Expert " + std::to_string(q.expert) + " who reviews " + q.reviewed_option + ": " + q.question;
  }
  return out;
}

inline std::string format_final(const FinalReport& r) {
  return "#Final Reasoning: " + r.reasoning + " #Final Answer: " + r.answer;
}

}  // namespace ucagents
