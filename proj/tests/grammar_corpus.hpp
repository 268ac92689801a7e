// SPDX-License-Identifier: Apache-2.0
#pragma once

// Output-grammar fixtures. Accepted fixtures follow the format blocks of the
// bundled templates, including the restated-format and markdown variants
// models actually produce; rejected fixtures carry the expected error code.

#include <optional>
#include <string>
#include <vector>

#include "ucagents/error.hpp"
#include "ucagents/prompts.hpp"

namespace corpus {

using ucagents::ErrorCode;
using ucagents::Grammar;

struct Accept {
  std::string name;
  Grammar grammar;
  std::string raw;
  // Expected extraction. `answer` for letter grammars; `first`/`second` hold
  // reasoning/flaws and counter evidence; inquiries use `options` + `questions`.
  std::optional<char> answer;
  std::string first;
  std::string second;
  std::vector<char> options;
  std::vector<std::string> questions;
};

struct Reject {
  std::string name;
  Grammar grammar;
  std::string raw;
  ErrorCode code;
};

inline std::vector<Accept> accepted() {
  using G = Grammar;
  return {
      // Diagnosis: #Reasoning / #Answer
      {"diag_single_line", G::Diagnosis, "#Reasoning: lesion margins are irregular. #Answer: B", 'B',
       "lesion margins are irregular.", "", {}, {}},
      {"diag_two_lines", G::Diagnosis, "#Reasoning: The mass is well circumscribed.\n#Answer: A", 'A',
       "The mass is well circumscribed.", "", {}, {}},
      {"diag_lowercase_answer_period", G::Diagnosis, "#Reasoning: Air bronchograms are present. #Answer: b.", 'B',
       "Air bronchograms are present.", "", {}, {}},
      {"diag_space_before_colon", G::Diagnosis, "#Reasoning : Cardiomegaly is evident.\n#Answer : C", 'C',
       "Cardiomegaly is evident.", "", {}, {}},
      {"diag_markdown_bold", G::Diagnosis, "**#Reasoning:** Pleural effusion blunts the angle.\n**#Answer:** D", 'D',
       "Pleural effusion blunts the angle.", "", {}, {}},
      {"diag_restated_format_first", G::Diagnosis,
       "Format: #Reasoning: <3-5 sentences of reasoning> #Answer: <a single letter of your choice, e.g. A or B.>\n"
       "#Reasoning: Hilar nodes are enlarged. #Answer: A",
       'A', "Hilar nodes are enlarged.", "", {}, {}},
      {"diag_answer_parenthesized", G::Diagnosis, "#Reasoning: Ground glass opacities. #Answer: (C)", 'C',
       "Ground glass opacities.", "", {}, {}},
      {"diag_answer_then_explanation_line", G::Diagnosis,
       "#Reasoning: Consolidation in the right lower lobe.\n#Answer: B\nThis reflects pneumonia.", 'B',
       "Consolidation in the right lower lobe.", "", {}, {}},
      {"diag_answer_first", G::Diagnosis, "#Answer: A\n#Reasoning: Rib fracture at the fourth rib.", 'A',
       "Rib fracture at the fourth rib.", "", {}, {}},
      {"diag_upper_marker", G::Diagnosis, "#REASONING: Kerley B lines are visible. #ANSWER: e", 'E',
       "Kerley B lines are visible.", "", {}, {}},
      {"diag_hash_space", G::Diagnosis, "# Reasoning: Tracheal deviation. # Answer: B", 'B', "Tracheal deviation.",
       "", {}, {}},
      {"diag_answer_quoted", G::Diagnosis, "#Reasoning: A calcified granuloma. #Answer: \"A\"", 'A',
       "A calcified granuloma.", "", {}, {}},

      // Review: #Review Reasoning / #Answer
      {"review_canonical", G::Review,
       "#Review Reasoning: The image shows a wedge shaped opacity, consistent with both reports. #Answer: A", 'A',
       "The image shows a wedge shaped opacity, consistent with both reports.", "", {}, {}},
      {"review_multiline", G::Review,
       "#Review Reasoning: Prior experts overlooked the air fluid level.\nThis favors an abscess.\n#Answer: C", 'C',
       "Prior experts overlooked the air fluid level.\nThis favors an abscess.", "", {}, {}},
      {"review_plain_reasoning_marker", G::Review, "#Reasoning: Consensus holds. #Answer: B", 'B', "Consensus holds.",
       "", {}, {}},
      {"review_letter_with_period", G::Review, "#Review Reasoning: The nodule is spiculated. #Answer: D.", 'D',
       "The nodule is spiculated.", "", {}, {}},

      // Critique: #Flaws / Counter Evidence
      {"critic_canonical", G::Critique,
       "#Flaws: The hypothesis ignores the bilateral distribution. Counter Evidence: Both lungs show opacities.",
       std::nullopt, "The hypothesis ignores the bilateral distribution.", "Both lungs show opacities.", {}, {}},
      {"critic_hash_counter", G::Critique, "#Flaws: Size is overestimated.\n#Counter Evidence: The ruler shows 2 cm.",
       std::nullopt, "Size is overestimated.", "The ruler shows 2 cm.", {}, {}},
      {"critic_template_spacing", G::Critique,
       "[Output Format]#Flaws: Timing is inconsistent. Counter Evidence: The history states two days.", std::nullopt,
       "Timing is inconsistent.", "The history states two days.", {}, {}},
      {"critic_lowercase", G::Critique, "#flaws: No contrast was given. counter evidence: Vessels are not enhanced.",
       std::nullopt, "No contrast was given.", "Vessels are not enhanced.", {}, {}},
      {"critic_multiline", G::Critique,
       "#Flaws: The margin is smooth.\nThe density is fat.\nCounter Evidence: Hounsfield values are negative.\n"
       "No calcification is seen.",
       std::nullopt, "The margin is smooth.\nThe density is fat.",
       "Hounsfield values are negative.\nNo calcification is seen.", {}, {}},
      {"critic_restated_format", G::Critique,
       "#Flaws: <Describe the flaw> Counter Evidence: <Cite evidence>\n#Flaws: Effusion is small. Counter Evidence: "
       "The costophrenic angle is sharp.",
       std::nullopt, "Effusion is small.", "The costophrenic angle is sharp.", {}, {}},

      // Inquiries: @ To Expert n who reviews X: question
      {"inq_canonical", G::Inquiries,
       "Inquiries:@ To Expert 1 who reviews A: why is the margin smooth? @ To Expert 2 who reviews B: how large is it?",
       std::nullopt, "", "", {'A', 'B'}, {"why is the margin smooth?", "how large is it?"}},
      {"inq_newlines", G::Inquiries,
       "Inquiries:\n@ To Expert 1 who reviews C: Which view shows it?\n@ To Expert 2 who reviews A: Is it bilateral?",
       std::nullopt, "", "", {'C', 'A'}, {"Which view shows it?", "Is it bilateral?"}},
      {"inq_no_space_after_at", G::Inquiries,
       "Inquiries:@To Expert 1 who reviews B: First question? @To Expert 2 who reviews D: Second question?",
       std::nullopt, "", "", {'B', 'D'}, {"First question?", "Second question?"}},
      {"inq_reverse_order", G::Inquiries,
       "Inquiries:@ To Expert 2 who reviews B: Second? @ To Expert 1 who reviews A: First?", std::nullopt, "", "",
       {'A', 'B'}, {"First?", "Second?"}},
      {"inq_option_word", G::Inquiries,
       "Inquiries:@ To Expert 1 who reviews Option A: Is the lesion cystic? @ To Expert 2 who reviews Option C: Is "
       "there enhancement?",
       std::nullopt, "", "", {'A', 'C'}, {"Is the lesion cystic?", "Is there enhancement?"}},
      {"inq_comma_after_number", G::Inquiries,
       "Inquiries:@ To Expert 1, who reviews A: Where is the lesion? @ To Expert 2, who reviews B: When did it appear?",
       std::nullopt, "", "", {'A', 'B'}, {"Where is the lesion?", "When did it appear?"}},
      {"inq_lowercase_letter", G::Inquiries,
       "Inquiries:@ to expert 1 who reviews a: Is it hyperdense? @ to expert 2 who reviews b: Is it hypodense?",
       std::nullopt, "", "", {'A', 'B'}, {"Is it hyperdense?", "Is it hypodense?"}},
      {"inq_preamble", G::Inquiries,
       "Having read both audits, my questions are below.\nInquiries:@ To Expert 1 who reviews A: Q one? @ To Expert 2 "
       "who reviews B: Q two?",
       std::nullopt, "", "", {'A', 'B'}, {"Q one?", "Q two?"}},
      {"inq_at_inside_question", G::Inquiries,
       "Inquiries:@ To Expert 1 who reviews A: Is the lesion @ the apex? @ To Expert 2 who reviews B: Is it basal?",
       std::nullopt, "", "", {'A', 'B'}, {"Is the lesion @ the apex?", "Is it basal?"}},

      // Verdict: #Final Reasoning / #Final Answer
      {"final_canonical", G::Verdict, "#Final Reasoning: Option B survived its audit. #Final Answer: B", 'B',
       "Option B survived its audit.", "", {}, {}},
      {"final_lowercase_letter", G::Verdict, "#Final Reasoning: The critique of A was decisive.\n#Final Answer: c", 'C',
       "The critique of A was decisive.", "", {}, {}},
      {"final_outside_candidates", G::Verdict,
       "#Final Reasoning: Neither candidate explains the cavitation. #Final Answer: D", 'D',
       "Neither candidate explains the cavitation.", "", {}, {}},
      {"final_restated", G::Verdict,
       "#Final Reasoning: <A report> #Final Answer: <Only the single letter of your choice, e.g., A or B>\n"
       "#Final Reasoning: The lesion is benign. #Final Answer: A",
       'A', "The lesion is benign.", "", {}, {}},
      {"final_markdown", G::Verdict, "**#Final Reasoning:** Hemorrhage is acute.\n**#Final Answer:** B", 'B',
       "Hemorrhage is acute.", "", {}, {}},
      {"final_extra_spaces", G::Verdict, "#Final   Reasoning:   Fluid is layering.   #Final  Answer:   A  ", 'A',
       "Fluid is layering.", "", {}, {}},
  };
}

inline std::vector<Reject> rejected() {
  using G = Grammar;
  using E = ErrorCode;
  return {
      {"diag_no_answer", G::Diagnosis, "#Reasoning: The lesion is large.", E::MarkerMissing},
      {"diag_no_reasoning", G::Diagnosis, "#Answer: A", E::MarkerMissing},
      {"diag_empty", G::Diagnosis, "", E::MarkerMissing},
      {"diag_two_letters", G::Diagnosis, "#Reasoning: Unclear. #Answer: A or B", E::AnswerNotALetter},
      {"diag_word_answer", G::Diagnosis, "#Reasoning: Clear. #Answer: pneumonia", E::AnswerNotALetter},
      {"diag_digit_answer", G::Diagnosis, "#Reasoning: Clear. #Answer: 2", E::AnswerNotALetter},
      {"diag_blank_answer", G::Diagnosis, "#Reasoning: Clear. #Answer:", E::AnswerNotALetter},
      {"diag_answer_no_hash", G::Diagnosis, "Reasoning: Clear.\nAnswer: A", E::MarkerMissing},
      {"review_no_answer", G::Review, "#Review Reasoning: Consensus is valid.", E::MarkerMissing},
      {"review_no_reasoning", G::Review, "#Answer: B", E::MarkerMissing},
      {"critic_no_flaws", G::Critique, "Counter Evidence: The image is clear.", E::MarkerMissing},
      {"critic_no_counter", G::Critique, "#Flaws: Several issues.", E::MarkerMissing},
      {"critic_empty_flaws", G::Critique, "#Flaws: Counter Evidence: The image is clear.", E::EmptyResponse},
      {"critic_empty_counter", G::Critique, "#Flaws: Several issues. Counter Evidence:   ", E::EmptyResponse},
      {"inq_only_expert_1", G::Inquiries, "Inquiries:@ To Expert 1 who reviews A: why?", E::WrongArity},
      {"inq_none", G::Inquiries, "I have no questions.", E::WrongArity},
      {"inq_duplicate", G::Inquiries, "Inquiries:@ To Expert 1 who reviews A: why? @ To Expert 1 who reviews A: how?",
       E::DuplicateExpert},
      {"inq_third_expert", G::Inquiries,
       "Inquiries:@ To Expert 1 who reviews A: q1? @ To Expert 2 who reviews B: q2? @ To Expert 3 who reviews C: q3?",
       E::WrongArity},
      {"inq_missing_reviews", G::Inquiries, "Inquiries:@ To Expert 1: why? @ To Expert 2: how?", E::UnparsableHeader},
      {"inq_missing_number", G::Inquiries, "Inquiries:@ To Expert who reviews A: why? @ To Expert 2 who reviews B: how?",
       E::UnparsableHeader},
      {"inq_empty_question", G::Inquiries, "Inquiries:@ To Expert 1 who reviews A: @ To Expert 2 who reviews B: how?",
       E::UnparsableHeader},
      {"inq_word_option", G::Inquiries,
       "Inquiries:@ To Expert 1 who reviews pneumonia: why? @ To Expert 2 who reviews B: how?", E::UnparsableHeader},
      {"final_no_final_answer", G::Verdict, "#Final Reasoning: B is best. #Answer: B", E::MarkerMissing},
      {"final_no_reasoning", G::Verdict, "#Final Answer: B", E::MarkerMissing},
      {"final_two_letters", G::Verdict, "#Final Reasoning: Both plausible. #Final Answer: A, B", E::AnswerNotALetter},
      {"final_sentence_answer", G::Verdict, "#Final Reasoning: x. #Final Answer: The answer is B", E::AnswerNotALetter},
  };
}

}  // namespace corpus
