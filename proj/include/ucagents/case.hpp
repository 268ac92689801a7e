// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ucagents/error.hpp"

namespace ucagents {

struct Option {
  char letter = 'A';
  std::string text;
};

struct Image {
  std::vector<std::uint8_t> bytes;
  std::string media_type = "image/png";
};

/// One VQA instance. Options are lettered A, B, C, ... in order.
struct MedicalCase {
  std::string case_id;
  std::optional<Image> image;
  std::string question;
  std::vector<Option> options;
  std::optional<char> gold_answer;
  std::optional<std::string> field_hint;
  std::optional<std::string> imaging_modalities;
  std::optional<std::string> imaging_type;

  bool has_option(char letter) const {
    for (const auto& o : options) {
      if (o.letter == letter) return true;
    }
    return false;
  }
};

/// Builds lettered options A.. from plain texts.
inline std::vector<Option> letter_options(const std::vector<std::string>& texts) {
  std::vector<Option> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(Option{static_cast<char>('A' + i), texts[i]});
  }
  return out;
}

inline void validate_case(const MedicalCase& c) {
  if (c.case_id.empty()) throw Error(ErrorCode::InvalidCase, "empty case_id");
  if (c.question.empty()) throw Error(ErrorCode::InvalidCase, c.case_id + ": empty question");
  if (c.options.size() < 2 || c.options.size() > 26) {
    throw Error(ErrorCode::InvalidCase,
                c.case_id + ": expected 2-26 options, got " + std::to_string(c.options.size()));
  }
  for (std::size_t i = 0; i < c.options.size(); ++i) {
    const char expected = static_cast<char>('A' + i);
    if (c.options[i].letter != expected) {
      throw Error(ErrorCode::InvalidCase, c.case_id + ": option letters must run A, B, C, ... (got '" +
                                              std::string(1, c.options[i].letter) + "' at position " +
                                              std::to_string(i + 1) + ")");
    }
  }
  if (c.gold_answer && !c.has_option(*c.gold_answer)) {
    throw Error(ErrorCode::InvalidCase,
                c.case_id + ": gold answer '" + std::string(1, *c.gold_answer) + "' is not an option");
  }
}

}  // namespace ucagents
