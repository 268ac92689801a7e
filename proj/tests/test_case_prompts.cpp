// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "grammar_corpus.hpp"
#include "support.hpp"
#include "ucagents/case.hpp"
#include "ucagents/prompts.hpp"

using namespace ucagents;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::IoError;
}

Bindings case_bindings(const MedicalCase& c) {
  return Bindings{{"MEDICAL CASE", format_medical_case(c)},
                  {"MEDICAL FIELD", "radiology"},
                  {"IMAGING MODALITIES", "X-ray"},
                  {"IMAGING TYPE", "chest X-ray"}};
}

}  // namespace

// ---------------------------------------------------------------------------
// MedicalCase

TEST(MedicalCase, AcceptsContiguousLetters) {
  EXPECT_NO_THROW(validate_case(fixtures::make_case("c1", 2)));
  EXPECT_NO_THROW(validate_case(fixtures::make_case("c1", 26)));
}

TEST(MedicalCase, RejectsBadShapes) {
  auto c = fixtures::make_case("c1", 4);
  c.options[2].letter = 'D';
  EXPECT_EQ(code_of([&] { validate_case(c); }), ErrorCode::InvalidCase);

  c = fixtures::make_case("c1", 1);
  EXPECT_EQ(code_of([&] { validate_case(c); }), ErrorCode::InvalidCase);

  c = fixtures::make_case("c1", 4, 'E');
  EXPECT_EQ(code_of([&] { validate_case(c); }), ErrorCode::InvalidCase);

  c = fixtures::make_case("", 4);
  EXPECT_EQ(code_of([&] { validate_case(c); }), ErrorCode::InvalidCase);

  c = fixtures::make_case("c1", 4);
  c.options[0].letter = 'a';
  EXPECT_EQ(code_of([&] { validate_case(c); }), ErrorCode::InvalidCase);
}

TEST(MedicalCase, FormatListsOptionsOnePerLine) {
  MedicalCase c;
  c.case_id = "x";
  c.question = "What is shown?";
  c.options = letter_options({"Pneumonia", "Effusion"});
  EXPECT_EQ(format_medical_case(c), "What is shown?\nA. Pneumonia\nB. Effusion");
}

// ---------------------------------------------------------------------------
// Rendering

TEST(Render, Tier1ContainsFormatInstruction) {
  const TemplateSet set;
  const auto text = render(set.get(TemplateKind::Tier1), case_bindings(fixtures::make_case("c1")));
  EXPECT_NE(text.find("#Reasoning:"), std::string::npos);
  EXPECT_NE(text.find("#Answer:"), std::string::npos);
  EXPECT_NE(text.find("A. finding 1\nB. finding 2"), std::string::npos);
  EXPECT_EQ(text.find('{'), std::string::npos);
}

TEST(Render, MissingBindingNamesThePlaceholder) {
  const TemplateSet set;
  auto b = case_bindings(fixtures::make_case("c1"));
  b.erase("MEDICAL CASE");
  try {
    render(set.get(TemplateKind::Tier1), b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingBinding);
    EXPECT_NE(std::string(e.what()).find("MEDICAL CASE"), std::string::npos);
  }
}

TEST(Render, PureAndSinglePass) {
  const PromptTemplate tpl{TemplateKind::Tier1, "a {X} b {Y} {X}"};
  const Bindings b{{"X", "{Y}"}, {"Y", "y"}};
  EXPECT_EQ(render(tpl, b), "a {Y} b y {Y}");
  EXPECT_EQ(render(tpl, b), render(tpl, b));
}

TEST(Render, LowercaseBracesAreLiteral) {
  const PromptTemplate tpl{TemplateKind::Tier1, "json {\"a\": 1} {lower} { X}"};
  EXPECT_EQ(render(tpl, {}), tpl.body);
}

TEST(Templates, DefaultPlaceholderSets) {
  const TemplateSet set;
  auto names = [&](TemplateKind k) {
    auto v = placeholders(set.get(k).body);
    return std::set<std::string>(v.begin(), v.end());
  };
  using S = std::set<std::string>;
  EXPECT_EQ(names(TemplateKind::Tier1), (S{"MEDICAL FIELD", "IMAGING MODALITIES", "IMAGING TYPE", "MEDICAL CASE"}));
  EXPECT_EQ(names(TemplateKind::Tier2), (S{"MEDICAL FIELD", "IMAGING MODALITIES", "MEDICAL CASE", "TIER 1 REPORT"}));
  EXPECT_EQ(names(TemplateKind::Critic), (S{"OPTION", "MEDICAL CASE", "AGGREGATED REPORT"}));
  EXPECT_EQ(names(TemplateKind::LeaderInquiry), (S{"MEDICAL CASE", "AGGREGATED REPORT", "RISK REPORT"}));
  EXPECT_EQ(names(TemplateKind::CriticResponse), (S{"INQUIRY"}));
  EXPECT_EQ(names(TemplateKind::LeaderVerdict), (S{"RESPONSE"}));
  EXPECT_EQ(names(TemplateKind::JudgeNoise), (S{"DIAGNOSTIC RECORD"}));
  EXPECT_EQ(names(TemplateKind::JudgeEvidence), (S{"MEDICAL CASE", "DIAGNOSTIC RECORD"}));
}

TEST(Templates, FormatBlocksMatchGrammars) {
  const TemplateSet set;
  EXPECT_NE(set.get(TemplateKind::Tier2).body.find("#Review Reasoning:"), std::string::npos);
  EXPECT_NE(set.get(TemplateKind::Critic).body.find("#Flaws:"), std::string::npos);
  EXPECT_NE(set.get(TemplateKind::Critic).body.find(" Counter Evidence:"), std::string::npos);
  EXPECT_NE(set.get(TemplateKind::LeaderInquiry).body.find("Inquiries:@ To Expert"), std::string::npos);
  EXPECT_NE(set.get(TemplateKind::LeaderVerdict).body.find("#Final Answer:"), std::string::npos);
}

TEST(Templates, LoadOverridesOnlyPresentFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "ucagents_tpl_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "tier1.txt") << "custom {MEDICAL CASE}";
  const auto set = TemplateSet::load(dir);
  EXPECT_EQ(set.get(TemplateKind::Tier1).body, "custom {MEDICAL CASE}");
  EXPECT_EQ(set.get(TemplateKind::Tier2).body, defaults::kTier2);

  set.write(dir / "out");
  const auto again = TemplateSet::load(dir / "out");
  for (auto k : kAllTemplateKinds) EXPECT_EQ(again.get(k).body, set.get(k).body);
  std::filesystem::remove_all(dir);

  EXPECT_EQ(code_of([&] { TemplateSet::load(dir / "missing"); }), ErrorCode::ConfigError);
}

TEST(Templates, CorrectiveInstructionIsVersionedText) {
  EXPECT_EQ(kCorrectiveInstructionVersion, 1);
  EXPECT_EQ(corrective_instruction(Grammar::Diagnosis).rfind(
                "Your previous output violated the required format. Output strictly: #Reasoning:", 0),
            0u);
}

// ---------------------------------------------------------------------------
// Parsing: spec examples

TEST(Parse, DiagnosisExample) {
  const auto r = parse_diagnosis("#Reasoning: lesion margins are irregular. #Answer: B");
  EXPECT_EQ(r.reasoning, "lesion margins are irregular.");
  EXPECT_EQ(r.answer, 'B');
}

TEST(Parse, AnswerNormalization) {
  EXPECT_EQ(normalize_answer("b."), 'B');
  EXPECT_EQ(normalize_answer("  (c) "), 'C');
  EXPECT_EQ(normalize_answer("**D**"), 'D');
  EXPECT_EQ(code_of([] { normalize_answer("A or B"); }), ErrorCode::AnswerNotALetter);
  EXPECT_EQ(code_of([] { normalize_answer("AB"); }), ErrorCode::AnswerNotALetter);
  EXPECT_EQ(code_of([] { normalize_answer(""); }), ErrorCode::AnswerNotALetter);
}

TEST(Parse, MissingAnswerMarker) {
  EXPECT_EQ(code_of([] { parse_diagnosis("#Reasoning: it is B"); }), ErrorCode::MarkerMissing);
}

TEST(Parse, LastOccurrenceWins) {
  const auto r = parse_diagnosis("#Reasoning: first #Answer: A\n#Reasoning: second #Answer: C");
  EXPECT_EQ(r.reasoning, "second");
  EXPECT_EQ(r.answer, 'C');
}

TEST(Parse, InquiriesExample) {
  const auto qs = parse_inquiries("Inquiries:@ To Expert 1 who reviews A: why…? @ To Expert 2 who reviews B: how…?");
  ASSERT_EQ(qs.size(), 2u);
  EXPECT_EQ(qs[0], (ParsedInquiry{1, 'A', "why…?"}));
  EXPECT_EQ(qs[1], (ParsedInquiry{2, 'B', "how…?"}));
}

TEST(Parse, InquiriesErrors) {
  EXPECT_EQ(code_of([] { parse_inquiries("@ To Expert 1 who reviews A: a? @ To Expert 1 who reviews A: b?"); }),
            ErrorCode::DuplicateExpert);
  EXPECT_EQ(code_of([] {
              parse_inquiries("@ To Expert 1 who reviews A: a? @ To Expert 2 who reviews B: b? @ To Expert 3 who "
                              "reviews C: c?");
            }),
            ErrorCode::WrongArity);
  EXPECT_EQ(code_of([] { parse_inquiries("@ To Expert 1 who reviews A: a?"); }), ErrorCode::WrongArity);
  EXPECT_EQ(code_of([] { parse_inquiries("@ To Expert one who reviews A: a? @ To Expert 2 who reviews B: b?"); }),
            ErrorCode::UnparsableHeader);
}

TEST(Parse, ReportDispatch) {
  EXPECT_TRUE(std::holds_alternative<DiagnosisReport>(parse_report("#Reasoning: x #Answer: A", Grammar::Diagnosis)));
  EXPECT_TRUE(std::holds_alternative<CritiqueReport>(parse_report("#Flaws: x Counter Evidence: y", Grammar::Critique)));
  EXPECT_TRUE(std::holds_alternative<FinalReport>(parse_report("#Final Reasoning: x #Final Answer: A", Grammar::Verdict)));
}

// ---------------------------------------------------------------------------
// Fixture corpus

TEST(Corpus, AcceptedFixturesParse) {
  for (const auto& f : corpus::accepted()) {
    SCOPED_TRACE(f.name);
    switch (f.grammar) {
      case Grammar::Diagnosis:
      case Grammar::Review: {
        const auto r = parse_diagnosis(f.raw, f.grammar);
        EXPECT_EQ(r.answer, *f.answer);
        EXPECT_EQ(r.reasoning, f.first);
        break;
      }
      case Grammar::Critique: {
        const auto r = parse_critique(f.raw);
        EXPECT_EQ(r.flaws, f.first);
        EXPECT_EQ(r.counter_evidence, f.second);
        break;
      }
      case Grammar::Inquiries: {
        const auto qs = parse_inquiries(f.raw);
        ASSERT_EQ(qs.size(), 2u);
        for (std::size_t i = 0; i < 2; ++i) {
          EXPECT_EQ(qs[i].expert, static_cast<int>(i + 1));
          EXPECT_EQ(qs[i].reviewed_option, f.options[i]);
          EXPECT_EQ(qs[i].question, f.questions[i]);
        }
        break;
      }
      case Grammar::Verdict: {
        const auto r = parse_final(f.raw);
        EXPECT_EQ(r.answer, *f.answer);
        EXPECT_EQ(r.reasoning, f.first);
        break;
      }
    }
  }
}

TEST(Corpus, RejectedFixturesRaiseTypedErrors) {
  for (const auto& f : corpus::rejected()) {
    SCOPED_TRACE(f.name);
    EXPECT_EQ(code_of([&] { parse_report(f.raw, f.grammar); }), f.code);
  }
}

TEST(Corpus, Size) { EXPECT_GE(corpus::accepted().size(), 30u); }

// ---------------------------------------------------------------------------
// Properties

namespace {

const std::vector<std::string> kWords = {"lesion", "margin", "opacity", "left", "lobe", "is", "the", "a",
                                         "irregular", "smooth", "no", "effusion", "B", "x", "2", "cm"};

std::string safe_text(std::mt19937_64& g) {
  std::string s;
  const int n = fixtures::uniform_int(g, 1, 12);
  for (int i = 0; i < n; ++i) {
    if (i) s += fixtures::uniform_int(g, 0, 5) == 0 ? "\n" : " ";
    s += kWords[static_cast<std::size_t>(fixtures::uniform_int(g, 0, static_cast<int>(kWords.size()) - 1))];
  }
  s += fixtures::uniform_int(g, 0, 1) ? "." : "?";
  return s;
}

}  // namespace

TEST(Property, ParsersAreTotal) {
  auto g = fixtures::rng(7);
  for (int i = 0; i < 20000; ++i) {
    const std::string raw = fixtures::noise_text(g);
    for (auto gr : {Grammar::Diagnosis, Grammar::Review, Grammar::Critique, Grammar::Inquiries, Grammar::Verdict}) {
      try {
        parse_report(raw, gr);
      } catch (const Error&) {
      } catch (...) {
        FAIL() << "non-typed exception for input: " << raw;
      }
    }
  }
}

TEST(Property, GrammarRoundTrip) {
  auto g = fixtures::rng(11);
  for (int i = 0; i < 2000; ++i) {
    const char letter = fixtures::random_letter(g, 26);
    const DiagnosisReport d{safe_text(g), letter};
    EXPECT_EQ(parse_diagnosis(format_diagnosis(d)), d);
    EXPECT_EQ(parse_diagnosis(format_diagnosis(d, Grammar::Review), Grammar::Review), d);
    const CritiqueReport c{safe_text(g), safe_text(g)};
    EXPECT_EQ(parse_critique(format_critique(c)), c);
    const FinalReport f{safe_text(g), letter};
    EXPECT_EQ(parse_final(format_final(f)), f);
    const std::vector<ParsedInquiry> qs = {{1, fixtures::random_letter(g, 26), safe_text(g)},
                                           {2, fixtures::random_letter(g, 26), safe_text(g)}};
    EXPECT_EQ(parse_inquiries(format_inquiries(qs)), qs);
  }
}

TEST(Property, NormalizationIdempotentAndCaseInsensitive) {
  auto g = fixtures::rng(13);
  const std::string decor = " .,;:()*\"'[]!";
  for (int i = 0; i < 5000; ++i) {
    const char letter = fixtures::random_letter(g, 26);
    std::string s;
    for (int k = fixtures::uniform_int(g, 0, 3); k > 0; --k) s += decor[static_cast<std::size_t>(fixtures::uniform_int(g, 0, 12))];
    s += fixtures::uniform_int(g, 0, 1) ? letter : static_cast<char>(std::tolower(letter));
    for (int k = fixtures::uniform_int(g, 0, 3); k > 0; --k) s += decor[static_cast<std::size_t>(fixtures::uniform_int(g, 0, 12))];
    const char once = normalize_answer(s);
    EXPECT_EQ(once, letter);
    EXPECT_EQ(normalize_answer(std::string(1, once)), once);
    EXPECT_EQ(normalize_answer(std::string(1, static_cast<char>(std::tolower(once)))), once);
  }
}
