// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ucagents {

enum class ErrorCode {
  InvalidCase,
  PreconditionViolation,
  // backend
  BackendUnavailable,
  ContractViolation,
  ScriptUnmatched,
  ReplayDivergence,
  // prompts
  MissingBinding,
  MarkerMissing,
  AnswerNotALetter,
  AnswerNotAnOption,
  WrongArity,
  DuplicateExpert,
  UnparsableHeader,
  EmptyResponse,
  // protocol
  ParseExhausted,
  InquiryMismatch,
  // metrics
  EmptyTrajectory,
  MissingGold,
  JudgeUnavailable,
  JudgeOutputUnparsable,
  // harness
  MalformedRecord,
  DuplicateCaseId,
  ImageTooLarge,
  OutputUnwritable,
  ConfigError,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidCase: return "InvalidCase";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::ContractViolation: return "ContractViolation";
    case ErrorCode::ScriptUnmatched: return "ScriptUnmatched";
    case ErrorCode::ReplayDivergence: return "ReplayDivergence";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::MarkerMissing: return "MarkerMissing";
    case ErrorCode::AnswerNotALetter: return "AnswerNotALetter";
    case ErrorCode::AnswerNotAnOption: return "AnswerNotAnOption";
    case ErrorCode::WrongArity: return "WrongArity";
    case ErrorCode::DuplicateExpert: return "DuplicateExpert";
    case ErrorCode::UnparsableHeader: return "UnparsableHeader";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::ParseExhausted: return "ParseExhausted";
    case ErrorCode::InquiryMismatch: return "InquiryMismatch";
    case ErrorCode::EmptyTrajectory: return "EmptyTrajectory";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::JudgeOutputUnparsable: return "JudgeOutputUnparsable";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateCaseId: return "DuplicateCaseId";
    case ErrorCode::ImageTooLarge: return "ImageTooLarge";
    case ErrorCode::OutputUnwritable: return "OutputUnwritable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// The single exception type thrown by the library. Callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ucagents
