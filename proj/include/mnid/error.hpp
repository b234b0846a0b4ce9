#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mnid {

enum class ErrorCode {
  BudgetExhausted,
  BudgetInfeasible,
  UnknownPoint,
  AlreadyLabeled,
  ParseError,
  DuplicateId,
  InvalidSplit,
  BadMagic,
  CountMismatch,
  NonFiniteValue,
  ZeroNormRow,
  InvalidSpec,
  DegenerateLabels,
  NonFiniteLoss,
  UnknownMethod,
  MissingGold,
  KTooLarge,
  EmptyInput,
  EmptyOodSet,
  SampleTooLarge,
  LengthMismatch,
  InvalidConfig,
  Io,
  SessionBusy,
  NoSession,
  UnknownRequest,
  DuplicateSubmission,
  ReportNotReady,
  Cancelled,
};

std::string_view error_name(ErrorCode code);

// Every failure in the engine surfaces as this type; `code()` is the stable
// discriminator tests and the HTTP layer switch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mnid
