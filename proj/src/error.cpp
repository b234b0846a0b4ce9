#include "mnid/error.hpp"

namespace mnid {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::BudgetExhausted: return "BudgetExhausted";
    case ErrorCode::BudgetInfeasible: return "BudgetInfeasible";
    case ErrorCode::UnknownPoint: return "UnknownPoint";
    case ErrorCode::AlreadyLabeled: return "AlreadyLabeled";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::UnknownMethod: return "UnknownMethod";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyOodSet: return "EmptyOodSet";
    case ErrorCode::SampleTooLarge: return "SampleTooLarge";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
    case ErrorCode::SessionBusy: return "SessionBusy";
    case ErrorCode::NoSession: return "NoSession";
    case ErrorCode::UnknownRequest: return "UnknownRequest";
    case ErrorCode::DuplicateSubmission: return "DuplicateSubmission";
    case ErrorCode::ReportNotReady: return "ReportNotReady";
    case ErrorCode::Cancelled: return "Cancelled";
  }
  return "Unknown";
}

}  // namespace mnid
