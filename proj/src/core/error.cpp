#include "pnode/error.hpp"

namespace pnode {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownProblem: return "UnknownProblem";
    case ErrorCode::NoAnalyticSolution: return "NoAnalyticSolution";
    case ErrorCode::UnsupportedField: return "UnsupportedField";
    case ErrorCode::OrderTooLow: return "OrderTooLow";
    case ErrorCode::NoOdeOperator: return "NoOdeOperator";
    case ErrorCode::MultipleOdeOperators: return "MultipleOdeOperators";
    case ErrorCode::NonFiniteField: return "NonFiniteField";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::TooManyRejections: return "TooManyRejections";
    case ErrorCode::ReferenceInconsistent: return "ReferenceInconsistent";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace pnode
