#include "mfjp/error.hpp"

namespace mfjp {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Syntax: return "SyntaxError";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NotIrreducible: return "NotIrreducible";
    case ErrorKind::RateOutOfBounds: return "RateOutOfBounds";
    case ErrorKind::CapExceeded: return "CapExceeded";
    case ErrorKind::NonConvergent: return "NonConvergent";
    case ErrorKind::InfiniteAction: return "InfiniteAction";
    case ErrorKind::Unreachable: return "Unreachable";
    case ErrorKind::NotReversible: return "NotReversible";
    case ErrorKind::SolveFailed: return "SolveFailed";
    case ErrorKind::Domain: return "DomainError";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::Unresolved: return "Unresolved";
    case ErrorKind::AllInfinite: return "AllInfinite";
    case ErrorKind::AllCensored: return "AllCensored";
    case ErrorKind::NonTermination: return "NonTermination";
    case ErrorKind::Disagreement: return "DisagreementBeyondTolerance";
    case ErrorKind::LimitCycleSuspected: return "LimitCycleSuspected";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::CapExceeded:
      return 4;
    case ErrorKind::NonConvergent:
    case ErrorKind::InfiniteAction:
    case ErrorKind::Unreachable:
    case ErrorKind::NotReversible:
    case ErrorKind::SolveFailed:
    case ErrorKind::StepRejected:
    case ErrorKind::Unresolved:
    case ErrorKind::AllInfinite:
    case ErrorKind::AllCensored:
    case ErrorKind::NonTermination:
    case ErrorKind::Disagreement:
    case ErrorKind::LimitCycleSuspected:
      return 3;
    default:
      return 2;
  }
}

}  // namespace mfjp
