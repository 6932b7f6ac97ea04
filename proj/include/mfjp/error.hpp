#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfjp {

enum class ErrorKind {
  Syntax,
  UnknownLabel,
  InvalidArgument,
  NotIrreducible,
  RateOutOfBounds,
  CapExceeded,
  NonConvergent,
  InfiniteAction,
  Unreachable,
  NotReversible,
  SolveFailed,
  Domain,
  StepRejected,
  Unresolved,
  AllInfinite,
  AllCensored,
  NonTermination,
  Disagreement,
  LimitCycleSuspected,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Exit code used by the command line tool for an error of the given kind:
/// 2 for validation problems, 3 for numerical failures, 4 for exceeded caps.
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mfjp
