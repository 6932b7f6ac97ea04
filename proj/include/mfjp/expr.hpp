#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfjp {

/// Compiled rate expression over simplex coordinates.
///
/// Grammar (whitespace is ignored between tokens):
///
///     expr    := term   (('+' | '-') term)*
///     term    := unary  (('*' | '/') unary)*
///     unary   := '-' unary | primary
///     primary := number
///              | 'xi' '[' label ']'
///              | ('exp' | 'log') '(' expr ')'
///              | ('min' | 'max') '(' expr ',' expr ')'
///              | '(' expr ')'
///     number  := digits ['.' digits] [('e' | 'E') ['+' | '-'] digits]   (or '.' digits ...)
///
/// Expressions compile to a postfix program; evaluation is pure and allocation-free.
class RateExpr {
 public:
  static RateExpr parse(std::string_view text, std::span<const std::string> labels);

  double operator()(std::span<const double> xi) const;

  const std::string& source() const noexcept { return source_; }

  /// Fully parenthesised rendering that parses back to an equivalent expression.
  /// Constants are written with 17 significant digits.
  std::string to_string() const;

 private:
  enum class Op : unsigned char { Const, Var, Neg, Add, Sub, Mul, Div, Exp, Log, Min, Max };
  struct Instr {
    Op op;
    int var = -1;
    double value = 0.0;
  };
  static constexpr int kMaxStack = 64;

  friend class ExprParser;

  std::vector<Instr> code_;
  std::vector<std::string> labels_;
  std::string source_;
};

/// Replaces whole-word parameter names outside `[...]` with their values (wrapped in
/// parentheses, 17 significant digits).
std::string substitute_params(std::string_view text, const std::map<std::string, double>& params);

}  // namespace mfjp
