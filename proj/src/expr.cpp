#include "mfjp/expr.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "mfjp/error.hpp"

namespace mfjp {
namespace {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

}  // namespace

class ExprParser {
 public:
  ExprParser(std::string_view text, std::span<const std::string> labels)
      : text_(text), labels_(labels) {}

  RateExpr run() {
    RateExpr out;
    out.source_ = std::string(text_);
    out.labels_.assign(labels_.begin(), labels_.end());
    code_ = &out.code_;
    parse_expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected trailing input");
    if (max_depth_ > RateExpr::kMaxStack) fail("expression nested too deeply");
    return out;
  }

 private:
  using Op = RateExpr::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorKind::Syntax, what + " at position " + std::to_string(pos_) + " in '" +
                                       std::string(text_) + "'");
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  void emit(Op op, int var = -1, double value = 0.0) {
    code_->push_back({op, var, value});
    switch (op) {
      case Op::Const:
      case Op::Var:
        ++depth_;
        break;
      case Op::Add:
      case Op::Sub:
      case Op::Mul:
      case Op::Div:
      case Op::Min:
      case Op::Max:
        --depth_;
        break;
      default:
        break;
    }
    if (depth_ > max_depth_) max_depth_ = depth_;
  }

  void parse_expr() {
    parse_term();
    for (;;) {
      if (accept('+')) {
        parse_term();
        emit(Op::Add);
      } else if (accept('-')) {
        parse_term();
        emit(Op::Sub);
      } else {
        return;
      }
    }
  }

  void parse_term() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::Mul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::Div);
      } else {
        return;
      }
    }
  }

  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::Neg);
      return;
    }
    parse_primary();
  }

  void parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      parse_expr();
      expect(')');
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    if (is_ident_start(c)) {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && is_ident_char(text_[pos_])) ++pos_;
      const std::string_view name = text_.substr(start, pos_ - start);
      if (name == "xi") {
        parse_variable();
      } else if (name == "exp" || name == "log") {
        expect('(');
        parse_expr();
        expect(')');
        emit(name == "exp" ? Op::Exp : Op::Log);
      } else if (name == "min" || name == "max") {
        expect('(');
        parse_expr();
        expect(',');
        parse_expr();
        expect(')');
        emit(name == "min" ? Op::Min : Op::Max);
      } else {
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
      }
      return;
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  void parse_number() {
    const std::size_t start = pos_;
    auto digits = [&] {
      std::size_t n = 0;
      while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
        ++pos_;
        ++n;
      }
      return n;
    };
    std::size_t n = digits();
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      n += digits();
    }
    if (n == 0) fail("malformed number");
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < text_.size() && (text_[pos_] == '+' || text_[pos_] == '-')) ++pos_;
      if (digits() == 0) fail("malformed exponent");
    }
    const std::string literal(text_.substr(start, pos_ - start));
    const double value = std::strtod(literal.c_str(), nullptr);
    if (!std::isfinite(value)) fail("constant out of range");
    emit(Op::Const, -1, value);
  }

  void parse_variable() {
    expect('[');
    skip_ws();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && text_[pos_] != ']') ++pos_;
    if (pos_ >= text_.size()) fail("unterminated state reference");
    std::string_view label = text_.substr(start, pos_ - start);
    while (!label.empty() && std::isspace(static_cast<unsigned char>(label.back())))
      label.remove_suffix(1);
    ++pos_;
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      if (labels_[i] == label) {
        emit(Op::Var, static_cast<int>(i));
        return;
      }
    }
    throw Error(ErrorKind::UnknownLabel, "unknown state label '" + std::string(label) +
                                             "' at position " + std::to_string(start) + " in '" +
                                             std::string(text_) + "'");
  }

  std::string_view text_;
  std::span<const std::string> labels_;
  std::vector<RateExpr::Instr>* code_ = nullptr;
  std::size_t pos_ = 0;
  int depth_ = 0;
  int max_depth_ = 0;
};

RateExpr RateExpr::parse(std::string_view text, std::span<const std::string> labels) {
  return ExprParser(text, labels).run();
}

double RateExpr::operator()(std::span<const double> xi) const {
  std::array<double, kMaxStack> stack;
  int top = -1;
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::Const: stack[++top] = ins.value; break;
      case Op::Var: stack[++top] = xi[static_cast<std::size_t>(ins.var)]; break;
      case Op::Neg: stack[top] = -stack[top]; break;
      case Op::Exp: stack[top] = std::exp(stack[top]); break;
      case Op::Log: stack[top] = std::log(stack[top]); break;
      case Op::Add: --top; stack[top] += stack[top + 1]; break;
      case Op::Sub: --top; stack[top] -= stack[top + 1]; break;
      case Op::Mul: --top; stack[top] *= stack[top + 1]; break;
      case Op::Div: --top; stack[top] /= stack[top + 1]; break;
      case Op::Min: --top; stack[top] = std::min(stack[top], stack[top + 1]); break;
      case Op::Max: --top; stack[top] = std::max(stack[top], stack[top + 1]); break;
    }
  }
  return stack[0];
}

std::string RateExpr::to_string() const {
  std::vector<std::string> parts;
  auto pop = [&] {
    std::string s = std::move(parts.back());
    parts.pop_back();
    return s;
  };
  for (const Instr& ins : code_) {
    switch (ins.op) {
      case Op::Const: parts.push_back("(" + format_number(ins.value) + ")"); break;
      case Op::Var: parts.push_back("xi[" + labels_[static_cast<std::size_t>(ins.var)] + "]"); break;
      case Op::Neg: parts.push_back("(-" + pop() + ")"); break;
      case Op::Exp: parts.push_back("exp(" + pop() + ")"); break;
      case Op::Log: parts.push_back("log(" + pop() + ")"); break;
      default: {
        std::string rhs = pop();
        std::string lhs = pop();
        switch (ins.op) {
          case Op::Add: parts.push_back("(" + lhs + " + " + rhs + ")"); break;
          case Op::Sub: parts.push_back("(" + lhs + " - " + rhs + ")"); break;
          case Op::Mul: parts.push_back("(" + lhs + " * " + rhs + ")"); break;
          case Op::Div: parts.push_back("(" + lhs + " / " + rhs + ")"); break;
          case Op::Min: parts.push_back("min(" + lhs + ", " + rhs + ")"); break;
          case Op::Max: parts.push_back("max(" + lhs + ", " + rhs + ")"); break;
          default: break;
        }
      }
    }
  }
  return parts.empty() ? std::string() : parts.back();
}

std::string substitute_params(std::string_view text, const std::map<std::string, double>& params) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  int bracket = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '[') ++bracket;
    if (c == ']' && bracket > 0) --bracket;
    if (bracket == 0 && is_ident_start(c) &&
        (i == 0 || !(is_ident_char(text[i - 1]) || text[i - 1] == '.'))) {
      std::size_t j = i;
      while (j < text.size() && is_ident_char(text[j])) ++j;
      const std::string name(text.substr(i, j - i));
      if (auto it = params.find(name); it != params.end()) {
        out += "(" + format_number(it->second) + ")";
      } else {
        out += name;
      }
      i = j;
      continue;
    }
    out += c;
    ++i;
  }
  return out;
}

}  // namespace mfjp
