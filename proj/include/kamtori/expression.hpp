#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kamtori {

// Closed-form scalar expression over canonical variables p1..pn, q1..qn.
//
// Grammar: + - * / ^ (right associative), unary minus, parentheses, numeric
// literals, the constants pi and e, and the functions sin cos tan asin acos
// atan sinh cosh tanh exp log sqrt abs. For n == 1 the bare names p and q are
// accepted as aliases of p1 and q1. Parse failures throw ConfigError with the
// column of the offending token.
class Expression {
 public:
  Expression(std::string_view source, std::size_t dof);

  double evaluate(std::span<const double> p, std::span<const double> q) const;

  const std::string& source() const { return source_; }
  std::size_t dof() const { return dof_; }

 private:
  enum class Op : unsigned char {
    kConst, kP, kQ, kAdd, kSub, kMul, kDiv, kPow, kNeg,
    kSin, kCos, kTan, kAsin, kAcos, kAtan, kSinh, kCosh, kTanh, kExp, kLog, kSqrt, kAbs
  };
  struct Instr {
    Op op;
    std::size_t index = 0;
    double value = 0.0;
  };

  friend class ExpressionParser;

  std::string source_;
  std::size_t dof_;
  std::vector<Instr> program_;  // postfix
  std::size_t max_stack_ = 0;
};

}  // namespace kamtori
