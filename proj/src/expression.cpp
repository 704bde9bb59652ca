#include "kamtori/expression.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>

#include "kamtori/errors.hpp"

namespace kamtori {

class ExpressionParser {
 public:
  ExpressionParser(std::string_view src, std::size_t dof, std::vector<Expression::Instr>& out)
      : src_(src), dof_(dof), out_(out) {}

  void parse() {
    parse_sum();
    skip_space();
    if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
  }

 private:
  using Op = Expression::Op;

  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression \"" + std::string(src_) + "\", column " + std::to_string(pos_ + 1) +
                      ": " + what);
  }

  void skip_space() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_space();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void emit(Op op, std::size_t index = 0, double value = 0.0) { out_.push_back({op, index, value}); }

  void parse_sum() {
    parse_product();
    for (;;) {
      if (accept('+')) {
        parse_product();
        emit(Op::kAdd);
      } else if (accept('-')) {
        parse_product();
        emit(Op::kSub);
      } else {
        return;
      }
    }
  }

  void parse_product() {
    parse_unary();
    for (;;) {
      if (accept('*')) {
        parse_unary();
        emit(Op::kMul);
      } else if (accept('/')) {
        parse_unary();
        emit(Op::kDiv);
      } else {
        return;
      }
    }
  }

  // Unary minus binds looser than ^ so that -q^2 == -(q^2).
  void parse_unary() {
    if (accept('-')) {
      parse_unary();
      emit(Op::kNeg);
    } else if (accept('+')) {
      parse_unary();
    } else {
      parse_power();
    }
  }

  void parse_power() {
    parse_primary();
    if (accept('^')) {
      parse_unary();
      emit(Op::kPow);
    }
  }

  void parse_primary() {
    skip_space();
    if (pos_ >= src_.size()) fail("unexpected end of expression");
    const char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      parse_sum();
      if (!accept(')')) fail("expected ')'");
      return;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      parse_number();
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      parse_identifier();
      return;
    }
    fail("unexpected '" + std::string(1, c) + "'");
  }

  void parse_number() {
    const std::size_t start = pos_;
    const std::string rest(src_.substr(start));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("malformed number");
    }
    pos_ = start + used;
    emit(Op::kConst, 0, v);
  }

  void parse_identifier() {
    const std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    const std::string name(src_.substr(start, pos_ - start));

    static constexpr std::array<std::pair<std::string_view, Op>, 14> kFunctions{{
        {"sin", Op::kSin},   {"cos", Op::kCos},   {"tan", Op::kTan},   {"asin", Op::kAsin},
        {"acos", Op::kAcos}, {"atan", Op::kAtan}, {"sinh", Op::kSinh}, {"cosh", Op::kCosh},
        {"tanh", Op::kTanh}, {"exp", Op::kExp},   {"log", Op::kLog},   {"sqrt", Op::kSqrt},
        {"abs", Op::kAbs},   {"ln", Op::kLog},
    }};
    for (const auto& [fname, op] : kFunctions) {
      if (name == fname) {
        if (!accept('(')) fail("expected '(' after " + name);
        parse_sum();
        if (!accept(')')) fail("expected ')'");
        emit(op);
        return;
      }
    }
    if (name == "pi") return emit(Op::kConst, 0, std::numbers::pi);
    if (name == "e") return emit(Op::kConst, 0, std::numbers::e);

    if ((name[0] == 'p' || name[0] == 'q')) {
      const Op op = name[0] == 'p' ? Op::kP : Op::kQ;
      if (name.size() == 1 && dof_ == 1) return emit(op, 0);
      const std::string digits = name.substr(1);
      if (!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos) {
        const std::size_t idx = std::stoul(digits);
        if (idx >= 1 && idx <= dof_) return emit(op, idx - 1);
        pos_ = start;
        fail("variable " + name + " out of range for " + std::to_string(dof_) + " degrees of freedom");
      }
    }
    pos_ = start;
    fail("unknown identifier '" + name + "'");
  }

  std::string_view src_;
  std::size_t dof_;
  std::vector<Expression::Instr>& out_;
  std::size_t pos_ = 0;
};

Expression::Expression(std::string_view source, std::size_t dof) : source_(source), dof_(dof) {
  if (dof == 0) throw ConfigError("expression needs at least one degree of freedom");
  ExpressionParser(source_, dof_, program_).parse();

  std::size_t depth = 0;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::kConst:
      case Op::kP:
      case Op::kQ:
        ++depth;
        break;
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv:
      case Op::kPow:
        --depth;
        break;
      default:
        break;
    }
    max_stack_ = std::max(max_stack_, depth);
  }
}

double Expression::evaluate(std::span<const double> p, std::span<const double> q) const {
  // Small fixed stack covers every practical expression; fall back to the heap otherwise.
  std::array<double, 64> local{};
  std::vector<double> heap;
  double* stack = local.data();
  if (max_stack_ > local.size()) {
    heap.resize(max_stack_);
    stack = heap.data();
  }
  std::size_t top = 0;
  for (const auto& ins : program_) {
    switch (ins.op) {
      case Op::kConst: stack[top++] = ins.value; break;
      case Op::kP: stack[top++] = p[ins.index]; break;
      case Op::kQ: stack[top++] = q[ins.index]; break;
      case Op::kAdd: --top; stack[top - 1] += stack[top]; break;
      case Op::kSub: --top; stack[top - 1] -= stack[top]; break;
      case Op::kMul: --top; stack[top - 1] *= stack[top]; break;
      case Op::kDiv: --top; stack[top - 1] /= stack[top]; break;
      case Op::kPow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
      case Op::kNeg: stack[top - 1] = -stack[top - 1]; break;
      case Op::kSin: stack[top - 1] = std::sin(stack[top - 1]); break;
      case Op::kCos: stack[top - 1] = std::cos(stack[top - 1]); break;
      case Op::kTan: stack[top - 1] = std::tan(stack[top - 1]); break;
      case Op::kAsin: stack[top - 1] = std::asin(stack[top - 1]); break;
      case Op::kAcos: stack[top - 1] = std::acos(stack[top - 1]); break;
      case Op::kAtan: stack[top - 1] = std::atan(stack[top - 1]); break;
      case Op::kSinh: stack[top - 1] = std::sinh(stack[top - 1]); break;
      case Op::kCosh: stack[top - 1] = std::cosh(stack[top - 1]); break;
      case Op::kTanh: stack[top - 1] = std::tanh(stack[top - 1]); break;
      case Op::kExp: stack[top - 1] = std::exp(stack[top - 1]); break;
      case Op::kLog: stack[top - 1] = std::log(stack[top - 1]); break;
      case Op::kSqrt: stack[top - 1] = std::sqrt(stack[top - 1]); break;
      case Op::kAbs: stack[top - 1] = std::abs(stack[top - 1]); break;
    }
  }
  return stack[0];
}

}  // namespace kamtori
