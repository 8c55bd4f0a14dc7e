#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace smpf {

// Parsed closed-form expression in the library grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-')* primary
//   primary := NUMBER | 'x_' INT | FUNC '(' expr ')' | '(' expr ')'
//   FUNC    := exp | sin | log | atan | sqrt | sinc
//
// Whitespace is insignificant. Evaluation applies the same domain guards as
// the primitive functions (log floor at kDomainEps, denominator magnitude
// clamp, exp argument cap, output cap), so a rendered metamodel re-parses to
// the same guarded values. sqrt clamps negative arguments to 0;
// sinc(u) = sin(pi*u)/(pi*u) with sinc(0) = 1.
class Expression {
 public:
  Expression() = default;

  // Throws ParseError (with byte position) on malformed input.
  static Expression parse(std::string_view text);

  // Evaluates at x; variables x_i index into the span. Throws DataError if
  // a variable index is out of range.
  double eval(std::span<const double> x) const;

  // Largest variable index referenced, or -1 for a constant expression.
  int max_var_index() const { return max_var_; }

  const std::string& text() const { return text_; }

 private:
  enum class Op : std::uint8_t {
    kConst, kVar, kAdd, kSub, kMul, kDiv, kNeg,
    kExp, kSin, kLog, kAtan, kSqrt, kSinc,
  };
  struct Node {
    Op op = Op::kConst;
    std::int32_t lhs = -1;
    std::int32_t rhs = -1;
    double value = 0.0;  // kConst payload; variable index for kVar
  };

  std::vector<Node> nodes_;  // arena; root is nodes_.back()
  std::string text_;
  int max_var_ = -1;

  friend class ExprParser;
};

}  // namespace smpf
