#include "smpf/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "smpf/errors.hpp"
#include "smpf/primitives.hpp"

namespace smpf {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

class ExprParser {
 public:
  explicit ExprParser(std::string_view text) : text_(text) {}

  Expression run() {
    Expression e;
    e.text_ = std::string(text_);
    nodes_ = &e.nodes_;
    max_var_ = &e.max_var_;
    const std::int32_t root = parse_expr();
    skip_ws();
    if (pos_ != text_.size()) throw ParseError("unexpected trailing input", pos_);
    if (root < 0 || nodes_->empty()) throw ParseError("empty expression", 0);
    // Root must be the last node so eval can return the final slot.
    if (root != static_cast<std::int32_t>(nodes_->size()) - 1) {
      nodes_->push_back((*nodes_)[root]);
    }
    return e;
  }

 private:
  using Op = Expression::Op;
  using Node = Expression::Node;

  std::string_view text_;
  std::size_t pos_ = 0;
  std::vector<Node>* nodes_ = nullptr;
  int* max_var_ = nullptr;

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool consume(char ch) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == ch) {
      ++pos_;
      return true;
    }
    return false;
  }

  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }

  std::int32_t add(Node n) {
    nodes_->push_back(n);
    return static_cast<std::int32_t>(nodes_->size()) - 1;
  }

  std::int32_t parse_expr() {
    std::int32_t lhs = parse_term();
    while (true) {
      if (consume('+')) {
        lhs = add({Op::kAdd, lhs, parse_term(), 0.0});
      } else if (consume('-')) {
        lhs = add({Op::kSub, lhs, parse_term(), 0.0});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_term() {
    std::int32_t lhs = parse_unary();
    while (true) {
      if (consume('*')) {
        lhs = add({Op::kMul, lhs, parse_unary(), 0.0});
      } else if (consume('/')) {
        lhs = add({Op::kDiv, lhs, parse_unary(), 0.0});
      } else {
        return lhs;
      }
    }
  }

  std::int32_t parse_unary() {
    bool negate = false;
    while (true) {
      if (consume('-')) {
        negate = !negate;
      } else if (consume('+')) {
        // no-op
      } else {
        break;
      }
    }
    const std::int32_t inner = parse_primary();
    return negate ? add({Op::kNeg, inner, -1, 0.0}) : inner;
  }

  std::int32_t parse_primary() {
    skip_ws();
    if (pos_ >= text_.size()) throw ParseError("unexpected end of expression", pos_);
    const char ch = text_[pos_];

    if (ch == '(') {
      ++pos_;
      const std::int32_t inner = parse_expr();
      if (!consume(')')) throw ParseError("expected ')'", pos_);
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(ch)) || ch == '.') {
      return parse_number();
    }
    if (std::isalpha(static_cast<unsigned char>(ch))) {
      return parse_ident();
    }
    throw ParseError(std::string("unexpected character '") + ch + "'", pos_);
  }

  std::int32_t parse_number() {
    const char* begin = text_.data() + pos_;
    const char* end = text_.data() + text_.size();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc()) throw ParseError("malformed number", pos_);
    pos_ += static_cast<std::size_t>(ptr - begin);
    return add({Op::kConst, -1, -1, value});
  }

  std::int32_t parse_ident() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string_view ident = text_.substr(start, pos_ - start);

    if (ident.size() > 2 && ident.substr(0, 2) == "x_") {
      int index = -1;
      const auto digits = ident.substr(2);
      const auto [ptr, ec] =
          std::from_chars(digits.data(), digits.data() + digits.size(), index);
      if (ec != std::errc() || ptr != digits.data() + digits.size() || index < 0) {
        throw ParseError("malformed variable (expected x_<i>)", start);
      }
      if (index > *max_var_) *max_var_ = index;
      return add({Op::kVar, -1, -1, static_cast<double>(index)});
    }

    Op op;
    if (ident == "exp") op = Op::kExp;
    else if (ident == "sin") op = Op::kSin;
    else if (ident == "log") op = Op::kLog;
    else if (ident == "atan") op = Op::kAtan;
    else if (ident == "sqrt") op = Op::kSqrt;
    else if (ident == "sinc") op = Op::kSinc;
    else throw ParseError("unknown identifier '" + std::string(ident) + "'", start);

    if (!consume('(')) throw ParseError("expected '(' after function name", pos_);
    const std::int32_t inner = parse_expr();
    if (!consume(')')) throw ParseError("expected ')'", pos_);
    return add({op, inner, -1, 0.0});
  }
};

Expression Expression::parse(std::string_view text) {
  return ExprParser(text).run();
}

double Expression::eval(std::span<const double> x) const {
  if (nodes_.empty()) return 0.0;
  // Nodes are in topological (creation) order; evaluate the arena in order.
  std::vector<double> v(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    double out = 0.0;
    switch (n.op) {
      case Op::kConst: out = n.value; break;
      case Op::kVar: {
        const auto idx = static_cast<std::size_t>(n.value);
        if (idx >= x.size()) {
          throw DataError("expression references x_" + std::to_string(idx) +
                          " but only " + std::to_string(x.size()) +
                          " features were provided");
        }
        out = x[idx];
        break;
      }
      case Op::kAdd: out = v[n.lhs] + v[n.rhs]; break;
      case Op::kSub: out = v[n.lhs] - v[n.rhs]; break;
      case Op::kMul: out = v[n.lhs] * v[n.rhs]; break;
      case Op::kDiv: out = v[n.lhs] / clamp_magnitude(v[n.rhs], kDomainEps); break;
      case Op::kNeg: out = -v[n.lhs]; break;
      case Op::kExp: {
        double arg = v[n.lhs];
        if (arg > kExpArgCap) arg = kExpArgCap;
        out = std::exp(arg);
        break;
      }
      case Op::kSin: out = std::sin(v[n.lhs]); break;
      case Op::kLog: {
        const double u = v[n.lhs];
        out = std::log(u > kDomainEps ? u : kDomainEps);
        break;
      }
      case Op::kAtan: out = std::atan(v[n.lhs]); break;
      case Op::kSqrt: out = std::sqrt(v[n.lhs] > 0.0 ? v[n.lhs] : 0.0); break;
      case Op::kSinc: {
        const double u = v[n.lhs];
        out = u == 0.0 ? 1.0 : std::sin(kPi * u) / (kPi * u);
        break;
      }
    }
    v[i] = sanitize(out);
  }
  return v.back();
}

}  // namespace smpf
