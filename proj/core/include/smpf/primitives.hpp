#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "smpf/rng.hpp"

namespace smpf {

// Guard constants shared by primitive evaluation and the expression
// evaluator, so a rendered expression reproduces the same guarded values.
inline constexpr double kDomainEps = 1e-6;   // log floor, denominator clamp
inline constexpr double kValueCap = 1e30;    // output magnitude cap
inline constexpr double kExpArgCap = 700.0;  // exp argument cap (exp(700) is finite)

// Clamps to [-kValueCap, kValueCap] and maps NaN to 0 so every evaluation
// path is a total function over finite inputs.
inline double sanitize(double v) {
  if (std::isnan(v)) return 0.0;
  if (v > kValueCap) return kValueCap;
  if (v < -kValueCap) return -kValueCap;
  return v;
}

// Clamps |q| up to eps while preserving sign (sign of 0 taken as +).
inline double clamp_magnitude(double q, double eps) {
  if (q >= eps || q <= -eps) return q;
  return q < 0.0 ? -eps : eps;
}

// The univariate parameterized function classes carried by tree edges.
//
//   kPoly3     a*x^3 + b*x^2 + c*x + d
//   kExpDecay  a*exp(-b*x)
//   kSinusoid  a*sin(b*x + c)
//   kLogAffine a*log(max(b*x + c, eps))
//   kRational  a*x / (b*x^2 + c*x + d), denominator magnitude-clamped
//   kArcTan    a*atan(b*x + c)
//   kMobius    (a*x + b) / (c*x + d), denominator magnitude-clamped
enum class PrimitiveClass : std::uint8_t {
  kPoly3 = 0,
  kExpDecay,
  kSinusoid,
  kLogAffine,
  kRational,
  kArcTan,
  kMobius,
};

inline constexpr int kPrimitiveClassCount = 7;
inline constexpr int kMaxArity = 4;

int arity(PrimitiveClass cls);
std::string_view class_name(PrimitiveClass cls);
std::optional<PrimitiveClass> class_from_name(std::string_view name);

// One edge function: a class tag plus its parameter vector. Parameters
// beyond arity(cls) are kept at zero and never read.
struct PrimitiveFunction {
  PrimitiveClass cls = PrimitiveClass::kPoly3;
  std::array<double, kMaxArity> params{};

  int arity() const { return smpf::arity(cls); }

  friend bool operator==(const PrimitiveFunction&, const PrimitiveFunction&) = default;
};

// Value of f at x under the domain guards above. Total: never NaN or +-inf
// for finite inputs.
double eval_primitive(const PrimitiveFunction& f, double x);

// Analytic df/dx. Inside a guard-clamped region the derivative of the
// clamped branch is returned (zero through an active log floor; quotient
// rule with frozen denominator through an active denominator clamp).
double deriv_primitive_x(const PrimitiveFunction& f, double x);

// Analytic df/dp for every parameter, written to out[0 .. arity).
void grad_primitive_params(const PrimitiveFunction& f, double x, std::span<double> out);

// Value, input derivative, and parameter gradient in one pass; the
// backward pass uses this so each edge is evaluated once per point.
struct PrimitiveEval {
  double value = 0.0;
  double dx = 0.0;
  std::array<double, kMaxArity> dparam{};
};
PrimitiveEval eval_primitive_all(const PrimitiveFunction& f, double x);

// Fresh function of the given class with parameters drawn i.i.d. from the
// standard normal distribution of `rng`.
PrimitiveFunction init_primitive(PrimitiveClass cls, RngStream& rng);

// Infix rendering with coefficients rounded to `precision` decimals, in the
// grammar accepted by Expression::parse. `arg` is substituted for the
// function input and parenthesized unless it is a bare identifier/number.
std::string render_primitive(const PrimitiveFunction& f, std::string_view arg, int precision);

// A nonempty, duplicate-free list of classes available to the search.
struct FunctionSet {
  std::vector<PrimitiveClass> classes;
  std::string name;  // preset name when constructed from one, else "custom"

  // Named presets: "main5" (poly3, expdecay, sinusoid, logaffine, rational),
  // "set1" (expdecay, sinusoid, poly3), "set2" (poly3, arctan, mobius).
  static FunctionSet preset(std::string_view name);

  friend bool operator==(const FunctionSet&, const FunctionSet&) = default;
};

}  // namespace smpf
