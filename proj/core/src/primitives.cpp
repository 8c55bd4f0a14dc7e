#include "smpf/primitives.hpp"

#include <cassert>
#include <cmath>
#include <cstdio>

#include "smpf/errors.hpp"

namespace smpf {

int arity(PrimitiveClass cls) {
  switch (cls) {
    case PrimitiveClass::kPoly3:     return 4;
    case PrimitiveClass::kExpDecay:  return 2;
    case PrimitiveClass::kSinusoid:  return 3;
    case PrimitiveClass::kLogAffine: return 3;
    case PrimitiveClass::kRational:  return 4;
    case PrimitiveClass::kArcTan:    return 3;
    case PrimitiveClass::kMobius:    return 4;
  }
  return 0;
}

std::string_view class_name(PrimitiveClass cls) {
  switch (cls) {
    case PrimitiveClass::kPoly3:     return "poly3";
    case PrimitiveClass::kExpDecay:  return "expdecay";
    case PrimitiveClass::kSinusoid:  return "sinusoid";
    case PrimitiveClass::kLogAffine: return "logaffine";
    case PrimitiveClass::kRational:  return "rational";
    case PrimitiveClass::kArcTan:    return "arctan";
    case PrimitiveClass::kMobius:    return "mobius";
  }
  return "?";
}

std::optional<PrimitiveClass> class_from_name(std::string_view name) {
  for (int i = 0; i < kPrimitiveClassCount; ++i) {
    const auto cls = static_cast<PrimitiveClass>(i);
    if (class_name(cls) == name) return cls;
  }
  return std::nullopt;
}

PrimitiveEval eval_primitive_all(const PrimitiveFunction& f, double x) {
  const auto& p = f.params;
  PrimitiveEval r;
  switch (f.cls) {
    case PrimitiveClass::kPoly3: {
      const double a = p[0], b = p[1], c = p[2], d = p[3];
      const double x2 = x * x, x3 = x2 * x;
      r.value = sanitize(((a * x + b) * x + c) * x + d);
      r.dx = sanitize((3.0 * a * x + 2.0 * b) * x + c);
      r.dparam = {sanitize(x3), sanitize(x2), sanitize(x), 1.0};
      break;
    }
    case PrimitiveClass::kExpDecay: {
      const double a = p[0], b = p[1];
      double arg = -b * x;
      if (arg > kExpArgCap) arg = kExpArgCap;
      const double e = std::exp(arg);
      r.value = sanitize(a * e);
      r.dx = sanitize(-a * b * e);
      r.dparam = {sanitize(e), sanitize(-a * x * e), 0.0, 0.0};
      break;
    }
    case PrimitiveClass::kSinusoid: {
      const double a = p[0], b = p[1], c = p[2];
      const double t = b * x + c;
      const double s = std::sin(t), co = std::cos(t);
      r.value = sanitize(a * s);
      r.dx = sanitize(a * b * co);
      r.dparam = {sanitize(s), sanitize(a * x * co), sanitize(a * co), 0.0};
      break;
    }
    case PrimitiveClass::kLogAffine: {
      const double a = p[0], b = p[1], c = p[2];
      const double u = b * x + c;
      if (u <= kDomainEps) {
        // Floor active: value is a*log(eps), inner argument contributes no
        // derivative.
        const double lv = std::log(kDomainEps);
        r.value = sanitize(a * lv);
        r.dx = 0.0;
        r.dparam = {lv, 0.0, 0.0, 0.0};
      } else {
        const double lv = std::log(u);
        r.value = sanitize(a * lv);
        r.dx = sanitize(a * b / u);
        r.dparam = {sanitize(lv), sanitize(a * x / u), sanitize(a / u), 0.0};
      }
      break;
    }
    case PrimitiveClass::kRational: {
      const double a = p[0], b = p[1], c = p[2], d = p[3];
      const double q = (b * x + c) * x + d;
      const double qc = clamp_magnitude(q, kDomainEps);
      if (qc != q) {
        // Denominator frozen at the clamp value.
        r.value = sanitize(a * x / qc);
        r.dx = sanitize(a / qc);
        r.dparam = {sanitize(x / qc), 0.0, 0.0, 0.0};
      } else {
        const double inv = 1.0 / q;
        const double inv2 = inv * inv;
        const double x2 = x * x;
        r.value = sanitize(a * x * inv);
        r.dx = sanitize(a * (d - b * x2) * inv2);
        r.dparam = {sanitize(x * inv), sanitize(-a * x2 * x * inv2),
                    sanitize(-a * x2 * inv2), sanitize(-a * x * inv2)};
      }
      break;
    }
    case PrimitiveClass::kArcTan: {
      const double a = p[0], b = p[1], c = p[2];
      const double t = b * x + c;
      const double den = 1.0 + t * t;
      r.value = sanitize(a * std::atan(t));
      r.dx = sanitize(a * b / den);
      r.dparam = {sanitize(std::atan(t)), sanitize(a * x / den), sanitize(a / den), 0.0};
      break;
    }
    case PrimitiveClass::kMobius: {
      const double a = p[0], b = p[1], c = p[2], d = p[3];
      const double num = a * x + b;
      const double den = c * x + d;
      const double dc = clamp_magnitude(den, kDomainEps);
      if (dc != den) {
        r.value = sanitize(num / dc);
        r.dx = sanitize(a / dc);
        r.dparam = {sanitize(x / dc), sanitize(1.0 / dc), 0.0, 0.0};
      } else {
        const double inv = 1.0 / den;
        const double inv2 = inv * inv;
        r.value = sanitize(num * inv);
        r.dx = sanitize((a * d - b * c) * inv2);
        r.dparam = {sanitize(x * inv), sanitize(inv), sanitize(-num * x * inv2),
                    sanitize(-num * inv2)};
      }
      break;
    }
  }
  return r;
}

double eval_primitive(const PrimitiveFunction& f, double x) {
  const auto& p = f.params;
  switch (f.cls) {
    case PrimitiveClass::kPoly3:
      return sanitize(((p[0] * x + p[1]) * x + p[2]) * x + p[3]);
    case PrimitiveClass::kExpDecay: {
      double arg = -p[1] * x;
      if (arg > kExpArgCap) arg = kExpArgCap;
      return sanitize(p[0] * std::exp(arg));
    }
    case PrimitiveClass::kSinusoid:
      return sanitize(p[0] * std::sin(p[1] * x + p[2]));
    case PrimitiveClass::kLogAffine: {
      const double u = p[1] * x + p[2];
      return sanitize(p[0] * std::log(u > kDomainEps ? u : kDomainEps));
    }
    case PrimitiveClass::kRational: {
      const double q = (p[1] * x + p[2]) * x + p[3];
      return sanitize(p[0] * x / clamp_magnitude(q, kDomainEps));
    }
    case PrimitiveClass::kArcTan:
      return sanitize(p[0] * std::atan(p[1] * x + p[2]));
    case PrimitiveClass::kMobius: {
      const double den = p[2] * x + p[3];
      return sanitize((p[0] * x + p[1]) / clamp_magnitude(den, kDomainEps));
    }
  }
  return 0.0;
}

double deriv_primitive_x(const PrimitiveFunction& f, double x) {
  return eval_primitive_all(f, x).dx;
}

void grad_primitive_params(const PrimitiveFunction& f, double x, std::span<double> out) {
  assert(static_cast<int>(out.size()) >= f.arity());
  const PrimitiveEval r = eval_primitive_all(f, x);
  for (int i = 0; i < f.arity(); ++i) out[i] = r.dparam[i];
}

PrimitiveFunction init_primitive(PrimitiveClass cls, RngStream& rng) {
  PrimitiveFunction f;
  f.cls = cls;
  for (int i = 0; i < f.arity(); ++i) f.params[i] = rng.normal();
  return f;
}

namespace {

// Rounds to `precision` decimals and formats without a negative zero.
std::string format_coeff(double v, int precision) {
  double scale = std::pow(10.0, precision);
  double rounded = std::round(v * scale) / scale;
  if (rounded == 0.0) rounded = 0.0;  // normalize -0
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, rounded);
  return buf;
}

bool rounds_to_zero(double v, int precision) {
  const double scale = std::pow(10.0, precision);
  return std::round(v * scale) == 0.0;
}

// Builds "c1*f1 +/- c2*f2 ..." dropping terms whose rounded coefficient is
// zero; yields "0" if everything drops.
class TermJoiner {
 public:
  explicit TermJoiner(int precision) : precision_(precision) {}

  void add(double coeff, std::string_view factors) {
    if (rounds_to_zero(coeff, precision_)) return;
    const bool negative = coeff < 0.0;
    if (out_.empty()) {
      out_ = format_coeff(coeff, precision_);
    } else {
      out_ += negative ? " - " : " + ";
      out_ += format_coeff(negative ? -coeff : coeff, precision_);
    }
    if (!factors.empty()) {
      out_ += '*';
      out_ += factors;
    }
  }

  std::string str() const { return out_.empty() ? "0" : out_; }

 private:
  int precision_;
  std::string out_;
};

bool is_bare_token(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s) {
    const bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') ||
                    (ch >= '0' && ch <= '9') || ch == '_' || ch == '.';
    if (!ok) return false;
  }
  return true;
}

}  // namespace

std::string render_primitive(const PrimitiveFunction& f, std::string_view arg, int precision) {
  if (precision < 1) throw DataError("render precision must be >= 1");
  std::string u = is_bare_token(arg) ? std::string(arg) : "(" + std::string(arg) + ")";
  const auto& p = f.params;

  switch (f.cls) {
    case PrimitiveClass::kPoly3: {
      TermJoiner j(precision);
      j.add(p[0], u + "*" + u + "*" + u);
      j.add(p[1], u + "*" + u);
      j.add(p[2], u);
      j.add(p[3], "");
      return j.str();
    }
    case PrimitiveClass::kExpDecay: {
      TermJoiner inner(precision);
      inner.add(-p[1], u);
      return format_coeff(p[0], precision) + "*exp(" + inner.str() + ")";
    }
    case PrimitiveClass::kSinusoid: {
      TermJoiner inner(precision);
      inner.add(p[1], u);
      inner.add(p[2], "");
      return format_coeff(p[0], precision) + "*sin(" + inner.str() + ")";
    }
    case PrimitiveClass::kLogAffine: {
      TermJoiner inner(precision);
      inner.add(p[1], u);
      inner.add(p[2], "");
      return format_coeff(p[0], precision) + "*log(" + inner.str() + ")";
    }
    case PrimitiveClass::kRational: {
      TermJoiner den(precision);
      den.add(p[1], u + "*" + u);
      den.add(p[2], u);
      den.add(p[3], "");
      return format_coeff(p[0], precision) + "*" + u + "/(" + den.str() + ")";
    }
    case PrimitiveClass::kArcTan: {
      TermJoiner inner(precision);
      inner.add(p[1], u);
      inner.add(p[2], "");
      return format_coeff(p[0], precision) + "*atan(" + inner.str() + ")";
    }
    case PrimitiveClass::kMobius: {
      TermJoiner num(precision), den(precision);
      num.add(p[0], u);
      num.add(p[1], "");
      den.add(p[2], u);
      den.add(p[3], "");
      return "(" + num.str() + ")/(" + den.str() + ")";
    }
  }
  return "0";
}

FunctionSet FunctionSet::preset(std::string_view name) {
  FunctionSet fs;
  fs.name = std::string(name);
  if (name == "main5") {
    fs.classes = {PrimitiveClass::kPoly3, PrimitiveClass::kExpDecay,
                  PrimitiveClass::kSinusoid, PrimitiveClass::kLogAffine,
                  PrimitiveClass::kRational};
  } else if (name == "set1") {
    fs.classes = {PrimitiveClass::kExpDecay, PrimitiveClass::kSinusoid,
                  PrimitiveClass::kPoly3};
  } else if (name == "set2") {
    fs.classes = {PrimitiveClass::kPoly3, PrimitiveClass::kArcTan,
                  PrimitiveClass::kMobius};
  } else {
    throw ConfigError("unknown function set preset: " + std::string(name) +
                      " (expected main5, set1, or set2)");
  }
  return fs;
}

}  // namespace smpf
