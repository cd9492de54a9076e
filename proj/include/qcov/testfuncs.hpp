// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>

namespace qcov {

class UnsupportedOperation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

enum class FunctionKind { holder_abs_pow, lipschitz_clip, smooth_sin, constant, custom };

/// User-supplied function entering through the certified-oracle interface:
/// the caller vouches for |f(x) - f(y)| <= holder_constant * |x - y|^alpha
/// and |f| <= cap.
struct CustomFunction {
  std::string name;
  std::function<double(double)> eval;
  std::function<double(double)> derivative;  // empty when not differentiable
  double alpha = 1.0;
  double holder_constant = 1.0;
  double cap = std::numeric_limits<double>::infinity();
};

/// A non-smooth (or smooth reference) function f together with a certified
/// upper bound on its modulus of continuity
///   osc_f(d) = sup_{|x-y|<d} |f(x) - f(y)| <= C_f d^alpha.
class TestFunction {
 public:
  /// min(|x|^alpha, cap). Hölder-alpha with C_f = 1.
  static TestFunction holder_abs_pow(double alpha, double cap) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("holder_abs_pow needs alpha in (0,1)");
    if (!(cap > 0.0) || !std::isfinite(cap)) throw std::invalid_argument("holder_abs_pow needs a positive finite cap");
    TestFunction f(FunctionKind::holder_abs_pow);
    f.a_ = alpha;
    f.cap_ = cap;
    f.alpha_ = alpha;
    f.c_f_ = 1.0;
    return f;
  }

  /// clamp(slope*x, -cap, cap). Lipschitz with C_f = slope.
  static TestFunction lipschitz_clip(double slope, double cap) {
    if (!(slope > 0.0) || !std::isfinite(slope)) throw std::invalid_argument("lipschitz_clip needs a positive slope");
    if (!(cap > 0.0) || !std::isfinite(cap)) throw std::invalid_argument("lipschitz_clip needs a positive finite cap");
    TestFunction f(FunctionKind::lipschitz_clip);
    f.a_ = slope;
    f.cap_ = cap;
    f.alpha_ = 1.0;
    f.c_f_ = slope;
    return f;
  }

  /// sin(frequency*x).
  static TestFunction smooth_sin(double frequency) {
    if (!(frequency > 0.0) || !std::isfinite(frequency)) throw std::invalid_argument("smooth_sin needs a positive frequency");
    TestFunction f(FunctionKind::smooth_sin);
    f.a_ = frequency;
    f.cap_ = 1.0;
    f.alpha_ = 1.0;
    f.c_f_ = frequency;
    return f;
  }

  static TestFunction constant(double c) {
    if (!std::isfinite(c)) throw std::invalid_argument("constant needs a finite value");
    TestFunction f(FunctionKind::constant);
    f.a_ = c;
    f.cap_ = std::fabs(c);
    f.alpha_ = 1.0;
    f.c_f_ = 0.0;
    return f;
  }

  static TestFunction custom(CustomFunction spec) {
    if (!spec.eval) throw std::invalid_argument("custom function needs an evaluator");
    if (!(spec.alpha > 0.0 && spec.alpha <= 1.0)) throw std::invalid_argument("custom function needs alpha in (0,1]");
    if (!(spec.holder_constant >= 0.0)) throw std::invalid_argument("custom function needs a nonnegative Hölder constant");
    if (!(spec.cap >= 0.0)) throw std::invalid_argument("custom function needs a nonnegative cap");
    TestFunction f(FunctionKind::custom);
    f.alpha_ = spec.alpha;
    f.c_f_ = spec.holder_constant;
    f.cap_ = spec.cap;
    f.custom_ = std::make_shared<const CustomFunction>(std::move(spec));
    return f;
  }

  /// Parses "kind:key=value,key=value", e.g. "holder_abs_pow:alpha=0.5,cap=1".
  static TestFunction parse(const std::string& text);

  [[nodiscard]] double operator()(double x) const { return eval(x); }

  [[nodiscard]] double eval(double x) const {
    switch (kind_) {
      case FunctionKind::holder_abs_pow:
        return std::min(std::pow(std::fabs(x), a_), cap_);
      case FunctionKind::lipschitz_clip:
        return std::clamp(a_ * x, -cap_, cap_);
      case FunctionKind::smooth_sin:
        return std::sin(a_ * x);
      case FunctionKind::constant:
        return a_;
      case FunctionKind::custom:
        return custom_->eval(x);
    }
    return 0.0;
  }

  /// Certified upper bound on osc_f(d).
  [[nodiscard]] double osc_bound(double d) const {
    if (!(d > 0.0)) throw std::invalid_argument("osc_bound needs d > 0");
    if (kind_ == FunctionKind::constant) return 0.0;
    return std::min(c_f_ * std::pow(d, alpha_), 2.0 * cap_);
  }

  [[nodiscard]] double derivative(double x) const {
    switch (kind_) {
      case FunctionKind::smooth_sin:
        return a_ * std::cos(a_ * x);
      case FunctionKind::constant:
        return 0.0;
      case FunctionKind::custom:
        if (custom_->derivative) return custom_->derivative(x);
        break;
      default:
        break;
    }
    throw UnsupportedOperation("derivative is not available for " + name());
  }

  [[nodiscard]] FunctionKind kind() const { return kind_; }
  [[nodiscard]] double holder_exponent() const { return alpha_; }
  [[nodiscard]] double holder_constant() const { return c_f_; }
  [[nodiscard]] double cap() const { return cap_; }
  [[nodiscard]] bool bounded() const { return std::isfinite(cap_); }
  [[nodiscard]] bool differentiable() const {
    return kind_ == FunctionKind::smooth_sin || kind_ == FunctionKind::constant ||
           (kind_ == FunctionKind::custom && static_cast<bool>(custom_->derivative));
  }
  [[nodiscard]] bool is_constant() const { return kind_ == FunctionKind::constant; }

  [[nodiscard]] std::string name() const {
    switch (kind_) {
      case FunctionKind::holder_abs_pow: return "holder_abs_pow";
      case FunctionKind::lipschitz_clip: return "lipschitz_clip";
      case FunctionKind::smooth_sin: return "smooth_sin";
      case FunctionKind::constant: return "constant";
      case FunctionKind::custom: return custom_->name;
    }
    return "";
  }

  /// Canonical "kind:key=value" form; parse(spec()) reproduces the function.
  [[nodiscard]] std::string spec() const {
    char buf[128];
    switch (kind_) {
      case FunctionKind::holder_abs_pow:
        std::snprintf(buf, sizeof buf, "holder_abs_pow:alpha=%.17g,cap=%.17g", a_, cap_);
        return buf;
      case FunctionKind::lipschitz_clip:
        std::snprintf(buf, sizeof buf, "lipschitz_clip:slope=%.17g,cap=%.17g", a_, cap_);
        return buf;
      case FunctionKind::smooth_sin:
        std::snprintf(buf, sizeof buf, "smooth_sin:frequency=%.17g", a_);
        return buf;
      case FunctionKind::constant:
        std::snprintf(buf, sizeof buf, "constant:c=%.17g", a_);
        return buf;
      case FunctionKind::custom:
        return "custom:" + custom_->name;
    }
    return "";
  }

 private:
  explicit TestFunction(FunctionKind kind) : kind_(kind) {}

  FunctionKind kind_;
  double a_ = 0.0;  // alpha, slope, frequency or constant value depending on kind
  double cap_ = 0.0;
  double alpha_ = 1.0;
  double c_f_ = 0.0;
  std::shared_ptr<const CustomFunction> custom_;
};

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("parameter '" + key + "' is not a number: '" + text + "'");
  }
  if (used != text.size()) throw std::invalid_argument("trailing characters in parameter '" + key + "'");
  return v;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

/// "a=1,b=2" -> {a:1, b:2}
inline std::map<std::string, double> parse_params(const std::string& text) {
  std::map<std::string, double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string item = trim(text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
    if (!item.empty()) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("expected key=value, got '" + item + "'");
      const std::string key = trim(item.substr(0, eq));
      if (out.count(key)) throw std::invalid_argument("duplicate parameter '" + key + "'");
      out[key] = parse_number(key, trim(item.substr(eq + 1)));
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline double take(std::map<std::string, double>& params, const std::string& key) {
  auto it = params.find(key);
  if (it == params.end()) throw std::invalid_argument("missing parameter '" + key + "'");
  const double v = it->second;
  params.erase(it);
  return v;
}

inline void reject_leftovers(const std::map<std::string, double>& params, const std::string& kind) {
  if (!params.empty()) {
    throw std::invalid_argument("unknown parameter '" + params.begin()->first + "' for " + kind);
  }
}

}  // namespace detail

inline TestFunction TestFunction::parse(const std::string& raw) {
  const std::string text = detail::trim(raw);
  const auto colon = text.find(':');
  const std::string kind = detail::trim(text.substr(0, colon));
  auto params = detail::parse_params(colon == std::string::npos ? std::string{} : text.substr(colon + 1));
  if (kind == "holder_abs_pow") {
    const double alpha = detail::take(params, "alpha");
    const double cap = detail::take(params, "cap");
    detail::reject_leftovers(params, kind);
    return holder_abs_pow(alpha, cap);
  }
  if (kind == "lipschitz_clip") {
    const double slope = detail::take(params, "slope");
    const double cap = detail::take(params, "cap");
    detail::reject_leftovers(params, kind);
    return lipschitz_clip(slope, cap);
  }
  if (kind == "smooth_sin") {
    const double freq = params.count("freq") ? detail::take(params, "freq") : detail::take(params, "frequency");
    detail::reject_leftovers(params, kind);
    return smooth_sin(freq);
  }
  if (kind == "constant") {
    const double c = detail::take(params, "c");
    detail::reject_leftovers(params, kind);
    return constant(c);
  }
  throw std::invalid_argument("unknown test function '" + kind + "'");
}

}  // namespace qcov
