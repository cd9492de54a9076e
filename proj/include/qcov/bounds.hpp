// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>

#include "qcov/grid.hpp"
#include "qcov/testfuncs.hpp"

namespace qcov {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// q = 2 sqrt(delta_eps |log delta_eps|), the Lévy-modulus threshold.
inline double q_eps(double delta_eps) {
  if (!(delta_eps > 0.0 && delta_eps < 1.0)) {
    throw DomainError("q_eps needs delta_eps in (0,1), got " + std::to_string(delta_eps));
  }
  return 2.0 * std::sqrt(delta_eps * std::fabs(std::log(delta_eps)));
}

/// Tail bound for a continuous martingale with <M>(T) <= r:
///   P{sup |M| > delta} < sqrt(8r / (pi delta^2)) exp(-delta^2 / (2r)).
inline double martingale_tail_bound(double r, double delta) {
  if (!(r > 0.0) || !(delta > 0.0)) throw DomainError("martingale_tail_bound needs r > 0 and delta > 0");
  return std::sqrt(8.0 * r / (std::numbers::pi * delta * delta)) * std::exp(-delta * delta / (2.0 * r));
}

/// Union bound over n = T/delta_eps cells of the per-cell reflection bound
///   delta^{-1} sqrt(8 delta_eps / pi) exp(-delta^2 / (2 delta_eps)),
/// i.e. the modulus tail with constant C = T sqrt(8/pi).
inline double levy_tail_bound(double delta, double delta_eps, double horizon) {
  if (!(delta > 0.0)) throw DomainError("levy_tail_bound needs delta > 0");
  if (!(delta_eps > 0.0 && delta_eps < 1.0)) throw DomainError("levy_tail_bound needs delta_eps in (0,1)");
  if (!(horizon > 0.0)) throw DomainError("levy_tail_bound needs T > 0");
  const double per_cell = std::sqrt(8.0 * delta_eps / std::numbers::pi) / delta *
                          std::exp(-delta * delta / (2.0 * delta_eps));
  return horizon / delta_eps * per_cell;
}

enum class ScheduleKind { holder, lipschitz, explicit_table };

/// Coupling eps -> delta_eps between the noise level and the partition.
///
/// holder:    delta_eps = eps^{2(alpha-mu)/(1-alpha)},  0 < gamma < mu < alpha < 1
/// lipschitz: delta_eps = exp(-eps^{-(1-mu)}),          0 < gamma < mu < 1
/// explicit:  n_eps looked up in a table, delta_eps = T/n_eps
class RateSchedule {
 public:
  static RateSchedule holder(double alpha, double mu, double gamma) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("holder schedule needs alpha in (0,1)");
    if (!(gamma > 0.0 && gamma < mu && mu < alpha)) {
      throw DomainError("holder schedule needs 0 < gamma < mu < alpha");
    }
    RateSchedule s(ScheduleKind::holder);
    s.alpha_ = alpha;
    s.mu_ = mu;
    s.gamma_ = gamma;
    return s;
  }

  static RateSchedule lipschitz(double mu, double gamma) {
    if (!(gamma > 0.0 && gamma < mu && mu < 1.0)) throw DomainError("lipschitz schedule needs 0 < gamma < mu < 1");
    RateSchedule s(ScheduleKind::lipschitz);
    s.alpha_ = 1.0;
    s.mu_ = mu;
    s.gamma_ = gamma;
    return s;
  }

  /// `cells` maps eps to n_eps.
  static RateSchedule explicit_table(std::map<double, std::size_t> cells, double gamma) {
    if (cells.empty()) throw DomainError("explicit schedule needs at least one entry");
    for (const auto& [eps, n] : cells) {
      if (!(eps > 0.0 && eps < 1.0) || n == 0) throw DomainError("explicit schedule entries need eps in (0,1), n >= 1");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("explicit schedule needs gamma in (0,1)");
    RateSchedule s(ScheduleKind::explicit_table);
    s.table_ = std::move(cells);
    s.gamma_ = gamma;
    return s;
  }

  [[nodiscard]] ScheduleKind kind() const { return kind_; }
  [[nodiscard]] double alpha() const { return alpha_; }
  [[nodiscard]] double mu() const { return mu_; }
  [[nodiscard]] double gamma() const { return gamma_; }
  [[nodiscard]] const std::map<double, std::size_t>& table() const { return table_; }

  /// Exponent 2(alpha-mu)/(1-alpha) of the Hölder rate.
  [[nodiscard]] double holder_rate() const { return 2.0 * (alpha_ - mu_) / (1.0 - alpha_); }

  [[nodiscard]] std::string spec() const {
    char buf[160];
    switch (kind_) {
      case ScheduleKind::holder:
        std::snprintf(buf, sizeof buf, "holder:alpha=%.17g,mu=%.17g", alpha_, mu_);
        return buf;
      case ScheduleKind::lipschitz:
        std::snprintf(buf, sizeof buf, "lipschitz:mu=%.17g", mu_);
        return buf;
      case ScheduleKind::explicit_table: {
        std::string out = "explicit:";
        bool first = true;
        for (const auto& [eps, n] : table_) {
          std::snprintf(buf, sizeof buf, "%s%.17g=%zu", first ? "" : ";", eps, n);
          out += buf;
          first = false;
        }
        return out;
      }
    }
    return "";
  }

 private:
  explicit RateSchedule(ScheduleKind kind) : kind_(kind) {}

  ScheduleKind kind_;
  double alpha_ = 1.0;
  double mu_ = 0.0;
  double gamma_ = 0.0;
  std::map<double, std::size_t> table_;
};

inline void check_schedule_epsilon(double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("schedule needs eps in (0,1), got " + std::to_string(eps));
}

/// Raw schedule value delta_eps (before rounding to a partition).
inline double schedule_delta_eps(const RateSchedule& s, double eps, double horizon = 1.0) {
  check_schedule_epsilon(eps);
  switch (s.kind()) {
    case ScheduleKind::holder:
      return std::pow(eps, s.holder_rate());
    case ScheduleKind::lipschitz:
      return std::exp(-std::pow(eps, -(1.0 - s.mu())));
    case ScheduleKind::explicit_table: {
      auto it = s.table().find(eps);
      if (it == s.table().end()) throw DomainError("explicit schedule has no entry for eps " + std::to_string(eps));
      return horizon / static_cast<double>(it->second);
    }
  }
  return 0.0;
}

/// n_eps = ceil(T / delta_eps); the partition width T/n_eps never exceeds
/// the schedule value.
inline UniformPartition schedule_partition(const RateSchedule& s, double eps, double horizon) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  if (s.kind() == ScheduleKind::explicit_table) {
    check_schedule_epsilon(eps);
    auto it = s.table().find(eps);
    if (it == s.table().end()) throw DomainError("explicit schedule has no entry for eps " + std::to_string(eps));
    return {horizon, it->second};
  }
  const double raw = schedule_delta_eps(s, eps, horizon);
  if (!(raw > 0.0)) throw DomainError("schedule value underflowed to zero");
  const double ratio = horizon / raw;
  if (ratio > 1e9) throw DomainError("schedule needs more than 1e9 cells");
  auto n = static_cast<std::size_t>(std::ceil(ratio));
  if (n == 0) n = 1;
  // guard ceil against a quotient rounded just below an integer
  while (horizon / static_cast<double>(n) > raw) ++n;
  return {horizon, n};
}

/// eta = |log delta_eps| osc_f(eps q) / (q gamma_eps).
inline double eta_condition(const TestFunction& f, double delta_eps, double eps, double gamma_eps) {
  if (!(gamma_eps > 0.0)) throw DomainError("eta needs gamma_eps > 0");
  if (!(eps > 0.0)) throw DomainError("eta needs eps > 0");
  const double q = q_eps(delta_eps);
  if (!(q > 0.0)) throw DomainError("q_eps degenerated to zero");
  return std::fabs(std::log(delta_eps)) * f.osc_bound(eps * q) / (q * gamma_eps);
}

/// eta at a schedule point, with delta_eps = T/n_eps and gamma_eps = eps^gamma.
inline double eta_condition(const TestFunction& f, const RateSchedule& s, double eps, double horizon) {
  const auto p = schedule_partition(s, eps, horizon);
  return eta_condition(f, p.width(), eps, std::pow(eps, s.gamma()));
}

/// Unnamed constants of a rate theorem, supplied or fitted.
struct TheoremConstants {
  double prefactor = 1.0;  // C_{delta,mu}
  double threshold = 0.0;  // the delta the prefactor was fitted for; informational
};

/// Shape of the tail bound with a given prefactor:
///   holder    C eps^{2(alpha-mu)/(1-alpha)}
///   lipschitz C exp(-eps^{-(1-mu)})
///   explicit  C delta_eps
// The bound shapes coincide with the schedule values by construction.
inline double theorem_bound(const RateSchedule& s, double eps, const TheoremConstants& c, double horizon = 1.0) {
  if (c.prefactor == 0.0) return 0.0;
  return c.prefactor * schedule_delta_eps(s, eps, horizon);
}

}  // namespace qcov
