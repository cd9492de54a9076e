// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qcov/grid.hpp"
#include "qcov/paths.hpp"
#include "qcov/summation.hpp"
#include "qcov/testfuncs.hpp"

namespace qcov {

enum class SeriesLabel {
  L_discrete,
  J_forward,
  J_backward,
  S_forward,
  S_backward,
  M_forward,
  M_backward,
  A_drift,
  Gamma,
  L_representation,
  Q_smooth_ref,
};

inline const char* to_string(SeriesLabel label) {
  switch (label) {
    case SeriesLabel::L_discrete: return "L_discrete";
    case SeriesLabel::J_forward: return "J_forward";
    case SeriesLabel::J_backward: return "J_backward";
    case SeriesLabel::S_forward: return "S_forward";
    case SeriesLabel::S_backward: return "S_backward";
    case SeriesLabel::M_forward: return "M_forward";
    case SeriesLabel::M_backward: return "M_backward";
    case SeriesLabel::A_drift: return "A_drift";
    case SeriesLabel::Gamma: return "Gamma";
    case SeriesLabel::L_representation: return "L_representation";
    case SeriesLabel::Q_smooth_ref: return "Q_smooth_ref";
  }
  return "";
}

/// Values of an approximating process at the coarse nodes s_0..s_n.
class CovariationSeries {
 public:
  CovariationSeries(SeriesLabel label, UniformPartition partition, std::vector<double> values)
      : label_(label), partition_(partition), values_(std::move(values)) {
    if (values_.size() != partition_.cells() + 1) {
      throw std::invalid_argument("series length must be n + 1");
    }
    for (double v : values_) sup_abs_ = std::max(sup_abs_, std::fabs(v));
  }

  [[nodiscard]] SeriesLabel label() const { return label_; }
  [[nodiscard]] const UniformPartition& partition() const { return partition_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double terminal() const { return values_.back(); }
  [[nodiscard]] double sup_abs() const { return sup_abs_; }
  [[nodiscard]] double time(std::size_t i) const { return partition_.node(i); }

  /// Value at time t, i.e. at node i(t).
  [[nodiscard]] double at(double t) const { return values_[partition_.index_of(t)]; }

 private:
  SeriesLabel label_;
  UniformPartition partition_;
  std::vector<double> values_;
  double sup_abs_ = 0.0;
};

/// i(t) = min{ j : s_j >= t }.
inline std::size_t index_of_t(const UniformPartition& p, double t) { return p.index_of(t); }

/// Sup-norm relative gap max_k |a_k - b_k| / max(sup|a|, sup|b|); 0 when both vanish.
inline double relative_gap(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("relative_gap needs equal lengths");
  double gap = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    gap = std::max(gap, std::fabs(a[k] - b[k]));
    scale = std::max({scale, std::fabs(a[k]), std::fabs(b[k])});
  }
  return scale == 0.0 ? gap : gap / scale;
}

namespace detail {

inline void check_epsilon(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("epsilon must be positive and finite");
}

/// f(eps * v_j) for every fine node.
inline std::vector<double> f_on_path(const SamplePath& path, const TestFunction& f, double eps) {
  check_epsilon(eps);
  const auto v = path.values();
  std::vector<double> out(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = f(eps * v[j]);
  return out;
}

/// Coarse-node sums sum_{i<=k} term(i) for k = 0..n.
template <class Term>
std::vector<double> coarse_prefix(std::size_t cells, Term term) {
  std::vector<double> out(cells + 1);
  CompensatedSum acc;
  out[0] = 0.0;
  for (std::size_t i = 1; i <= cells; ++i) {
    acc.add(term(i));
    out[i] = acc.as_double();
  }
  return out;
}

/// Forward fine sums sum_{j < k*m} term(j), reported at coarse nodes.
template <class Term>
std::vector<double> fine_prefix(const FineGrid& g, Term term) {
  const std::size_t m = g.refinement();
  std::vector<double> out(g.coarse().cells() + 1);
  CompensatedSum acc;
  out[0] = 0.0;
  for (std::size_t j = 0; j < g.steps(); ++j) {
    acc.add(term(j));
    if ((j + 1) % m == 0) out[(j + 1) / m] = acc.as_double();
  }
  return out;
}

/// Backward-time fine sums over cells j >= (n-k)*m (j indexes backward time
/// u_j = j*h), reported at forward coarse node s_k, i.e. integrals over
/// [T - s_k, T]. Accumulated from j = J-1 downwards.
template <class Term>
std::vector<double> fine_backward_tail(const FineGrid& g, Term term) {
  const std::size_t m = g.refinement();
  const std::size_t last = g.steps();
  std::vector<double> out(g.coarse().cells() + 1);
  CompensatedSum acc;
  out[0] = 0.0;
  for (std::size_t r = 1; r <= last; ++r) {
    const std::size_t j = last - r;
    acc.add(term(j));
    if (r % m == 0) out[r / m] = acc.as_double();
  }
  return out;
}

inline void require_beta(std::span<const double> beta, const SamplePath& path) {
  if (beta.empty()) throw std::invalid_argument("beta is required; compute it with beta_from_path");
  if (beta.size() != path.values().size()) throw std::invalid_argument("beta does not match the path grid");
}

}  // namespace detail

/// J(t) = sum_{i<=i(t)} f(eps W(s_{i-1})) (W(s_i) - W(s_{i-1})).
inline CovariationSeries forward_sum(const SamplePath& path, const TestFunction& f, double eps) {
  detail::check_epsilon(eps);
  const auto& p = path.grid().coarse();
  auto vals = detail::coarse_prefix(p.cells(), [&](std::size_t i) {
    const double w0 = path.coarse(i - 1);
    return static_cast<long double>(f(eps * w0)) * (path.coarse(i) - w0);
  });
  return {SeriesLabel::J_forward, p, std::move(vals)};
}

/// Jhat(t) = sum_{i<=i(t)} f(eps W(s_i)) (W(s_i) - W(s_{i-1})).
inline CovariationSeries backward_sum(const SamplePath& path, const TestFunction& f, double eps) {
  detail::check_epsilon(eps);
  const auto& p = path.grid().coarse();
  auto vals = detail::coarse_prefix(p.cells(), [&](std::size_t i) {
    const double w1 = path.coarse(i);
    return static_cast<long double>(f(eps * w1)) * (w1 - path.coarse(i - 1));
  });
  return {SeriesLabel::J_backward, p, std::move(vals)};
}

/// Jhat rewritten over the backward nodes t_i = T - s_{n-i}:
///   Jhat(t) = - sum_{i = n - i(t)}^{n-1} f(eps What(t_i)) (What(t_{i+1}) - What(t_i)).
/// Evaluated as a difference of prefix sums taken in backward-node order.
inline CovariationSeries backward_sum_reversed(const SamplePath& path, const TestFunction& f, double eps) {
  detail::check_epsilon(eps);
  const auto& p = path.grid().coarse();
  const std::size_t n = p.cells();
  auto hat_at = [&](std::size_t i) { return path.coarse(n - i); };  // What(t_i)
  std::vector<long double> prefix(n + 1);
  CompensatedSum acc;
  prefix[0] = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    acc.add(static_cast<long double>(f(eps * hat_at(i))) * (hat_at(i + 1) - hat_at(i)));
    prefix[i + 1] = acc.value();
  }
  std::vector<double> vals(n + 1);
  for (std::size_t k = 0; k <= n; ++k) vals[k] = static_cast<double>(-(prefix[n] - prefix[n - k]));
  return {SeriesLabel::J_backward, p, std::move(vals)};
}

/// L_{eps,P}(t) = sum_{i<=i(t)} Delta f(eps W) Delta W over coarse cells.
/// Q is estimated by eps * L.
inline CovariationSeries discrete_covariation(const SamplePath& path, const TestFunction& f, double eps) {
  detail::check_epsilon(eps);
  const auto& p = path.grid().coarse();
  auto vals = detail::coarse_prefix(p.cells(), [&](std::size_t i) {
    const double w0 = path.coarse(i - 1);
    const double w1 = path.coarse(i);
    return (static_cast<long double>(f(eps * w1)) - f(eps * w0)) * (w1 - w0);
  });
  return {SeriesLabel::L_discrete, p, std::move(vals)};
}

/// S(t) = int_0^t f(eps W) dW, left-point Itô sum on the fine grid.
inline CovariationSeries ito_fine_forward(const SamplePath& path, const TestFunction& f, double eps) {
  const auto fv = detail::f_on_path(path, f, eps);
  const auto v = path.values();
  auto vals = detail::fine_prefix(path.grid(), [&](std::size_t j) {
    return static_cast<long double>(fv[j]) * (v[j + 1] - v[j]);
  });
  return {SeriesLabel::S_forward, path.grid().coarse(), std::move(vals)};
}

/// Shat(t) = int_{T-t}^T f(eps What) dWhat, left-point sum in backward time.
/// With this orientation Jhat ~ -Shat, and Jhat(T) = -Shat(T) exactly when m = 1.
inline CovariationSeries ito_fine_backward(const SamplePath& path, const TestFunction& f, double eps) {
  const auto fv = detail::f_on_path(path, f, eps);
  const auto v = path.values();
  const std::size_t last = path.last_index();
  // backward node j is forward node last - j
  auto vals = detail::fine_backward_tail(path.grid(), [&](std::size_t j) {
    const std::size_t l = last - j;
    return static_cast<long double>(fv[l]) * (v[l - 1] - v[l]);
  });
  return {SeriesLabel::S_backward, path.grid().coarse(), std::move(vals)};
}

/// M(t) = sum_i int_{s_{i-1}^t}^{s_i^t} (f(eps W(s)) - f(eps W(s_{i-1}))) dW(s).
/// At coarse nodes M = S - J.
inline CovariationSeries residual_forward(const SamplePath& path, const TestFunction& f, double eps) {
  const auto fv = detail::f_on_path(path, f, eps);
  const auto v = path.values();
  const std::size_t m = path.grid().refinement();
  auto vals = detail::fine_prefix(path.grid(), [&](std::size_t j) {
    const double anchor = fv[(j / m) * m];
    return (static_cast<long double>(fv[j]) - anchor) * (v[j + 1] - v[j]);
  });
  return {SeriesLabel::M_forward, path.grid().coarse(), std::move(vals)};
}

/// Gamma(t) = sum_i int_{s_{i-1}^t}^{s_i^t} |f(eps W(s)) - f(eps W(s_{i-1}))|^2 ds,
/// the quadratic variation of M.
inline CovariationSeries gamma(const SamplePath& path, const TestFunction& f, double eps) {
  const auto fv = detail::f_on_path(path, f, eps);
  const std::size_t m = path.grid().refinement();
  const double h = path.grid().step();
  auto vals = detail::fine_prefix(path.grid(), [&](std::size_t j) {
    const long double d = static_cast<long double>(fv[j]) - fv[(j / m) * m];
    return h * d * d;
  });
  return {SeriesLabel::Gamma, path.grid().coarse(), std::move(vals)};
}

/// A(t) = sum_i int_{t_i v (T-t)}^{t_{i+1} v (T-t)} (f(eps What(s)) - f(eps What(t_i))) What(s)/(T-s) ds,
/// left-point in backward time so s = T is never evaluated.
inline CovariationSeries drift_A(const SamplePath& path, const TestFunction& f, double eps,
                                 std::span<const double> beta) {
  detail::require_beta(beta, path);
  const auto fv = detail::f_on_path(path, f, eps);
  const auto v = path.values();
  const std::size_t last = path.last_index();
  const std::size_t m = path.grid().refinement();
  const double h = path.grid().step();
  auto vals = detail::fine_backward_tail(path.grid(), [&](std::size_t j) {
    const std::size_t l = last - j;
    const double anchor = fv[last - (j / m) * m];
    const long double remaining = static_cast<long double>(last - j) * h;
    return (static_cast<long double>(fv[l]) - anchor) * h * v[l] / remaining;
  });
  return {SeriesLabel::A_drift, path.grid().coarse(), std::move(vals)};
}

/// Mhat computed two ways plus the drift A.
struct BackwardResidual {
  CovariationSeries from_sums;  // Shat + Jhat (boundary term vanishes at coarse nodes)
  CovariationSeries from_beta;  // sum Delta f dbeta - A
  CovariationSeries drift;      // A
  /// max_k |from_sums - from_beta|, tracked rather than asserted.
  [[nodiscard]] double discrepancy() const {
    double worst = 0.0;
    for (std::size_t k = 0; k < from_sums.size(); ++k) {
      worst = std::max(worst, std::fabs(from_sums[k] - from_beta[k]));
    }
    return worst;
  }
};

inline BackwardResidual residual_backward(const SamplePath& path, const TestFunction& f, double eps,
                                          std::span<const double> beta) {
  detail::require_beta(beta, path);
  const auto shat = ito_fine_backward(path, f, eps);
  const auto jhat = backward_sum(path, f, eps);
  std::vector<double> sums(shat.size());
  for (std::size_t k = 0; k < sums.size(); ++k) sums[k] = shat[k] + jhat[k];

  const auto fv = detail::f_on_path(path, f, eps);
  const std::size_t last = path.last_index();
  const std::size_t m = path.grid().refinement();
  auto martingale_part = detail::fine_backward_tail(path.grid(), [&](std::size_t j) {
    const double anchor = fv[last - (j / m) * m];
    return (static_cast<long double>(fv[last - j]) - anchor) * (beta[j + 1] - beta[j]);
  });
  auto a = drift_A(path, f, eps, beta);
  std::vector<double> via_beta(martingale_part.size());
  for (std::size_t k = 0; k < via_beta.size(); ++k) via_beta[k] = martingale_part[k] - a[k];

  const auto& p = path.grid().coarse();
  return {CovariationSeries(SeriesLabel::M_backward, p, std::move(sums)),
          CovariationSeries(SeriesLabel::M_backward, p, std::move(via_beta)), std::move(a)};
}

/// L(t) = -S(t) - int_{T-t}^T f(eps What) dbeta + int_0^t f(eps W(s)) W(s)/s ds.
///
/// The drift integral is a left-point sum starting at the first fine node;
/// the cell [0, h] is omitted (its mass is O(sqrt h)).
inline CovariationSeries representation_L(const SamplePath& path, const TestFunction& f, double eps,
                                          std::span<const double> beta) {
  detail::require_beta(beta, path);
  const auto fv = detail::f_on_path(path, f, eps);
  const auto v = path.values();
  const std::size_t last = path.last_index();
  const auto& g = path.grid();
  const double h = g.step();

  const auto s = ito_fine_forward(path, f, eps);
  auto beta_part = detail::fine_backward_tail(g, [&](std::size_t j) {
    return static_cast<long double>(fv[last - j]) * (beta[j + 1] - beta[j]);
  });
  auto drift = detail::fine_prefix(g, [&](std::size_t j) -> long double {
    if (j == 0) return 0.0L;
    return static_cast<long double>(fv[j]) * h * v[j] / g.time(j);
  });
  std::vector<double> vals(s.size());
  for (std::size_t k = 0; k < vals.size(); ++k) vals[k] = -s[k] - beta_part[k] + drift[k];
  return {SeriesLabel::L_representation, g.coarse(), std::move(vals)};
}

/// Q(t) = eps^2 int_0^t f'(eps W(s)) ds, left Riemann sum on the fine grid.
inline CovariationSeries smooth_reference(const SamplePath& path, const TestFunction& f, double eps) {
  detail::check_epsilon(eps);
  if (!f.differentiable()) throw UnsupportedOperation("smooth reference needs a differentiable f, got " + f.name());
  const auto v = path.values();
  const double h = path.grid().step();
  auto vals = detail::fine_prefix(path.grid(), [&](std::size_t j) {
    return static_cast<long double>(eps) * eps * h * f.derivative(eps * v[j]);
  });
  return {SeriesLabel::Q_smooth_ref, path.grid().coarse(), std::move(vals)};
}

}  // namespace qcov
