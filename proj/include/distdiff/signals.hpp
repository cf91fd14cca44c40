#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "distdiff/numerics.hpp"

namespace distdiff {

enum class signal_kind { sinusoid, polynomial, table };

/// Leader signal with exact analytic derivatives up to order m+1 and a known
/// bound on the (m+1)-th derivative. Table-backed signals use cubic spline
/// interpolation and are excluded from the exactness claims.
class leader_signal {
 public:
  static leader_signal sinusoid(double amplitude, double omega, int m) {
    if (m < 0) throw parameter_error("leader_signal: m must be >= 0");
    if (!std::isfinite(amplitude) || !std::isfinite(omega))
      throw parameter_error("leader_signal: non-finite parameter");
    leader_signal s;
    s.kind_ = signal_kind::sinusoid;
    s.m_ = m;
    s.amplitude_ = amplitude;
    s.omega_ = omega;
    return s;
  }

  static leader_signal polynomial(vec coeffs, int m, std::optional<double> horizon = std::nullopt) {
    if (m < 0) throw parameter_error("leader_signal: m must be >= 0");
    require_finite(coeffs, "leader_signal: coeffs");
    if (coeffs.empty()) coeffs.push_back(0.0);
    leader_signal s;
    s.kind_ = signal_kind::polynomial;
    s.m_ = m;
    s.coeffs_ = std::move(coeffs);
    s.horizon_ = horizon;
    return s;
  }

  /// Natural cubic spline through (ts, us); ts strictly increasing.
  static leader_signal table(vec ts, vec us, int m) {
    if (m < 0) throw parameter_error("leader_signal: m must be >= 0");
    if (ts.size() != us.size() || ts.size() < 3)
      throw parameter_error("leader_signal: table needs >= 3 knots with matching sizes");
    require_finite(ts, "leader_signal: table times");
    require_finite(us, "leader_signal: table values");
    for (std::size_t i = 0; i + 1 < ts.size(); ++i)
      if (!(ts[i] < ts[i + 1])) throw parameter_error("leader_signal: table times must increase");
    leader_signal s;
    s.kind_ = signal_kind::table;
    s.m_ = m;
    s.knot_t_ = std::move(ts);
    s.knot_u_ = std::move(us);
    s.build_spline();
    return s;
  }

  signal_kind kind() const { return kind_; }
  int order() const { return m_; }
  double amplitude() const { return amplitude_; }
  double omega() const { return omega_; }
  const vec& coefficients() const { return coeffs_; }

  void set_horizon(double t_final) { horizon_ = t_final; }

  /// Exact mu-th time derivative, 0 <= mu <= m+1.
  double derivative(int mu, double t) const {
    if (mu < 0 || mu > m_ + 1) throw parameter_error("derivative: mu out of range");
    switch (kind_) {
      case signal_kind::sinusoid: {
        // d^mu/dt^mu A sin(wt) = A w^mu * {sin, cos, -sin, -cos}[mu % 4](wt)
        const double base = amplitude_ * std::pow(omega_, static_cast<double>(mu));
        switch (mu % 4) {
          case 0: return base * std::sin(omega_ * t);
          case 1: return base * std::cos(omega_ * t);
          case 2: return -base * std::sin(omega_ * t);
          default: return -base * std::cos(omega_ * t);
        }
      }
      case signal_kind::polynomial: {
        // Horner on the mu-times differentiated coefficients
        const int d = static_cast<int>(coeffs_.size()) - 1;
        if (mu > d) return 0.0;
        double acc = 0.0;
        for (int j = d; j >= mu; --j) {
          double c = coeffs_[static_cast<std::size_t>(j)];
          for (int r = 0; r < mu; ++r) c *= static_cast<double>(j - r);
          acc = acc * t + c;
        }
        return acc;
      }
      case signal_kind::table:
        return spline_derivative(mu, t);
    }
    return 0.0;
  }

  /// Upper bound L with |u^(m+1)(t)| <= L. Sinusoids get the analytic bound;
  /// polynomials of degree <= m get 0; anything else needs a horizon and is
  /// bounded by a padded grid supremum.
  double deriv_bound() const {
    switch (kind_) {
      case signal_kind::sinusoid:
        return std::abs(amplitude_) * std::pow(std::abs(omega_), static_cast<double>(m_ + 1));
      case signal_kind::polynomial: {
        const int d = static_cast<int>(coeffs_.size()) - 1;
        if (d <= m_) return 0.0;
        return grid_sup_bound();
      }
      case signal_kind::table:
        return grid_sup_bound();
    }
    return 0.0;
  }

 private:
  leader_signal() = default;

  double grid_sup_bound() const {
    double lo = 0.0, hi;
    if (kind_ == signal_kind::table) {
      lo = knot_t_.front();
      hi = knot_t_.back();
    } else {
      if (!horizon_) throw parameter_error("deriv_bound: horizon required for this signal");
      hi = *horizon_;
    }
    if (!(hi > lo)) throw parameter_error("deriv_bound: empty horizon");
    const int points = 100000;
    double sup = 0.0;
    for (int i = 0; i <= points; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) / points;
      const double v = std::abs(derivative(m_ + 1, t));
      if (!std::isfinite(v)) throw parameter_error("deriv_bound: unbounded derivative over horizon");
      sup = std::max(sup, v);
    }
    return sup * (1.0 + 1e-6) + 1e-12;
  }

  void build_spline() {
    // natural cubic spline second derivatives via the standard tridiagonal solve
    const std::size_t n = knot_t_.size();
    spline_m_.assign(n, 0.0);
    vec diag(n, 0.0), rhs(n, 0.0), sub(n, 0.0), sup(n, 0.0);
    diag[0] = diag[n - 1] = 1.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = knot_t_[i] - knot_t_[i - 1];
      const double h1 = knot_t_[i + 1] - knot_t_[i];
      sub[i] = h0;
      diag[i] = 2.0 * (h0 + h1);
      sup[i] = h1;
      rhs[i] = 6.0 * ((knot_u_[i + 1] - knot_u_[i]) / h1 - (knot_u_[i] - knot_u_[i - 1]) / h0);
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    spline_m_[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t ii = n - 1; ii-- > 0;)
      spline_m_[ii] = (rhs[ii] - sup[ii] * spline_m_[ii + 1]) / diag[ii];
  }

  double spline_derivative(int mu, double t) const {
    const std::size_t n = knot_t_.size();
    std::size_t i = 0;
    if (t <= knot_t_.front()) {
      i = 0;
    } else if (t >= knot_t_.back()) {
      i = n - 2;
    } else {
      std::size_t lo = 0, hi = n - 1;
      while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (knot_t_[mid] <= t) lo = mid; else hi = mid;
      }
      i = lo;
    }
    const double h = knot_t_[i + 1] - knot_t_[i];
    const double a = (knot_t_[i + 1] - t) / h;
    const double b = (t - knot_t_[i]) / h;
    const double m0 = spline_m_[i], m1 = spline_m_[i + 1];
    const double u0 = knot_u_[i], u1 = knot_u_[i + 1];
    switch (mu) {
      case 0:
        return a * u0 + b * u1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
      case 1:
        return (u1 - u0) / h + ((1.0 - 3.0 * a * a) * m0 + (3.0 * b * b - 1.0) * m1) * h / 6.0;
      case 2:
        return a * m0 + b * m1;
      case 3:
        return (m1 - m0) / h;
      default:
        return 0.0;  // piecewise cubic: higher derivatives vanish within pieces
    }
  }

  signal_kind kind_ = signal_kind::sinusoid;
  int m_ = 1;
  double amplitude_ = 0.0;
  double omega_ = 0.0;
  vec coeffs_;
  std::optional<double> horizon_;
  vec knot_t_, knot_u_, spline_m_;
};

/// Per-agent bounded uniform noise on [-eps_bar, eps_bar]. Stateless: the
/// value is a pure function of (seed, agent, sample index), so parallel
/// queries need no shared state and replays are exact.
struct noise_source {
  double eps_bar = 0.0;
  std::uint64_t seed = 0;

  noise_source() = default;
  noise_source(double eps, std::uint64_t s) : eps_bar(eps), seed(s) {
    if (!(eps_bar >= 0.0)) throw parameter_error("noise_source: eps_bar must be >= 0");
  }

  double sample(std::size_t agent, std::uint64_t k) const {
    if (eps_bar == 0.0) return 0.0;
    return eps_bar * (2.0 * rng::uniform(seed, rng::stream_noise, agent, k) - 1.0);
  }
};

}  // namespace distdiff
