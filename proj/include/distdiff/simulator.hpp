#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "distdiff/graph.hpp"
#include "distdiff/numerics.hpp"
#include "distdiff/protocol.hpp"
#include "distdiff/signals.hpp"

namespace distdiff {

struct blow_up_error : std::runtime_error {
  std::size_t step;
  double time;
  blow_up_error(std::size_t k, double t)
      : std::runtime_error("state blow-up at step " + std::to_string(k) + " (t = " +
                           std::to_string(t) + ")"),
        step(k),
        time(t) {}
};

/// Initial state: either an explicit block or a seeded uniform range.
struct init_spec {
  bool use_range = true;
  double lo = -5.0;
  double hi = 5.0;
  std::uint64_t seed = 0;
  state_block matrix;

  static init_spec range(double lo_, double hi_, std::uint64_t seed_) {
    init_spec s;
    s.use_range = true;
    s.lo = lo_;
    s.hi = hi_;
    s.seed = seed_;
    return s;
  }
  static init_spec explicit_block(state_block b) {
    init_spec s;
    s.use_range = false;
    s.matrix = std::move(b);
    return s;
  }
};

struct run_mode {
  bool sampled = true;
  int substeps = 100;  // continuous emulation: forward-Euler substeps per dt

  static run_mode sampled_mode() { return {true, 1}; }
  static run_mode continuous(int substeps_) { return {false, substeps_}; }
};

struct scenario {
  network net;
  network_spectra sp;
  leader_signal signal = leader_signal::sinusoid(1.0, 0.5, 1);
  gain_schedule gains;
  int m = 1;
  double dt = 1e-3;
  double t_final = 60.0;
  noise_source noise;
  init_spec init;
  run_mode mode;
};

inline void validate_scenario(const scenario& sc) {
  if (!(sc.dt > 0.0)) throw parameter_error("scenario: dt must be > 0");
  if (!(sc.t_final > sc.dt)) throw parameter_error("scenario: t_final must exceed dt");
  if (sc.gains.m != sc.m || sc.signal.order() != sc.m)
    throw parameter_error("scenario: m, gains.m and signal order must agree");
  if (!sc.mode.sampled && sc.mode.substeps < 1)
    throw parameter_error("scenario: continuous mode needs substeps >= 1");
  const violation v = validate(sc.net);
  if (v != violation::none)
    throw parameter_error(std::string("scenario: invalid network: ") + violation_name(v));
}

/// Time-indexed record of a run: states, reference derivatives and
/// max-over-agents errors per derivative order, plus the scenario echo.
struct trajectory_log {
  vec times;                        // k * dt, uniform
  std::vector<state_block> states;  // one block per time
  mat refs;                         // (K+1) x (m+1): u^(mu)(t_k)
  mat errors;                       // (K+1) x (m+1): max_i |x_{i,mu} - u^(mu)|
  scenario meta;                    // scenario echo (includes seeds and mode)
};

inline state_block resolve_initial_state(const scenario& sc) {
  if (!sc.init.use_range) {
    if (sc.init.matrix.n_agents != sc.net.n_agents || sc.init.matrix.m != sc.m)
      throw shape_error("scenario: explicit initial block has wrong shape");
    require_finite(sc.init.matrix.x, "initial state");
    return sc.init.matrix;
  }
  if (!(sc.init.hi >= sc.init.lo)) throw parameter_error("scenario: empty init range");
  state_block x(sc.net.n_agents, sc.m);
  for (std::size_t i = 0; i < sc.net.n_agents; ++i)
    for (int mu = 0; mu <= sc.m; ++mu)
      x.at(i, mu) = sc.init.lo + (sc.init.hi - sc.init.lo) *
                                     rng::uniform(sc.init.seed, rng::stream_init, i,
                                                  static_cast<std::uint64_t>(mu));
  return x;
}

/// Executes a scenario. Sampled mode iterates the exact sampled-data update;
/// continuous mode emulates the continuous protocol with fixed-step forward
/// Euler, `substeps` internal steps per dt. Noise is drawn once per sampling
/// instant for leader-access agents and held over the interval. Deterministic
/// for a fixed scenario (including seeds).
inline trajectory_log run(const scenario& sc) {
  validate_scenario(sc);
  const std::size_t n = sc.net.n_agents;
  const int m = sc.m;
  const std::size_t steps = static_cast<std::size_t>(std::floor(sc.t_final / sc.dt + 1e-9));

  trajectory_log log;
  log.meta = sc;
  log.times.resize(steps + 1);
  log.states.reserve(steps + 1);
  log.refs = mat(steps + 1, m + 1);
  log.errors = mat(steps + 1, m + 1);

  state_block x = resolve_initial_state(sc);
  vec u_meas(n, 0.0);

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * sc.dt;
    log.times[k] = t;
    for (int mu = 0; mu <= m; ++mu) {
      const double ref = sc.signal.derivative(mu, t);
      log.refs(k, mu) = ref;
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i) err = std::max(err, std::abs(x.at(i, mu) - ref));
      log.errors(k, mu) = err;
    }
    log.states.push_back(x);
    if (k == steps) break;

    const double u_k = sc.signal.derivative(0, t);
    for (std::size_t i = 0; i < n; ++i)
      u_meas[i] = sc.net.leader_access[i] ? u_k + sc.noise.sample(i, k) : u_k;

    if (sc.mode.sampled) {
      x = sampled_step(x, u_meas, sc.dt, sc.net, sc.gains);
    } else {
      const double h = sc.dt / sc.mode.substeps;
      for (int s = 0; s < sc.mode.substeps; ++s) {
        const state_block dx = continuous_rhs(x, u_meas, sc.net, sc.gains);
        for (std::size_t j = 0; j < x.x.size(); ++j) x.x[j] += h * dx.x[j];
      }
    }

    for (double v : x.x)
      if (!std::isfinite(v) || std::abs(v) > 1e12) throw blow_up_error(k + 1, t + sc.dt);
  }
  return log;
}

/// Tail-window accuracy metrics per derivative order.
struct run_metrics {
  vec steady_state_err;                              // per mu, sup over the tail window
  std::vector<std::optional<double>> convergence_time;  // per mu; nullopt if never reached
  double tail_fraction = 0.2;
};

/// Convergence thresholds default to 10x the sampled-data accuracy shape
/// dt^{m-mu+1} with unit constants; callers can override.
inline vec default_thresholds(int m, double dt) {
  vec thr(m + 1);
  for (int mu = 0; mu <= m; ++mu) thr[mu] = 10.0 * std::pow(dt, static_cast<double>(m - mu + 1));
  return thr;
}

inline run_metrics metrics(const trajectory_log& log, double tail_fraction, const vec& thresholds) {
  if (!(tail_fraction > 0.0 && tail_fraction < 1.0))
    throw parameter_error("metrics: tail_fraction must be in (0,1)");
  const std::size_t n_times = log.times.size();
  const int m_plus1 = static_cast<int>(log.errors.cols);
  if (thresholds.size() != static_cast<std::size_t>(m_plus1))
    throw parameter_error("metrics: need one threshold per derivative order");
  const std::size_t n_tail = std::max<std::size_t>(1, static_cast<std::size_t>(
                                                          std::floor(tail_fraction * n_times)));
  if (n_tail > n_times) throw parameter_error("metrics: empty tail");
  const std::size_t tail_start = n_times - n_tail;

  run_metrics rm;
  rm.tail_fraction = tail_fraction;
  rm.steady_state_err.assign(m_plus1, 0.0);
  rm.convergence_time.assign(m_plus1, std::nullopt);
  for (int mu = 0; mu < m_plus1; ++mu) {
    double sup = 0.0;
    for (std::size_t k = tail_start; k < n_times; ++k) sup = std::max(sup, log.errors(k, mu));
    rm.steady_state_err[mu] = sup;

    // earliest time after which the error never exceeds the threshold
    std::size_t first_ok = 0;
    for (std::size_t k = n_times; k-- > 0;) {
      if (log.errors(k, mu) > thresholds[mu]) {
        first_ok = k + 1;
        break;
      }
    }
    if (first_ok < n_times) rm.convergence_time[mu] = log.times[first_ok];
  }
  return rm;
}

inline run_metrics metrics(const trajectory_log& log, double tail_fraction = 0.2) {
  return metrics(log, tail_fraction, default_thresholds(log.meta.m, log.meta.dt));
}

struct fit_result {
  double exponent = 0.0;
  double r_squared = 0.0;
};

/// Least-squares slope of log(err) against log(scale).
inline fit_result scaling_fit(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 3) throw parameter_error("scaling_fit: need at least 3 points");
  for (const auto& p : points)
    if (!(p.first > 0.0) || !(p.second > 0.0))
      throw parameter_error("scaling_fit: scales and errors must be positive");

  const double n = static_cast<double>(points.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : points) {
    const double x = std::log(p.first);
    const double y = std::log(p.second);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw parameter_error("scaling_fit: scales are degenerate");
  fit_result r;
  r.exponent = (n * sxy - sx * sy) / denom;
  const double ss_tot = syy - sy * sy / n;
  if (ss_tot <= 0.0) {
    r.r_squared = 1.0;  // all errors identical: the flat fit is exact
  } else {
    const double intercept = (sy - r.exponent * sx) / n;
    double ss_res = 0.0;
    for (const auto& p : points) {
      const double resid = std::log(p.second) - (intercept + r.exponent * std::log(p.first));
      ss_res += resid * resid;
    }
    r.r_squared = 1.0 - ss_res / ss_tot;
  }
  return r;
}

enum class sweep_param { dt, eps_bar };

struct sweep_result {
  std::vector<run_metrics> per_value;
  std::vector<fit_result> fits;  // per mu
  vec predicted_exponents;       // per mu: m-mu+1 for dt, (m-mu+1)/(m+1) for eps
};

/// Re-runs the scenario for each parameter value. Noise streams are fresh per
/// member run (child seed derived from the base seed and the value index).
inline sweep_result sweep(const scenario& base, sweep_param param, const vec& values) {
  if (values.size() < 3) throw parameter_error("sweep: need at least 3 values");
  for (double v : values)
    if (!(v > 0.0)) throw parameter_error("sweep: values must be positive");

  sweep_result out;
  out.per_value.reserve(values.size());
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    scenario sc = base;
    if (param == sweep_param::dt)
      sc.dt = values[idx];
    else
      sc.noise.eps_bar = values[idx];
    sc.noise.seed = rng::derive_seed(base.noise.seed, idx);
    const trajectory_log log = run(sc);
    out.per_value.push_back(metrics(log, 0.2, default_thresholds(sc.m, sc.dt)));
  }

  const int m = base.m;
  out.fits.resize(m + 1);
  out.predicted_exponents.resize(m + 1);
  for (int mu = 0; mu <= m; ++mu) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t idx = 0; idx < values.size(); ++idx)
      pts.push_back({values[idx], out.per_value[idx].steady_state_err[mu]});
    out.fits[mu] = scaling_fit(pts);
    out.predicted_exponents[mu] = (param == sweep_param::dt)
                                      ? static_cast<double>(m - mu + 1)
                                      : static_cast<double>(m - mu + 1) / (m + 1);
  }
  return out;
}

/// Verifies the Taylor-prediction remainder bound used by the sampled-data
/// analysis: r_mu = u^(mu)(t+dt) - sum_nu (dt^nu/nu!) u^(mu+nu)(t) must stay
/// within L dt^{m-mu+1} / (m-mu+1)!. Returns the max ratio |r_mu| / bound.
/// A signal whose (m+1)-th derivative bound is zero (polynomial of degree
/// <= m) must have zero remainder; the ratio is then 0 by convention, and a
/// non-vanishing remainder reports +infinity.
inline double taylor_remainder_check(const leader_signal& sig, double dt, const vec& t_grid) {
  if (!(dt > 0.0)) throw parameter_error("taylor_remainder_check: dt must be > 0");
  const int m = sig.order();
  const double bound_l = sig.deriv_bound();

  vec factorial(m + 2, 1.0);
  for (int nu = 1; nu <= m + 1; ++nu) factorial[nu] = factorial[nu - 1] * nu;

  double max_ratio = 0.0;
  for (double t : t_grid) {
    for (int mu = 0; mu <= m; ++mu) {
      double pred = 0.0;
      for (int nu = 0; nu <= m - mu; ++nu)
        pred += std::pow(dt, static_cast<double>(nu)) / factorial[nu] * sig.derivative(mu + nu, t);
      const double r = sig.derivative(mu, t + dt) - pred;
      const double bound = bound_l * std::pow(dt, static_cast<double>(m - mu + 1)) /
                           factorial[m - mu + 1];
      if (bound > 0.0) {
        max_ratio = std::max(max_ratio, std::abs(r) / bound);
      } else {
        const double scale = 1.0 + std::abs(sig.derivative(mu, t));
        if (std::abs(r) > 1e-12 * scale)
          return std::numeric_limits<double>::infinity();
      }
    }
  }
  return max_ratio;
}

}  // namespace distdiff
