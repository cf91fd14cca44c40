#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "distdiff/graph.hpp"
#include "distdiff/numerics.hpp"

namespace distdiff {

/// Injection gains k_0..k_m together with the normalized gains they derive
/// from and the disturbance scale the protocol multiplies by.
///
/// For m > 1 the recursion is k_mu = k~_mu * k_{mu-1}^{(m-mu)/(m-(mu-1))}
/// with k_0 = k~_0. For m = 1 that exponent degenerates to zero while the
/// second-order analysis normalizes by k~_1 = k_1/k_0, so the m = 1 build
/// uses k_1 = k~_1 * k_0.
struct gain_schedule {
  int m = 1;
  vec k;        // length m+1
  vec k_tilde;  // length m+1
  double l_tilde = 1.0;
};

inline double recursion_exponent(int m, int mu) {
  return static_cast<double>(m - mu) / static_cast<double>(m - (mu - 1));
}

inline gain_schedule design_gains(int m, const vec& k_tilde, double l_tilde) {
  if (m < 1) throw parameter_error("design_gains: m must be >= 1");
  if (k_tilde.size() != static_cast<std::size_t>(m) + 1)
    throw parameter_error("design_gains: need m+1 normalized gains");
  for (double kt : k_tilde)
    if (!(kt > 0.0) || !std::isfinite(kt)) throw parameter_error("design_gains: gains must be > 0");
  if (!(l_tilde > 0.0)) throw parameter_error("design_gains: l_tilde must be > 0");

  gain_schedule g;
  g.m = m;
  g.k_tilde = k_tilde;
  g.l_tilde = l_tilde;
  g.k.resize(k_tilde.size());
  g.k[0] = k_tilde[0];
  if (m == 1) {
    g.k[1] = k_tilde[1] * g.k[0];
  } else {
    for (int mu = 1; mu <= m; ++mu)
      g.k[mu] = k_tilde[mu] * std::pow(g.k[mu - 1], recursion_exponent(m, mu));
  }
  return g;
}

/// Explicit override: caller supplies k directly, the recursion is skipped
/// and the normalized gains are back-computed for reporting.
inline gain_schedule gains_from_explicit(int m, const vec& k, double l_tilde) {
  if (m < 1) throw parameter_error("gains_from_explicit: m must be >= 1");
  if (k.size() != static_cast<std::size_t>(m) + 1)
    throw parameter_error("gains_from_explicit: need m+1 gains");
  for (double kv : k)
    if (!(kv > 0.0) || !std::isfinite(kv)) throw parameter_error("gains_from_explicit: gains must be > 0");
  if (!(l_tilde > 0.0)) throw parameter_error("gains_from_explicit: l_tilde must be > 0");

  gain_schedule g;
  g.m = m;
  g.k = k;
  g.l_tilde = l_tilde;
  g.k_tilde.resize(k.size());
  g.k_tilde[0] = k[0];
  if (m == 1) {
    g.k_tilde[1] = k[1] / k[0];
  } else {
    for (int mu = 1; mu <= m; ++mu)
      g.k_tilde[mu] = k[mu] / std::pow(k[mu - 1], recursion_exponent(m, mu));
  }
  return g;
}

/// N x (m+1) block of per-agent states (or error variables): row i holds
/// x_{i,0} .. x_{i,m}. Step functions return fresh blocks; a block is never
/// mutated once handed out.
struct state_block {
  std::size_t n_agents = 0;
  int m = 0;
  std::vector<double> x;  // row-major

  state_block() = default;
  state_block(std::size_t n, int order, double fill = 0.0)
      : n_agents(n), m(order), x(n * static_cast<std::size_t>(order + 1), fill) {}

  double& at(std::size_t agent, int mu) { return x[agent * (m + 1) + mu]; }
  double at(std::size_t agent, int mu) const { return x[agent * (m + 1) + mu]; }

  vec column(int mu) const {
    vec c(n_agents);
    for (std::size_t i = 0; i < n_agents; ++i) c[i] = at(i, mu);
    return c;
  }
};

using agent_state_block = state_block;
using error_block = state_block;

/// Innovation sigma_i = sum_{j in N_i} (x_{i,0} - x_{j,0}) + b_i (x_{i,0} - u_i).
/// Accumulated edge-by-edge in canonical edge order, so the result is
/// reproducible bit for bit.
inline vec innovation(const vec& x0, const vec& u_meas, const network& net) {
  if (x0.size() != net.n_agents || u_meas.size() != net.n_agents)
    throw shape_error("innovation: size mismatch with network");
  vec sigma(net.n_agents, 0.0);
  for (const auto& e : net.edges) {
    sigma[e.first] += x0[e.first] - x0[e.second];
    sigma[e.second] += x0[e.second] - x0[e.first];
  }
  for (std::size_t i = 0; i < net.n_agents; ++i)
    if (net.leader_access[i]) sigma[i] += x0[i] - u_meas[i];
  return sigma;
}

namespace detail {

// all mu share one injection shape: coeff_mu = k_mu * l_tilde^{(mu+1)/(m+1)},
// power_mu = (m-mu)/(m+1); the mu = m row degenerates to k_m * l_tilde * sign
inline void injection_tables(const gain_schedule& g, vec& coeff, vec& power) {
  const int m = g.m;
  coeff.resize(m + 1);
  power.resize(m + 1);
  for (int mu = 0; mu <= m; ++mu) {
    coeff[mu] = g.k[mu] * std::pow(g.l_tilde, static_cast<double>(mu + 1) / (m + 1));
    power[mu] = static_cast<double>(m - mu) / (m + 1);
  }
}

}  // namespace detail

/// Continuous-time right-hand side of the protocol, per-agent measurements.
inline state_block continuous_rhs(const state_block& x, const vec& u_meas, const network& net,
                                  const gain_schedule& g) {
  if (x.n_agents != net.n_agents || x.m != g.m) throw shape_error("continuous_rhs: shape mismatch");
  const int m = g.m;
  const vec sigma = innovation(x.column(0), u_meas, net);
  vec coeff, power;
  detail::injection_tables(g, coeff, power);

  state_block dx(x.n_agents, m);
  for (std::size_t i = 0; i < x.n_agents; ++i) {
    for (int mu = 0; mu <= m; ++mu) {
      const double chain = (mu < m) ? x.at(i, mu + 1) : 0.0;
      dx.at(i, mu) = chain - coeff[mu] * signed_power(sigma[i], power[mu]);
    }
  }
  return dx;
}

/// Noiseless single-measurement form: every leader-access agent sees the same u.
inline state_block continuous_rhs(const state_block& x, double u, const network& net,
                                  const gain_schedule& g) {
  return continuous_rhs(x, vec(net.n_agents, u), net, g);
}

/// Error dynamics: e_mu = x_mu - H^{-1}B1 u^{(mu)}. The top row is driven by
/// the unknown (m+1)-th derivative u_m1 through H^{-1}B1.
inline state_block error_rhs(const state_block& e, double u_m1, const network_spectra& sp,
                             const gain_schedule& g) {
  if (e.n_agents != sp.h.rows || e.m != g.m) throw shape_error("error_rhs: shape mismatch");
  const int m = g.m;
  const vec he0 = matvec(sp.h, e.column(0));
  vec coeff, power;
  detail::injection_tables(g, coeff, power);

  state_block de(e.n_agents, m);
  for (std::size_t i = 0; i < e.n_agents; ++i) {
    for (int mu = 0; mu <= m; ++mu) {
      double chain;
      if (mu < m)
        chain = e.at(i, mu + 1);
      else
        chain = -sp.hinvb_one[i] * u_m1;
      de.at(i, mu) = chain - coeff[mu] * signed_power(he0[i], power[mu]);
    }
  }
  return de;
}

/// One step of the exact sampled-data protocol: a Taylor prediction of the
/// integrator chain plus the sampled injection. For m = 1 this is exactly the
/// forward-Euler discretization of the continuous protocol.
inline state_block sampled_step(const state_block& x, const vec& u_meas, double dt,
                                const network& net, const gain_schedule& g) {
  if (!(dt > 0.0)) throw parameter_error("sampled_step: dt must be > 0");
  if (x.n_agents != net.n_agents || x.m != g.m) throw shape_error("sampled_step: shape mismatch");
  const int m = g.m;
  const vec sigma = innovation(x.column(0), u_meas, net);
  vec coeff, power;
  detail::injection_tables(g, coeff, power);

  // dt^nu / nu! with exact factorials
  vec taylor(m + 1);
  taylor[0] = 1.0;
  double fact = 1.0;
  for (int nu = 1; nu <= m; ++nu) {
    fact *= static_cast<double>(nu);
    taylor[nu] = std::pow(dt, static_cast<double>(nu)) / fact;
  }

  state_block next(x.n_agents, m);
  for (std::size_t i = 0; i < x.n_agents; ++i) {
    for (int mu = 0; mu <= m; ++mu) {
      double pred = 0.0;
      for (int nu = 0; nu <= m - mu; ++nu) pred += taylor[nu] * x.at(i, mu + nu);
      next.at(i, mu) = pred - dt * coeff[mu] * signed_power(sigma[i], power[mu]);
    }
  }
  return next;
}

}  // namespace distdiff
