#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "distdiff/analysis.hpp"
#include "distdiff/graph.hpp"
#include "distdiff/numerics.hpp"
#include "distdiff/protocol.hpp"
#include "distdiff/signals.hpp"
#include "distdiff/simulator.hpp"

namespace distdiff {

struct check_result {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct selftest_options {
  // test-harness hook: corrupts one fixture so the failure path is exercised
  bool corrupt_fixture = false;
};

/// Random connected network: a random spanning tree plus extra edges, with a
/// random non-empty leader set. Deterministic in (seed).
inline network random_connected_network(std::size_t n, std::uint64_t seed) {
  network net(n);
  for (std::size_t i = 1; i < n; ++i) {
    const std::size_t parent =
        static_cast<std::size_t>(rng::uniform(seed, rng::stream_graph, i, 0) * i);
    net.add_edge(i, std::min(parent, i - 1));
  }
  const std::size_t extra = n / 2;
  for (std::size_t e = 0; e < extra; ++e) {
    const std::size_t a =
        static_cast<std::size_t>(rng::uniform(seed, rng::stream_graph, 1000 + e, 1) * n);
    const std::size_t b =
        static_cast<std::size_t>(rng::uniform(seed, rng::stream_graph, 1000 + e, 2) * n);
    if (a != b) net.add_edge(std::min(a, n - 1), std::min(b, n - 1));
  }
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    if (rng::uniform(seed, rng::stream_graph, 2000 + i, 3) < 0.3) {
      net.set_leader(i);
      any = true;
    }
  }
  if (!any) net.set_leader(0);
  return net;
}

namespace selftest_detail {

inline check_result check_influence_matrix_positive(bool corrupt) {
  check_result r{"influence-matrix-positive-definite", true, ""};
  double worst = std::numeric_limits<double>::infinity();
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + trial % 17;
    const network net = random_connected_network(n, 100 + trial);
    if (validate(net) != violation::none) {
      r.pass = false;
      r.detail = "fixture network failed validation";
      return r;
    }
    const network_spectra sp = spectra(net, 1.0);
    worst = std::min(worst, sp.h_min_eig);
    if (!(sp.h_min_eig > (corrupt ? 1.0 : 0.0))) {
      r.pass = false;
      break;
    }
  }
  std::ostringstream os;
  os << "min eigenvalue over 100 random networks: " << worst;
  r.detail = os.str();
  return r;
}

inline check_result check_leader_weight_identity() {
  check_result r{"leader-weight-identity", true, ""};
  double worst = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + trial % 17;
    const network net = random_connected_network(n, 300 + trial);
    const network_spectra sp = spectra(net, 1.0);
    worst = std::max(worst, check_prop1(sp));
  }
  r.pass = worst <= 1e-9;
  std::ostringstream os;
  os << "max |H^-1 B 1 - 1| over 100 random networks: " << worst;
  r.detail = os.str();
  return r;
}

inline check_result check_signed_power_norms() {
  check_result r{"signed-power-norm-inequalities", true, ""};
  for (std::uint64_t trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + trial % 8;
    vec v(n);
    for (std::size_t i = 0; i < n; ++i)
      v[i] = -3.0 + 6.0 * rng::uniform(11, rng::stream_test, trial, i);
    const double alpha = 0.01 + 0.98 * rng::uniform(12, rng::stream_test, trial, 99);
    const double lhs = norm2(vec_signed_power(v, alpha));
    const double cap =
        std::pow(static_cast<double>(n), (1.0 - alpha) / 2.0) * std::pow(norm2(v), alpha);
    if (lhs > cap * (1.0 + 1e-12) ||
        power_sum(v, alpha) < std::pow(norm2(v), alpha) * (1.0 - 1e-12)) {
      r.pass = false;
      r.detail = "inequality violated at trial " + std::to_string(trial);
      return r;
    }
  }
  r.detail = "10000 random draws";
  return r;
}

inline check_result check_monotonicity_inequality() {
  check_result r{"signed-power-monotonicity", true, ""};
  for (std::uint64_t trial = 0; trial < 10000; ++trial) {
    const std::size_t n = 1 + trial % 6;
    vec v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = -3.0 + 6.0 * rng::uniform(13, rng::stream_test, trial, i);
      w[i] = -3.0 + 6.0 * rng::uniform(14, rng::stream_test, trial, i);
    }
    const double alpha = 0.05 + 3.0 * rng::uniform(15, rng::stream_test, trial, 50);
    const vec pv = vec_signed_power(v, alpha);
    const vec pw = vec_signed_power(w, alpha);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += (v[i] - w[i]) * (pv[i] - pw[i]);
    if (acc < -1e-12) {
      r.pass = false;
      r.detail = "sign violated at trial " + std::to_string(trial);
      return r;
    }
  }
  r.detail = "10000 random pairs, equality only at v = w";
  return r;
}

inline check_result check_taylor_remainder() {
  check_result r{"taylor-remainder-bound", true, ""};
  vec grid;
  for (int i = 0; i <= 200; ++i) grid.push_back(0.1 * i);

  // the fourth-order bound scales as dt^4/24; dt is kept large enough that
  // the bound stays far above the cancellation noise of the O(1) Taylor terms
  const double ratio1 =
      taylor_remainder_check(leader_signal::sinusoid(1.0, 0.5, 1), 1e-3, grid);
  const double ratio3 =
      taylor_remainder_check(leader_signal::sinusoid(1.0, 0.5, 3), 0.05, grid);
  if (!(ratio1 <= 1.0) || !(ratio3 <= 1.0)) {
    r.pass = false;
    r.detail = "sinusoid remainder exceeded the bound";
    return r;
  }

  // dyadic fixture: degree <= m polynomial must have exactly zero remainder
  vec dyadic_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  const double z1 = taylor_remainder_check(leader_signal::polynomial({1.0, 0.5}, 1),
                                           0x1.0p-10, dyadic_grid);
  const double z3 = taylor_remainder_check(leader_signal::polynomial({1.0, 0.5, 0.25}, 3),
                                           0x1.0p-10, dyadic_grid);
  if (z1 != 0.0 || z3 != 0.0) {
    r.pass = false;
    r.detail = "polynomial remainder not exactly zero";
    return r;
  }
  std::ostringstream os;
  os << "sinusoid max ratios " << ratio1 << ", " << ratio3 << "; polynomial remainder 0";
  r.detail = os.str();
  return r;
}

inline check_result check_homogeneity() {
  check_result r{"normalized-field-homogeneity", true, ""};
  double worst = 0.0;
  int usable_draws = 0;
  for (int m : {1, 3}) {
    network net = cycle_graph(6);
    net.set_leader(0);
    net.set_leader(2);
    const network_spectra sp = spectra(net, 1.0);
    vec kt(m + 1, 1.1);
    kt[0] = (m == 1) ? 2.0 : 5.0;
    if (m == 3) {
      kt[2] = 1.5;
      kt[3] = 2.0;
    } else {
      kt[1] = 0.55;
    }
    const gain_schedule g = design_gains(m, kt, 1.0);  // unit scale: normalized field

    for (std::uint64_t draw = 0; draw < 20; ++draw) {
      state_block z(net.n_agents, m);
      for (std::size_t i = 0; i < net.n_agents; ++i)
        for (int mu = 0; mu <= m; ++mu)
          z.at(i, mu) = -2.0 + 4.0 * rng::uniform(21, rng::stream_test, draw * 100 + i, mu);
      const vec hz0 = matvec(sp.h, z.column(0));
      bool ok = true;
      for (double v : hz0) ok = ok && std::abs(v) > 1e-3;
      if (!ok) continue;
      ++usable_draws;

      const state_block fz = error_rhs(z, 0.0, sp, g);
      for (double lambda : {0.5, 2.0, 10.0}) {
        state_block zs(net.n_agents, m);
        for (std::size_t i = 0; i < net.n_agents; ++i)
          for (int mu = 0; mu <= m; ++mu)
            zs.at(i, mu) = std::pow(lambda, static_cast<double>(m + 1 - mu)) * z.at(i, mu);
        const state_block fzs = error_rhs(zs, 0.0, sp, g);
        for (std::size_t i = 0; i < net.n_agents; ++i)
          for (int mu = 0; mu <= m; ++mu) {
            const double expected =
                std::pow(lambda, static_cast<double>(m - mu)) * fz.at(i, mu);
            const double rel =
                std::abs(fzs.at(i, mu) - expected) / std::max(1.0, std::abs(expected));
            worst = std::max(worst, rel);
          }
      }
    }
  }
  r.pass = worst <= 1e-9 && usable_draws >= 10;  // not vacuous
  std::ostringstream os;
  os << "max relative dilation mismatch: " << worst << " over " << usable_draws << " draws";
  r.detail = os.str();
  return r;
}

inline check_result check_polynomial_equilibrium() {
  check_result r{"polynomial-tracking-equilibrium", true, ""};
  double worst = 0.0;
  for (int m : {1, 3}) {
    network net = cycle_graph(5);
    net.set_leader(0);
    net.set_leader(1);
    const network_spectra sp = spectra(net, 0.0, l_tilde_mode::explicit_value(1.0));

    // dyadic coefficients of degree <= 2 keep the propagated stack bitwise
    // equal to the evaluated one, so sigma stays exactly zero
    vec coeffs = {0.5, 0.25};
    if (m == 3) coeffs = {0.5, 0.25, 0.125};
    const leader_signal sig = leader_signal::polynomial(coeffs, m);

    vec kt(m + 1, 1.1);
    kt[0] = 2.0;
    if (m == 3) {
      kt[2] = 1.5;
      kt[3] = 2.0;
    } else {
      kt[1] = 0.55;
    }
    const gain_schedule g = design_gains(m, kt, sp.l_tilde);

    const double dt = 0x1.0p-10;
    state_block x(net.n_agents, m);
    for (std::size_t i = 0; i < net.n_agents; ++i)
      for (int mu = 0; mu <= m; ++mu) x.at(i, mu) = sig.derivative(mu, 0.0);
    for (int k = 0; k < 1000; ++k) {
      const double t = k * dt;
      x = sampled_step(x, vec(net.n_agents, sig.derivative(0, t)), dt, net, g);
      for (std::size_t i = 0; i < net.n_agents; ++i)
        for (int mu = 0; mu <= m; ++mu)
          worst = std::max(worst, std::abs(x.at(i, mu) - sig.derivative(mu, (k + 1) * dt)));
    }
  }
  r.pass = worst <= 1e-9;
  std::ostringstream os;
  os << "max drift over 1000 steps: " << worst;
  r.detail = os.str();
  return r;
}

}  // namespace selftest_detail

/// The built-in property suite behind the selftest subcommand.
inline std::vector<check_result> run_property_suite(const selftest_options& opt = {}) {
  std::vector<check_result> out;
  out.push_back(selftest_detail::check_influence_matrix_positive(opt.corrupt_fixture));
  out.push_back(selftest_detail::check_leader_weight_identity());
  out.push_back(selftest_detail::check_signed_power_norms());
  out.push_back(selftest_detail::check_monotonicity_inequality());
  out.push_back(selftest_detail::check_taylor_remainder());
  out.push_back(selftest_detail::check_homogeneity());
  out.push_back(selftest_detail::check_polynomial_equilibrium());
  return out;
}

}  // namespace distdiff
