#pragma once

#include <cstddef>
#include <queue>
#include <set>
#include <utility>
#include <vector>

#include "distdiff/numerics.hpp"

namespace distdiff {

/// Undirected communication graph plus per-agent leader-access flags b_i.
/// Edges are stored as ordered (min, max) pairs in a set, so the edge set is
/// canonical regardless of insertion order.
struct network {
  std::size_t n_agents = 0;
  std::set<std::pair<std::size_t, std::size_t>> edges;
  std::vector<bool> leader_access;

  explicit network(std::size_t n = 0) : n_agents(n), leader_access(n, false) {}

  /// Stores the unordered pair {i, j}. Self-loops are stored as given and
  /// flagged later by validate().
  void add_edge(std::size_t i, std::size_t j) {
    if (i >= n_agents || j >= n_agents) throw parameter_error("network: agent index out of range");
    edges.insert({std::min(i, j), std::max(i, j)});
  }

  void set_leader(std::size_t i, bool flag = true) {
    if (i >= n_agents) throw parameter_error("network: agent index out of range");
    leader_access[i] = flag;
  }

  std::size_t degree(std::size_t i) const {
    std::size_t d = 0;
    for (const auto& e : edges)
      if (e.first == i || e.second == i) ++d;
    return d;
  }
};

enum class violation { none, disconnected, no_leader_access, self_loop };

inline const char* violation_name(violation v) {
  switch (v) {
    case violation::none: return "None";
    case violation::disconnected: return "Disconnected";
    case violation::no_leader_access: return "NoLeaderAccess";
    case violation::self_loop: return "SelfLoop";
  }
  return "Unknown";
}

/// Single cycle 0-1-2-...-(n-1)-0 with no leader flags set.
inline network cycle_graph(std::size_t n) {
  if (n < 3) throw parameter_error("cycle_graph: need at least 3 agents");
  network net(n);
  for (std::size_t i = 0; i < n; ++i) net.add_edge(i, (i + 1) % n);
  return net;
}

/// Checks the standing connectivity assumption: undirected (by storage),
/// no self-loops, connected, and at least one agent with leader access.
/// Returns the first violation found rather than throwing.
inline violation validate(const network& net) {
  if (net.n_agents == 0) return violation::disconnected;
  for (const auto& e : net.edges)
    if (e.first == e.second) return violation::self_loop;

  // breadth-first search from vertex 0
  std::vector<std::vector<std::size_t>> adj(net.n_agents);
  for (const auto& e : net.edges) {
    adj[e.first].push_back(e.second);
    adj[e.second].push_back(e.first);
  }
  std::vector<bool> seen(net.n_agents, false);
  std::queue<std::size_t> q;
  q.push(0);
  seen[0] = true;
  std::size_t visited = 1;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    for (std::size_t w : adj[u])
      if (!seen[w]) {
        seen[w] = true;
        ++visited;
        q.push(w);
      }
  }
  if (visited != net.n_agents) return violation::disconnected;

  bool any_leader = false;
  for (bool b : net.leader_access) any_leader = any_leader || b;
  if (!any_leader) return violation::no_leader_access;
  return violation::none;
}

/// Graph Laplacian L = diag(A 1) - A.
inline mat laplacian(const network& net) {
  mat l(net.n_agents, net.n_agents, 0.0);
  for (const auto& e : net.edges) {
    l(e.first, e.second) -= 1.0;
    l(e.second, e.first) -= 1.0;
    l(e.first, e.first) += 1.0;
    l(e.second, e.second) += 1.0;
  }
  return l;
}

/// How the scalar factor in the disturbance scale is obtained. The notation
/// section of the underlying method reads "largest singular value", while the
/// worked numeric scenarios are only consistent with the spectral radius
/// (which is exactly 1 for any valid network). Both are offered plus a direct
/// override; the conservative singular-value reading is the default.
enum class l_tilde_kind { singular, spectral_radius, explicit_value };

struct l_tilde_mode {
  l_tilde_kind kind = l_tilde_kind::singular;
  double value = 0.0;  // used by explicit_value only

  static l_tilde_mode singular() { return {l_tilde_kind::singular, 0.0}; }
  static l_tilde_mode spectral_radius() { return {l_tilde_kind::spectral_radius, 0.0}; }
  static l_tilde_mode explicit_value(double v) { return {l_tilde_kind::explicit_value, v}; }
};

/// Spectral quantities of the influence matrix H = L + B that the protocol
/// and the gain analysis consume. Immutable after construction.
struct network_spectra {
  mat laplacian;
  mat b_diag;
  mat h;  // L + B, positive definite for any validated network
  double h_min_eig = 0.0;
  double h_max_eig = 0.0;
  double h_inv_max_eig = 0.0;   // lambda_max(H^{-1}) = 1 / lambda_min(H)
  double sigma_max_hinvb = 0.0;  // largest singular value of H^{-1} B
  double rho_hinvb = 0.0;        // largest-magnitude eigenvalue of H^{-1} B (power iteration)
  double l_tilde = 0.0;
  vec hinvb_one;  // H^{-1} B 1, equals 1 for any validated network

  mat hinvb() const {
    const std::size_t n = h.rows;
    const cholesky_factor f = cholesky(h);
    mat x(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (b_diag(j, j) == 0.0) continue;
      vec col(n, 0.0);
      col[j] = b_diag(j, j);
      const vec sol = f.solve(col);
      for (std::size_t i = 0; i < n; ++i) x(i, j) = sol[i];
    }
    return x;
  }
};

inline network_spectra spectra(const network& net, double deriv_bound,
                               l_tilde_mode mode = l_tilde_mode::singular()) {
  if (!(deriv_bound >= 0.0)) throw parameter_error("spectra: deriv_bound must be >= 0");
  const violation v = validate(net);
  if (v != violation::none)
    throw parameter_error(std::string("spectra: invalid network: ") + violation_name(v));

  network_spectra sp;
  sp.laplacian = laplacian(net);
  const std::size_t n = net.n_agents;
  sp.b_diag = mat(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) sp.b_diag(i, i) = net.leader_access[i] ? 1.0 : 0.0;
  sp.h = sp.laplacian;
  for (std::size_t i = 0; i < n; ++i) sp.h(i, i) += sp.b_diag(i, i);

  const sym_eigen_result eh = symmetric_eigen(sp.h);
  sp.h_min_eig = eh.eigenvalues.front();
  sp.h_max_eig = eh.eigenvalues.back();
  if (!(sp.h_min_eig > 0.0))
    throw not_spd_error("spectra: H = L + B not positive definite (should not happen on a validated network)");
  sp.h_inv_max_eig = 1.0 / sp.h_min_eig;

  const cholesky_factor f = cholesky(sp.h);
  vec b_one(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) b_one[i] = sp.b_diag(i, i);
  sp.hinvb_one = f.solve(b_one);

  sp.sigma_max_hinvb = largest_singular_value(sp.hinvb());

  // power iteration for the spectral radius of H^{-1}B; 1 is always an
  // eigenvalue with eigenvector 1, and no eigenvalue exceeds it, so the
  // all-ones start vector is already aligned with the dominant direction
  {
    vec x(n, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 500; ++it) {
      vec bx(n);
      for (std::size_t i = 0; i < n; ++i) bx[i] = sp.b_diag(i, i) * x[i];
      vec y = f.solve(bx);
      const double ny = norm2(y);
      if (ny == 0.0) {
        lambda = 0.0;
        break;
      }
      const double next = dot(x, y) / dot(x, x);
      for (double& t : y) t /= ny;
      x = std::move(y);
      if (std::abs(next - lambda) <= 1e-13 * std::max(1.0, std::abs(next)) && it > 2) {
        lambda = next;
        break;
      }
      lambda = next;
    }
    sp.rho_hinvb = std::abs(lambda);
  }

  switch (mode.kind) {
    case l_tilde_kind::singular:
      sp.l_tilde = static_cast<double>(n) * deriv_bound * sp.sigma_max_hinvb;
      break;
    case l_tilde_kind::spectral_radius:
      sp.l_tilde = static_cast<double>(n) * deriv_bound * sp.rho_hinvb;
      break;
    case l_tilde_kind::explicit_value:
      if (!(mode.value > 0.0)) throw parameter_error("spectra: explicit l_tilde must be > 0");
      sp.l_tilde = mode.value;
      break;
  }
  return sp;
}

/// Max-abs deviation of H^{-1} B 1 from the all-ones vector.
inline double check_prop1(const network_spectra& sp) {
  vec b_one(sp.h.rows, 0.0);
  for (std::size_t i = 0; i < sp.h.rows; ++i) b_one[i] = sp.b_diag(i, i);
  vec x = spd_solve(sp.h, b_one);
  double dev = 0.0;
  for (double t : x) dev = std::max(dev, std::abs(t - 1.0));
  return dev;
}

}  // namespace distdiff
