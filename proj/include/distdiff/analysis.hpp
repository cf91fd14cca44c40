#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "distdiff/numerics.hpp"
#include "distdiff/protocol.hpp"

namespace distdiff {

/// V(z) = 1/2 z0' H z0 - z0' |z1|^2 sign(z1) + (h/4) sum |z1_i|^4.
inline double lyapunov_v(const vec& z0, const vec& z1, const mat& h_mat, double h) {
  if (z0.size() != h_mat.rows || z1.size() != h_mat.rows) throw shape_error("lyapunov_v: size mismatch");
  const vec hz0 = matvec(h_mat, z0);
  return 0.5 * dot(z0, hz0) - dot(z0, vec_signed_power(z1, 2.0)) + 0.25 * h * power_sum(z1, 4.0);
}

struct pd_result {
  bool positive_definite = false;
  double margin = 0.0;  // min eigenvalue of the Schur complement h I/4 - H^{-1}/2
};

/// Positive definiteness of M(h) = [[H/2, -I/2], [-I/2, h I/4]] via the Schur
/// complement of the H/2 block. Requires H itself SPD.
inline pd_result m_matrix_pd(const mat& h_mat, double h) {
  const sym_eigen_result eh = symmetric_eigen(h_mat);
  if (!(eh.eigenvalues.front() > 0.0)) throw not_spd_error("m_matrix_pd: H must be SPD");
  const std::size_t n = h_mat.rows;

  // Schur complement h I/4 - (H/2)^{-1}/4 = h I/4 - H^{-1}/2
  const cholesky_factor f = cholesky(h_mat);
  mat schur(n, n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    vec ej(n, 0.0);
    ej[j] = 1.0;
    const vec hinv_col = f.solve(ej);
    for (std::size_t i = 0; i < n; ++i) schur(i, j) = -0.5 * hinv_col[i];
    schur(j, j) += 0.25 * h;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (schur(i, j) + schur(j, i));
      schur(i, j) = avg;
      schur(j, i) = avg;
    }
  const sym_eigen_result es = symmetric_eigen(schur);
  pd_result r;
  r.margin = es.eigenvalues.front();
  r.positive_definite = r.margin > 0.0;
  return r;
}

struct eta_gamma {
  double eta = 0.0;
  double gamma = 0.0;
};

/// eta_0 = (H z0 - |z1|^2 sgn)' (|H z0|^{1/2} sgn - z1), nonnegative by the
/// monotonicity inequality. gamma_0 is the exact sup over xi in [-1,1]^N of
/// -a'(sign(H z0) + xi/k1) with a = k~_1 (2 z0*|z1| + h |z1|^3 sgn): each
/// component of xi is chosen adversarially at +/-1, giving ||a||_1 / k1.
inline eta_gamma eta0_gamma0(const vec& z0, const vec& z1, const mat& h_mat,
                             const gain_schedule& g, double h) {
  if (z0.size() != h_mat.rows || z1.size() != h_mat.rows) throw shape_error("eta0_gamma0: size mismatch");
  const double k1 = g.k[1];
  const double kt1 = g.k_tilde[1];
  const vec hz0 = matvec(h_mat, z0);

  eta_gamma r;
  {
    double eta = 0.0;
    for (std::size_t i = 0; i < z0.size(); ++i)
      eta += (hz0[i] - signed_power(z1[i], 2.0)) * (signed_power(hz0[i], 0.5) - z1[i]);
    r.eta = eta;
  }
  {
    double gamma = 0.0;
    for (std::size_t i = 0; i < z0.size(); ++i) {
      const double a = kt1 * (2.0 * z0[i] * std::abs(z1[i]) + h * signed_power(z1[i], 3.0));
      gamma += -a * signed_power(hz0[i], 0.0) + std::abs(a) / k1;
    }
    r.gamma = gamma;
  }
  return r;
}

/// eta_1 = sum |z1_i|^3 (1 - 1/k1); gamma_1 is the exact xi-sup of
/// -(2 (H^{-1}|z1|^2 sgn) * |z1|)' (sign(z1) + xi/k1), same corner argument.
inline eta_gamma eta1_gamma1(const vec& z1, const mat& h_mat, double k1) {
  if (z1.size() != h_mat.rows) throw shape_error("eta1_gamma1: size mismatch");
  if (!(k1 > 1.0)) throw parameter_error("eta1_gamma1: k1 must be > 1");
  const vec hinv_z1sq = spd_solve(h_mat, vec_signed_power(z1, 2.0));

  eta_gamma r;
  r.eta = power_sum(z1, 3.0) * (1.0 - 1.0 / k1);
  double gamma = 0.0;
  for (std::size_t i = 0; i < z1.size(); ++i) {
    const double b = 2.0 * hinv_z1sq[i] * std::abs(z1[i]);
    gamma += -b * signed_power(z1[i], 0.0) + std::abs(b) / k1;
  }
  r.gamma = gamma;
  return r;
}

namespace detail {

/// Deterministic sphere-sample maximization with a coordinate-descent polish
/// of the best few starts. Lower estimate of the true sup by construction.
/// Polish candidates come from a fixed-size sample prefix, so enlarging the
/// budget only adds raw coverage: estimate(count) is monotone in count.
template <typename Objective>
double sphere_sup_estimate(std::size_t dim, int samples, std::uint64_t seed, Objective&& f,
                           int polish_points = 10, int polish_iters = 50) {
  const std::vector<vec> pts = unit_sphere_grid(dim, static_cast<std::size_t>(samples), seed);
  double best = -std::numeric_limits<double>::infinity();
  for (const vec& p : pts) best = std::max(best, f(p));

  const std::size_t pool = std::min(pts.size(), 2 * dim + 160);
  std::vector<std::pair<double, std::size_t>> scored;
  scored.reserve(pool);
  for (std::size_t i = 0; i < pool; ++i) scored.push_back({f(pts[i]), i});
  std::stable_sort(scored.begin(), scored.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const int starts = std::min<std::size_t>(polish_points, scored.size());
  for (int s = 0; s < starts; ++s) {
    vec z = pts[scored[s].second];
    double val = scored[s].first;
    double step = 0.2;
    for (int it = 0; it < polish_iters; ++it) {
      bool improved = false;
      for (std::size_t d = 0; d < dim; ++d) {
        for (double sgn : {1.0, -1.0}) {
          vec cand = z;
          cand[d] += sgn * step;
          const double n = norm2(cand);
          if (n < 1e-12) continue;
          for (double& x : cand) x /= n;
          const double cv = f(cand);
          if (cv > val) {
            val = cv;
            z = cand;
            improved = true;
          }
        }
      }
      if (!improved) step *= 0.5;
    }
    best = std::max(best, val);
  }
  return best;
}

}  // namespace detail

/// Sampled estimate of h* = sup over the unit z1-sphere of gamma_1/eta_1.
/// A lower estimate of the true sup, never a certificate.
inline double estimate_h_star(const mat& h_mat, double k1, int samples, std::uint64_t seed) {
  if (!(k1 > 1.0)) throw parameter_error("estimate_h_star: k1 must be > 1");
  if (samples < 1) throw parameter_error("estimate_h_star: samples must be >= 1");
  const cholesky_factor f = cholesky(h_mat);
  auto objective = [&](const vec& z1) {
    const vec hinv_z1sq = f.solve(vec_signed_power(z1, 2.0));
    double gamma = 0.0;
    for (std::size_t i = 0; i < z1.size(); ++i) {
      const double b = 2.0 * hinv_z1sq[i] * std::abs(z1[i]);
      gamma += -b * signed_power(z1[i], 0.0) + std::abs(b) / k1;
    }
    const double eta = power_sum(z1, 3.0) * (1.0 - 1.0 / k1);
    return gamma / eta;  // eta > 0 on the sphere since k1 > 1
  };
  return detail::sphere_sup_estimate(h_mat.rows, samples, seed, objective);
}

/// h recommendation: clear both the positive-definiteness threshold
/// 2 lambda_max(H^{-1}) and the h* estimate, with a safety factor.
inline double recommended_h(const mat& h_mat, double k1, int samples, std::uint64_t seed,
                            double safety = 1.1) {
  const sym_eigen_result eh = symmetric_eigen(h_mat);
  if (!(eh.eigenvalues.front() > 0.0)) throw not_spd_error("recommended_h: H must be SPD");
  const double pd_floor = 2.0 / eh.eigenvalues.front();
  const double h_star = estimate_h_star(h_mat, k1, samples, seed);
  return std::max(pd_floor, h_star) * safety;
}

/// Largest sampled value of -h eta_1 + gamma_1 on the unit z1-sphere; must be
/// negative for the chosen h before the k0 estimate is meaningful.
inline double worst_h_margin(const mat& h_mat, double k1, double h, int samples,
                             std::uint64_t seed) {
  const cholesky_factor f = cholesky(h_mat);
  auto objective = [&](const vec& z1) {
    const vec hinv_z1sq = f.solve(vec_signed_power(z1, 2.0));
    double gamma = 0.0;
    for (std::size_t i = 0; i < z1.size(); ++i) {
      const double b = 2.0 * hinv_z1sq[i] * std::abs(z1[i]);
      gamma += -b * signed_power(z1[i], 0.0) + std::abs(b) / k1;
    }
    const double eta = power_sum(z1, 3.0) * (1.0 - 1.0 / k1);
    return -h * eta + gamma;
  };
  return detail::sphere_sup_estimate(h_mat.rows, samples, seed, objective);
}

struct k0_estimate_result {
  double value = 0.0;          // max sampled gamma_0/eta_0 where eta_0 > tol
  bool hypothesis_ok = true;   // gamma_0 < 0 held wherever eta_0 ~ 0
  std::optional<vec> witness;  // concatenated (z0, z1) violating the hypothesis
};

/// Sampled estimate of the k0 threshold sup gamma_0/eta_0 on the unit
/// (z0, z1)-sphere. Points with eta_0 below eta_tol route to the
/// "gamma_0 < 0" hypothesis check instead of the ratio. Preconditions on h
/// (M(h) PD and -h eta_1 + gamma_1 < 0 at sampled points) are verified first.
inline k0_estimate_result estimate_k0_star(const mat& h_mat, const gain_schedule& g, double h,
                                           int samples, std::uint64_t seed,
                                           double eta_tol = 1e-8) {
  if (g.m != 1) throw parameter_error("estimate_k0_star: only the m = 1 analysis is defined");
  if (!(g.k[1] > 1.0)) throw parameter_error("estimate_k0_star: requires k1 > 1");
  if (samples < 1) throw parameter_error("estimate_k0_star: samples must be >= 1");
  if (!m_matrix_pd(h_mat, h).positive_definite)
    throw parameter_error("estimate_k0_star: M(h) not positive definite for this h");
  if (!(worst_h_margin(h_mat, g.k[1], h, samples, seed) < 0.0))
    throw parameter_error("estimate_k0_star: -h eta_1 + gamma_1 not negative at sampled points");

  const std::size_t n = h_mat.rows;
  k0_estimate_result result;
  double best = -std::numeric_limits<double>::infinity();

  auto split = [n](const vec& z, vec& z0, vec& z1) {
    z0.assign(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(n));
    z1.assign(z.begin() + static_cast<std::ptrdiff_t>(n), z.end());
  };
  auto objective = [&](const vec& z) {
    vec z0, z1;
    split(z, z0, z1);
    const eta_gamma eg = eta0_gamma0(z0, z1, h_mat, g, h);
    if (eg.eta > eta_tol) return eg.gamma / eg.eta;
    if (!(eg.gamma < 0.0) && !result.witness) {
      result.hypothesis_ok = false;
      result.witness = z;
    }
    return -std::numeric_limits<double>::infinity();
  };

  best = detail::sphere_sup_estimate(2 * n, samples, seed, objective);
  result.value = best;
  return result;
}

}  // namespace distdiff
