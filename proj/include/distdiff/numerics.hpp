#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace distdiff {

using vec = std::vector<double>;

struct parameter_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct not_spd_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix. Sizes stay small (a few hundred at most), so no
/// attempt is made at blocking or sparsity.
struct mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> a;

  mat() = default;
  mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

  static mat identity(std::size_t n) {
    mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline bool all_finite(const vec& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

inline bool all_finite(const mat& m) {
  for (double x : m.a)
    if (!std::isfinite(x)) return false;
  return true;
}

inline void require_finite(const vec& v, const char* what) {
  if (!all_finite(v)) throw parameter_error(std::string(what) + ": non-finite entry");
}

inline void require_finite(const mat& m, const char* what) {
  if (!all_finite(m)) throw parameter_error(std::string(what) + ": non-finite entry");
}

// --- elementary vector/matrix operations -----------------------------------

inline double dot(const vec& x, const vec& y) {
  if (x.size() != y.size()) throw shape_error("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(const vec& x) { return std::sqrt(dot(x, x)); }

inline double norm1(const vec& x) {
  double s = 0.0;
  for (double v : x) s += std::abs(v);
  return s;
}

inline double norm_inf(const vec& x) {
  double s = 0.0;
  for (double v : x) s = std::max(s, std::abs(v));
  return s;
}

inline vec matvec(const mat& m, const vec& x) {
  if (m.cols != x.size()) throw shape_error("matvec: size mismatch");
  vec y(m.rows, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < m.cols; ++j) s += m(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

inline mat matmul(const mat& a, const mat& b) {
  if (a.cols != b.rows) throw shape_error("matmul: size mismatch");
  mat c(a.rows, b.cols, 0.0);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

inline mat transpose(const mat& m) {
  mat t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
  return t;
}

inline double frobenius_norm(const mat& m) {
  double s = 0.0;
  for (double v : m.a) s += v * v;
  return std::sqrt(s);
}

inline double max_abs(const mat& m) {
  double s = 0.0;
  for (double v : m.a) s = std::max(s, std::abs(v));
  return s;
}

// --- signed powers ----------------------------------------------------------

/// |x|^alpha * sign(x). For alpha = 0 this is the sign function with
/// sign(0) := 0, the selection used throughout the sampled implementation.
inline double signed_power(double x, double alpha) {
  if (!(alpha >= 0.0)) throw parameter_error("signed_power: alpha must be >= 0");
  if (!std::isfinite(x)) throw parameter_error("signed_power: non-finite argument");
  const double sgn = (x > 0.0) ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
  if (alpha == 0.0) return sgn;
  if (x == 0.0) return 0.0;
  return std::pow(std::abs(x), alpha) * sgn;
}

inline vec vec_signed_power(const vec& v, double alpha) {
  vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = signed_power(v[i], alpha);
  return out;
}

/// Sum_i |v_i|^alpha.
inline double power_sum(const vec& v, double alpha) {
  if (!(alpha >= 0.0)) throw parameter_error("power_sum: alpha must be >= 0");
  require_finite(v, "power_sum");
  double s = 0.0;
  for (double x : v) s += std::pow(std::abs(x), alpha);
  return s;
}

// --- symmetric eigendecomposition (cyclic Jacobi) ---------------------------

struct eigen_options {
  double symmetry_tol = 1e-12;    // max |M - M^T| entry, scaled by max(1, max|M|)
  double off_diagonal_tol = 1e-13;  // stop when off-diagonal Frobenius norm <= tol * ||M||_F
  int max_sweeps = 100;
};

struct sym_eigen_result {
  vec eigenvalues;  // ascending
  mat eigenvectors;  // columns, M * v_i = lambda_i * v_i
};

inline void require_symmetric(const mat& m, double tol) {
  if (m.rows != m.cols) throw shape_error("symmetric op: matrix not square");
  const double scale = std::max(1.0, max_abs(m));
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = i + 1; j < m.cols; ++j)
      if (std::abs(m(i, j) - m(j, i)) > tol * scale)
        throw shape_error("symmetric op: matrix not symmetric within tolerance");
}

/// Cyclic Jacobi with threshold sweeps. Chosen over a faster tridiagonal
/// path because problem sizes are tiny and bit-level run-to-run determinism
/// matters more than speed here.
inline sym_eigen_result symmetric_eigen(const mat& m, const eigen_options& opt = {}) {
  require_finite(m, "symmetric_eigen");
  require_symmetric(m, opt.symmetry_tol);
  const std::size_t n = m.rows;
  mat a = m;
  // enforce exact symmetry of the working copy so rotations stay consistent
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = avg;
      a(j, i) = avg;
    }
  mat v = mat::identity(n);
  const double scale = std::max(frobenius_norm(m), 1e-300);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return std::sqrt(2.0 * s);
  };

  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    if (off_norm() <= opt.off_diagonal_tol * scale) break;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e154) {
          t = 1.0 / (2.0 * theta);
        } else {
          t = 1.0 / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          if (i == p || i == q) continue;
          const double aip = a(i, p);
          const double aiq = a(i, q);
          a(i, p) = aip - s * (aiq + tau * aip);
          a(p, i) = a(i, p);
          a(i, q) = aiq + s * (aip - tau * aiq);
          a(q, i) = a(i, q);
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v(i, p);
          const double viq = v(i, q);
          v(i, p) = vip - s * (viq + tau * vip);
          v(i, q) = viq + s * (vip - tau * viq);
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) < a(j, j); });

  sym_eigen_result r;
  r.eigenvalues.resize(n);
  r.eigenvectors = mat(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    r.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) r.eigenvectors(i, j) = v(i, order[j]);
  }
  return r;
}

/// Largest singular value, computed as sqrt(lambda_max(M^T M)).
inline double largest_singular_value(const mat& m) {
  require_finite(m, "largest_singular_value");
  mat mtm = matmul(transpose(m), m);
  // M^T M is symmetric up to rounding; make it exactly so
  for (std::size_t i = 0; i < mtm.rows; ++i)
    for (std::size_t j = i + 1; j < mtm.cols; ++j) {
      const double avg = 0.5 * (mtm(i, j) + mtm(j, i));
      mtm(i, j) = avg;
      mtm(j, i) = avg;
    }
  const sym_eigen_result e = symmetric_eigen(mtm);
  const double lmax = std::max(0.0, e.eigenvalues.back());
  return std::sqrt(lmax);
}

// --- SPD solve via Cholesky --------------------------------------------------

struct cholesky_factor {
  mat l;  // lower triangular, M = L L^T

  vec solve(const vec& b) const {
    const std::size_t n = l.rows;
    if (b.size() != n) throw shape_error("cholesky solve: size mismatch");
    vec y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      double s = b[i];
      for (std::size_t j = 0; j < i; ++j) s -= l(i, j) * y[j];
      y[i] = s / l(i, i);
    }
    vec x(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
      double s = y[ii];
      for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
      x[ii] = s / l(ii, ii);
    }
    return x;
  }
};

inline cholesky_factor cholesky(const mat& m, double symmetry_tol = 1e-12) {
  require_finite(m, "cholesky");
  require_symmetric(m, symmetry_tol);
  const std::size_t n = m.rows;
  cholesky_factor f;
  f.l = mat(n, n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = m(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= f.l(i, k) * f.l(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw not_spd_error("cholesky: non-positive pivot, matrix is not SPD");
        f.l(i, i) = std::sqrt(s);
      } else {
        f.l(i, j) = s / f.l(j, j);
      }
    }
  }
  return f;
}

inline vec spd_solve(const mat& m, const vec& b) {
  if (m.rows != b.size()) throw shape_error("spd_solve: size mismatch");
  return cholesky(m).solve(b);
}

// --- deterministic counter-based randomness ----------------------------------
//
// All randomness in the library derives from the splitmix64 finalizer applied
// to a chained (seed, stream, a, b) key. Stateless by construction: the same
// key always yields the same value, which is what the reproducibility
// contracts require.

namespace rng {

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

inline constexpr std::uint64_t golden = 0x9E3779B97F4A7C15ull;

enum stream : std::uint64_t {
  stream_noise = 1,
  stream_init = 2,
  stream_sphere = 3,
  stream_graph = 4,
  stream_test = 5,
};

inline std::uint64_t key(std::uint64_t seed, std::uint64_t strm, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = mix64(seed + golden);
  x = mix64(x ^ (strm * golden + 1));
  x = mix64(x ^ (a * golden + 2));
  x = mix64(x ^ (b * golden + 3));
  return x;
}

/// Uniform in [0, 1).
inline double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double uniform(std::uint64_t seed, std::uint64_t strm, std::uint64_t a, std::uint64_t b) {
  return to_unit(key(seed, strm, a, b));
}

/// Standard normal via Box-Muller on two counter draws.
inline double gaussian(std::uint64_t seed, std::uint64_t strm, std::uint64_t a, std::uint64_t b) {
  const double u1 = 1.0 - uniform(seed, strm, a, 2 * b);      // (0, 1]
  const double u2 = uniform(seed, strm, a, 2 * b + 1);        // [0, 1)
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

/// Derives an independent child seed; used when a sweep needs a fresh noise
/// stream per member run.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return mix64(mix64(base + golden) ^ (index * golden + 11));
}

}  // namespace rng

/// Deterministic sample set on the unit sphere: all +/- axis vectors first,
/// then seeded Gaussian directions. Returns max(count, 2*dim) points so the
/// axis vectors are always present; for a fixed seed, the set for a smaller
/// count is a prefix of the set for a larger one.
inline std::vector<vec> unit_sphere_grid(std::size_t dim, std::size_t count, std::uint64_t seed) {
  if (dim < 1) throw parameter_error("unit_sphere_grid: dim must be >= 1");
  if (count < 1) throw parameter_error("unit_sphere_grid: count must be >= 1");
  std::vector<vec> pts;
  pts.reserve(std::max(count, 2 * dim));
  for (std::size_t d = 0; d < dim; ++d) {
    vec plus(dim, 0.0), minus(dim, 0.0);
    plus[d] = 1.0;
    minus[d] = -1.0;
    pts.push_back(plus);
    pts.push_back(minus);
  }
  std::uint64_t draw = 0;
  while (pts.size() < std::max(count, 2 * dim)) {
    vec p(dim);
    for (std::size_t d = 0; d < dim; ++d) p[d] = rng::gaussian(seed, rng::stream_sphere, draw, d);
    ++draw;
    const double n = norm2(p);
    if (n < 1e-8) continue;
    for (double& x : p) x /= n;
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace distdiff
