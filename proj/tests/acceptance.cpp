// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// criterion fails. Runs against the bundled scenario files.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "distdiff/analysis.hpp"
#include "distdiff/cli.hpp"
#include "distdiff/scenario_io.hpp"
#include "distdiff/selftest.hpp"
#include "distdiff/simulator.hpp"

using namespace distdiff;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

struct stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

void report(int criterion, const std::string& label, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, label.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string scenario_dir;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

scenario load_bundled(const std::string& name) {
  return build_scenario(parse_scenario_json(read_file(scenario_dir + "/" + name)));
}

// 1. second-order cycle scenario reaches consensus on the signal and its
//    derivative; regression bounds frozen from the first verified run
void criterion_1() {
  stopwatch sw;
  std::string detail;
  bool pass = false;
  try {
    const scenario sc = load_bundled("scenario_5_1.json");
    const trajectory_log log = run(sc);
    const run_metrics rm = metrics(log, 0.2, default_thresholds(sc.m, sc.dt));
    const double elapsed = sw.seconds();
    pass = rm.steady_state_err[0] <= 1e-3 && rm.steady_state_err[1] <= 1e-1 && elapsed < 5.0;
    std::ostringstream os;
    os << "err0 = " << rm.steady_state_err[0] << " <= 1e-3, err1 = " << rm.steady_state_err[1]
       << " <= 1e-1, " << elapsed << " s";
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(1, "second-order scenario converges", pass, detail);
}

// 2. dt sweep exponents match the sampled accuracy orders (m-mu+1)
void criterion_2() {
  stopwatch sw;
  std::string detail;
  bool pass = false;
  try {
    const scenario sc = load_bundled("scenario_5_1.json");
    const sweep_result sr = sweep(sc, sweep_param::dt, {1e-3, 2e-3, 4e-3});
    const double elapsed = sw.seconds();
    pass = std::abs(sr.fits[0].exponent - 2.0) <= 0.6 && sr.fits[0].r_squared >= 0.9 &&
           std::abs(sr.fits[1].exponent - 1.0) <= 0.6 && sr.fits[1].r_squared >= 0.9 &&
           elapsed < 15.0;
    std::ostringstream os;
    os << "exponents (" << sr.fits[0].exponent << ", " << sr.fits[1].exponent << "), r2 ("
       << sr.fits[0].r_squared << ", " << sr.fits[1].r_squared << "), " << elapsed << " s";
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(2, "dt-scaling exponents near (2, 1)", pass, detail);
}

// 3. noise sweep exponents match (m-mu+1)/(m+1), averaged over 5 seeds
void criterion_3() {
  stopwatch sw;
  std::string detail;
  bool pass = false;
  try {
    scenario sc = load_bundled("scenario_5_1.json");
    sc.dt = 1e-4;  // discretization error subdominant to the injected noise
    double mean0 = 0.0, mean1 = 0.0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
      sc.noise = noise_source(sc.noise.eps_bar, 9000 + 17 * s);
      const sweep_result sr = sweep(sc, sweep_param::eps_bar, {0.01, 0.04, 0.16});
      mean0 += sr.fits[0].exponent;
      mean1 += sr.fits[1].exponent;
    }
    mean0 /= seeds;
    mean1 /= seeds;
    const double elapsed = sw.seconds();
    pass = std::abs(mean0 - 1.0) <= 0.4 && std::abs(mean1 - 0.5) <= 0.4 && elapsed < 60.0;
    std::ostringstream os;
    os << "mean exponents (" << mean0 << ", " << mean1 << ") over " << seeds << " seeds, "
       << elapsed << " s";
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(3, "noise-scaling exponents near (1.0, 0.5)", pass, detail);
}

// 4. fourth-order scenario: all orders converge, errors grow with mu,
//    highest order stays bounded despite chattering
void criterion_4() {
  stopwatch sw;
  std::string detail;
  bool pass = false;
  try {
    const scenario sc = load_bundled("scenario_5_2.json");
    const trajectory_log log = run(sc);
    const run_metrics rm = metrics(log, 0.2, default_thresholds(sc.m, sc.dt));
    const double elapsed = sw.seconds();
    // regression bounds frozen from the first verified run of this scenario
    // (tail sups 3.41e-4, 2.70e-2, 5.42e-2, 2.07e-1, identical for 60 s and
    // 120 s horizons), with about 2x headroom
    const vec bounds = {7e-4, 6e-2, 1.2e-1, 4.5e-1};
    bool ok = elapsed < 10.0;
    for (int mu = 0; mu <= 3; ++mu) ok = ok && rm.steady_state_err[mu] <= bounds[mu];
    for (int mu = 0; mu < 3; ++mu)
      ok = ok && rm.steady_state_err[mu] < rm.steady_state_err[mu + 1];
    pass = ok;
    std::ostringstream os;
    os << "errors (" << rm.steady_state_err[0] << ", " << rm.steady_state_err[1] << ", "
       << rm.steady_state_err[2] << ", " << rm.steady_state_err[3] << "), " << elapsed << " s";
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(4, "fourth-order scenario converges with ordered errors", pass, detail);
}

// 5. gain verification: bundled gains pass, k1 < 1 fails, and the closed-form
//    xi-sup matches exhaustive corner enumeration
void criterion_5() {
  std::string detail;
  bool pass = false;
  try {
    const int ok_rc = cmd_verify_gains(scenario_dir + "/scenario_5_1.json", 3000, 1);

    nlohmann::json bad = nlohmann::json::parse(read_file(scenario_dir + "/scenario_5_1.json"));
    bad["gains"] = {{"explicit", {2.0, 0.9}}};
    const fs::path bad_path = fs::temp_directory_path() / "distdiff_acceptance_badk1.json";
    {
      std::ofstream out(bad_path);
      out << bad.dump();
    }
    const int bad_rc = cmd_verify_gains(bad_path.string(), 500, 1);

    // corner-enumeration oracle for the xi-sup closed form, N <= 4
    bool corners_ok = true;
    const gain_schedule g = gains_from_explicit(1, {2.0, 1.1}, 2.5);
    for (std::size_t n = 1; n <= 4 && corners_ok; ++n) {
      mat h_mat(n, n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        h_mat(i, i) = 2.0;
        if (i + 1 < n) {
          h_mat(i, i + 1) = -0.6;
          h_mat(i + 1, i) = -0.6;
        }
      }
      for (std::uint64_t trial = 0; trial < 200 && corners_ok; ++trial) {
        vec z0(n), z1(n);
        for (std::size_t i = 0; i < n; ++i) {
          z0[i] = -2.0 + 4.0 * rng::uniform(71, rng::stream_test, trial, i);
          z1[i] = -2.0 + 4.0 * rng::uniform(72, rng::stream_test, trial, i);
        }
        const double h = 4.0;
        const eta_gamma eg0 = eta0_gamma0(z0, z1, h_mat, g, h);
        const eta_gamma eg1 = eta1_gamma1(z1, h_mat, g.k[1]);

        const vec hz0 = matvec(h_mat, z0);
        const vec hinv_z1sq = spd_solve(h_mat, vec_signed_power(z1, 2.0));
        double best0 = -1e300, best1 = -1e300;
        for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
          double acc0 = 0.0, acc1 = 0.0;
          for (std::size_t i = 0; i < n; ++i) {
            const double xi = (mask >> i) & 1 ? 1.0 : -1.0;
            const double a =
                g.k_tilde[1] * (2.0 * z0[i] * std::abs(z1[i]) + h * signed_power(z1[i], 3.0));
            acc0 += -a * (signed_power(hz0[i], 0.0) + xi / g.k[1]);
            const double b = 2.0 * hinv_z1sq[i] * std::abs(z1[i]);
            acc1 += -b * (signed_power(z1[i], 0.0) + xi / g.k[1]);
          }
          best0 = std::max(best0, acc0);
          best1 = std::max(best1, acc1);
        }
        corners_ok = std::abs(eg0.gamma - best0) <= 1e-12 && std::abs(eg1.gamma - best1) <= 1e-12;
      }
    }

    pass = ok_rc == exit_ok && bad_rc == exit_verify_failure && corners_ok;
    std::ostringstream os;
    os << "verify rc = " << ok_rc << ", k1=0.9 rc = " << bad_rc
       << ", corner oracle match = " << (corners_ok ? "yes" : "no");
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(5, "gain verification behaves as specified", pass, detail);
}

// 6. built-in property suite
void criterion_6() {
  stopwatch sw;
  std::string detail;
  bool pass = false;
  try {
    const std::vector<check_result> results = run_property_suite();
    int passed = 0;
    std::ostringstream os;
    for (const check_result& r : results) {
      if (r.pass) {
        ++passed;
      } else {
        os << r.name << " failed; ";
      }
    }
    pass = passed == static_cast<int>(results.size());
    os << passed << "/" << results.size() << " checks, " << sw.seconds() << " s";
    detail = os.str();
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(6, "property suite all green", pass, detail);
}

// 7. determinism: identical runs produce byte-identical trajectory files
void criterion_7() {
  std::string detail;
  bool pass = false;
  try {
    const fs::path out_a = fs::temp_directory_path() / "distdiff_acceptance_det_a";
    const fs::path out_b = fs::temp_directory_path() / "distdiff_acceptance_det_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    const std::string cfg = scenario_dir + "/scenario_5_1.json";
    const int rc_a = cmd_run(cfg, out_a.string());
    const int rc_b = cmd_run(cfg, out_b.string());
    const std::string a = read_file((out_a / "trajectory.csv").string());
    const std::string b = read_file((out_b / "trajectory.csv").string());
    pass = rc_a == exit_ok && rc_b == exit_ok && a == b && !a.empty();
    std::ostringstream os;
    os << "bytes = " << a.size() << ", identical = " << (a == b ? "yes" : "no");
    detail = os.str();
    fs::remove_all(out_a);
    fs::remove_all(out_b);
  } catch (const std::exception& e) {
    detail = e.what();
  }
  report(7, "byte-identical trajectories for identical seeds", pass, detail);
}

}  // namespace

int main(int argc, char** argv) {
  scenario_dir = argc > 1 ? argv[1] : DISTDIFF_SCENARIO_DIR;
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  if (g_failures == 0) {
    std::printf("all acceptance criteria passed\n");
    return 0;
  }
  std::printf("%d acceptance criteria FAILED\n", g_failures);
  return 1;
}
