#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "distdiff/scenario_io.hpp"
#include "distdiff/simulator.hpp"

using namespace distdiff;

namespace {

scenario load_bundled(const std::string& name) {
  const std::string path = std::string(DISTDIFF_SCENARIO_DIR) + "/" + name;
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return build_scenario(parse_scenario_json(ss.str()));
}

}  // namespace

TEST_CASE("second-order cycle scenario converges and is deterministic") {
  const scenario sc = load_bundled("scenario_5_1.json");
  const trajectory_log log = run(sc);
  REQUIRE(log.times.size() == 60001);
  CHECK(log.times.front() == 0.0);
  CHECK(log.times.back() == Catch::Approx(60.0));

  const run_metrics rm = metrics(log, 0.2, default_thresholds(sc.m, sc.dt));
  CHECK(rm.steady_state_err[0] <= 1e-3);
  CHECK(rm.steady_state_err[1] <= 1e-1);
  // accuracy degrades with the derivative order
  CHECK(rm.steady_state_err[0] < rm.steady_state_err[1]);

  const trajectory_log log2 = run(sc);
  REQUIRE(log2.states.size() == log.states.size());
  for (std::size_t k = 0; k < log.states.size(); ++k)
    REQUIRE(log2.states[k].x == log.states[k].x);
}

TEST_CASE("zero-error start on a polynomial leader stays exact") {
  network net = cycle_graph(5);
  net.set_leader(0);
  net.set_leader(2);

  // dyadic step and coefficients: the propagated state then matches the
  // evaluated reference bit for bit and sigma stays exactly zero
  scenario sc;
  sc.m = 1;
  sc.net = net;
  sc.sp = spectra(net, 0.0, l_tilde_mode::explicit_value(1.0));
  sc.signal = leader_signal::polynomial({0.5, -0.25}, 1);
  sc.gains = gains_from_explicit(1, {2.0, 1.1}, sc.sp.l_tilde);
  sc.dt = 0x1.0p-10;
  sc.t_final = 4.0;
  sc.noise = noise_source(0.0, 1);
  state_block x0(5, 1);
  for (std::size_t i = 0; i < 5; ++i)
    for (int mu = 0; mu <= 1; ++mu) x0.at(i, mu) = sc.signal.derivative(mu, 0.0);
  sc.init = init_spec::explicit_block(x0);
  sc.mode = run_mode::sampled_mode();

  const trajectory_log log = run(sc);
  for (std::size_t k = 0; k < log.times.size(); ++k)
    for (int mu = 0; mu <= 1; ++mu) REQUIRE(log.errors(k, mu) <= 1e-9);
}

TEST_CASE("blow-up aborts with a diagnostic") {
  network net = cycle_graph(3);
  net.set_leader(0);
  scenario sc;
  sc.m = 1;
  sc.net = net;
  sc.sp = spectra(net, 1.0, l_tilde_mode::explicit_value(1.0));
  sc.signal = leader_signal::sinusoid(1.0, 0.5, 1);
  // negative chain gain is rejected, so blow the state up with a huge dt
  sc.gains = gains_from_explicit(1, {1e9, 1.1}, 1.0);
  sc.dt = 1e3;
  sc.t_final = 1e6;
  sc.noise = noise_source(0.0, 1);
  sc.init = init_spec::range(-5.0, 5.0, 3);
  sc.mode = run_mode::sampled_mode();
  CHECK_THROWS_AS(run(sc), blow_up_error);
}

TEST_CASE("metrics on synthetic logs") {
  trajectory_log log;
  log.meta.m = 1;
  log.meta.dt = 0.1;
  const std::size_t n = 100;
  log.times.resize(n);
  log.errors = mat(n, 2, 0.0);
  log.refs = mat(n, 2, 0.0);
  for (std::size_t k = 0; k < n; ++k) log.times[k] = 0.1 * static_cast<double>(k);

  SECTION("constant zero error") {
    const run_metrics rm = metrics(log, 0.2, {1e-3, 1e-2});
    CHECK(rm.steady_state_err[0] == 0.0);
    REQUIRE(rm.convergence_time[0].has_value());
    CHECK(*rm.convergence_time[0] == 0.0);
  }

  SECTION("monotone decay crosses the threshold at a known time") {
    for (std::size_t k = 0; k < n; ++k) {
      log.errors(k, 0) = std::exp(-0.5 * log.times[k]);
      log.errors(k, 1) = 2.0 * std::exp(-0.5 * log.times[k]);
    }
    const double thr = 0.1;
    const run_metrics rm = metrics(log, 0.2, {thr, thr});
    // first k with exp(-t/2) <= 0.1 is t = 4.7 (exp(-2.35) = 0.0954)
    REQUIRE(rm.convergence_time[0].has_value());
    CHECK(*rm.convergence_time[0] == Catch::Approx(4.7));
    CHECK(rm.steady_state_err[0] == Catch::Approx(std::exp(-0.5 * log.times[n - 20])));
  }

  SECTION("threshold never reached") {
    for (std::size_t k = 0; k < n; ++k) log.errors(k, 0) = 1.0;
    const run_metrics rm = metrics(log, 0.2, {0.5, 0.5});
    CHECK_FALSE(rm.convergence_time[0].has_value());
  }

  SECTION("tail fraction bounds") {
    CHECK_THROWS_AS(metrics(log, 0.0, {1.0, 1.0}), parameter_error);
    CHECK_THROWS_AS(metrics(log, 1.0, {1.0, 1.0}), parameter_error);
  }
}

TEST_CASE("scaling_fit recovers synthetic power laws") {
  std::vector<std::pair<double, double>> quad;
  for (double s : {1e-3, 2e-3, 4e-3, 8e-3}) quad.push_back({s, 7.0 * s * s});
  const fit_result f = scaling_fit(quad);
  CHECK(f.exponent == Catch::Approx(2.0).margin(1e-9));
  CHECK(f.r_squared == Catch::Approx(1.0).margin(1e-12));

  std::vector<std::pair<double, double>> flat = {{1.0, 3.0}, {2.0, 3.0}, {4.0, 3.0}};
  const fit_result fc = scaling_fit(flat);
  CHECK(fc.exponent == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(scaling_fit({{1.0, 1.0}, {2.0, 2.0}}), parameter_error);
  CHECK_THROWS_AS(scaling_fit({{1.0, 1.0}, {2.0, 0.0}, {3.0, 1.0}}), parameter_error);
}

TEST_CASE("sweep rejects short or non-positive value lists") {
  const scenario sc = load_bundled("scenario_5_1.json");
  CHECK_THROWS_AS(sweep(sc, sweep_param::dt, {1e-3}), parameter_error);
  CHECK_THROWS_AS(sweep(sc, sweep_param::dt, {1e-3, 2e-3}), parameter_error);
  CHECK_THROWS_AS(sweep(sc, sweep_param::dt, {1e-3, 2e-3, -1e-3}), parameter_error);
}

TEST_CASE("dt sweep recovers the sampled accuracy exponents") {
  scenario sc = load_bundled("scenario_5_1.json");
  sc.t_final = 40.0;
  const sweep_result sr = sweep(sc, sweep_param::dt, {1e-3, 2e-3, 4e-3});
  CHECK(sr.predicted_exponents[0] == 2.0);
  CHECK(sr.predicted_exponents[1] == 1.0);
  CHECK(sr.fits[0].exponent == Catch::Approx(2.0).margin(0.6));
  CHECK(sr.fits[1].exponent == Catch::Approx(1.0).margin(0.6));
}

TEST_CASE("taylor_remainder_check") {
  vec grid;
  for (int i = 0; i <= 100; ++i) grid.push_back(0.2 * i);

  CHECK(taylor_remainder_check(leader_signal::polynomial({1.0, 0.5}, 1), 0x1.0p-10,
                               {0.0, 0.5, 1.0, 1.5, 2.0}) == 0.0);

  const double r1 = taylor_remainder_check(leader_signal::sinusoid(1.0, 0.5, 1), 1e-3, grid);
  CHECK(r1 <= 1.0);
  CHECK(r1 >= 0.5);
  // the normalized remainder approaches a constant as dt shrinks
  const double r2 = taylor_remainder_check(leader_signal::sinusoid(1.0, 0.5, 1), 5e-4, grid);
  CHECK(std::abs(r1 - r2) <= 0.05);
}

TEST_CASE("noise keeps the run bounded and degrades accuracy") {
  scenario sc = load_bundled("scenario_5_1.json");
  sc.t_final = 40.0;
  const run_metrics clean = metrics(run(sc), 0.2, default_thresholds(sc.m, sc.dt));
  sc.noise = noise_source(0.1, 777);
  const trajectory_log noisy_log = run(sc);  // no blow-up
  const run_metrics noisy = metrics(noisy_log, 0.2, default_thresholds(sc.m, sc.dt));
  for (int mu = 0; mu <= 1; ++mu) {
    CHECK(noisy.steady_state_err[mu] > clean.steady_state_err[mu]);
    CHECK(noisy.steady_state_err[mu] < 10.0);
  }
}

TEST_CASE("halving dt contracts the error by the predicted factor band") {
  scenario sc = load_bundled("scenario_5_1.json");
  sc.t_final = 40.0;
  const run_metrics coarse = metrics(run(sc), 0.2, default_thresholds(sc.m, sc.dt));
  scenario fine = sc;
  fine.dt = sc.dt / 2.0;
  const run_metrics refined = metrics(run(fine), 0.2, default_thresholds(fine.m, fine.dt));
  for (int mu = 0; mu <= 1; ++mu) {
    const double predicted = std::pow(2.0, static_cast<double>(sc.m - mu + 1));
    const double factor = coarse.steady_state_err[mu] / refined.steady_state_err[mu];
    CHECK(factor >= predicted / 2.0);
    CHECK(factor <= 2.0 * predicted);
  }
}

TEST_CASE("moving the leader-access set changes transients but not convergence") {
  scenario sc = load_bundled("scenario_5_1.json");
  sc.t_final = 40.0;
  for (std::size_t i = 0; i < sc.net.n_agents; ++i) sc.net.leader_access[i] = false;
  sc.net.set_leader(1);
  sc.net.set_leader(5);
  sc.net.set_leader(8);
  // the protocol never identifies agents, so any connected-access placement works
  const run_metrics rm = metrics(run(sc), 0.2, default_thresholds(sc.m, sc.dt));
  CHECK(rm.steady_state_err[0] <= 1e-3);
  CHECK(rm.steady_state_err[1] <= 1e-1);
}

TEST_CASE("relabeling agents permutes the trajectories exactly") {
  // degree-2 cycle: per-agent accumulation order is permutation-invariant,
  // so the permuted run must match bit for bit
  const std::size_t n = 10;
  const std::vector<std::size_t> perm = {3, 7, 1, 9, 0, 4, 8, 2, 6, 5};

  network base = cycle_graph(n);
  base.set_leader(0);
  base.set_leader(2);
  base.set_leader(4);

  network relabeled(n);
  for (const auto& e : base.edges) relabeled.add_edge(perm[e.first], perm[e.second]);
  for (std::size_t i = 0; i < n; ++i)
    if (base.leader_access[i]) relabeled.set_leader(perm[i]);

  const leader_signal sig = leader_signal::sinusoid(1.0, 0.5, 1);
  const gain_schedule g = gains_from_explicit(1, {2.0, 1.1}, 2.5);

  state_block x_base(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (int mu = 0; mu <= 1; ++mu)
      x_base.at(i, mu) = -5.0 + 10.0 * rng::uniform(606, rng::stream_test, i, mu);
  state_block x_perm(n, 1);
  for (std::size_t i = 0; i < n; ++i)
    for (int mu = 0; mu <= 1; ++mu) x_perm.at(perm[i], mu) = x_base.at(i, mu);

  const double dt = 1e-3;
  for (int k = 0; k < 5000; ++k) {
    const double u = sig.derivative(0, k * dt);
    x_base = sampled_step(x_base, vec(n, u), dt, base, g);
    x_perm = sampled_step(x_perm, vec(n, u), dt, relabeled, g);
    for (std::size_t i = 0; i < n; ++i)
      for (int mu = 0; mu <= 1; ++mu) REQUIRE(x_perm.at(perm[i], mu) == x_base.at(i, mu));
  }
}

TEST_CASE("sampled and continuous-emulation steady states agree to a small factor") {
  scenario sc = load_bundled("scenario_5_1.json");
  sc.t_final = 40.0;
  const run_metrics sampled = metrics(run(sc), 0.2, default_thresholds(sc.m, sc.dt));
  scenario cont = sc;
  cont.mode = run_mode::continuous(100);
  const run_metrics emulated = metrics(run(cont), 0.2, default_thresholds(cont.m, cont.dt));
  for (int mu = 0; mu <= 1; ++mu) {
    const double ratio = sampled.steady_state_err[mu] / emulated.steady_state_err[mu];
    CHECK(ratio >= 0.2);
    CHECK(ratio <= 5.0);
  }
}
