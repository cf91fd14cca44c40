#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "distdiff/analysis.hpp"
#include "distdiff/scenario_io.hpp"
#include "distdiff/selftest.hpp"
#include "distdiff/simulator.hpp"
#include "distdiff/version.hpp"

namespace distdiff {

// exit codes shared by all subcommands
inline constexpr int exit_ok = 0;
inline constexpr int exit_selftest_failure = 1;
inline constexpr int exit_config_error = 2;
inline constexpr int exit_validation_error = 3;
inline constexpr int exit_blow_up = 4;
inline constexpr int exit_verify_failure = 5;

namespace cli_detail {

/// Write-to-temp then rename, so consumers never observe partial files.
inline void atomic_write(const std::filesystem::path& target, const std::string& content) {
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, target);
}

inline std::string format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw scenario_parse_error("cannot read config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string trajectory_csv(const trajectory_log& log) {
  std::string out;
  out.reserve(log.times.size() * log.meta.net.n_agents * (log.meta.m + 1) * 72 + 64);
  out += "t,agent,mu,x,ref,err\n";
  const int m = log.meta.m;
  for (std::size_t k = 0; k < log.times.size(); ++k) {
    const std::string t_str = format17(log.times[k]);
    for (std::size_t i = 0; i < log.meta.net.n_agents; ++i) {
      for (int mu = 0; mu <= m; ++mu) {
        const double x = log.states[k].at(i, mu);
        const double ref = log.refs(k, mu);
        out += t_str;
        out += ',';
        out += std::to_string(i);
        out += ',';
        out += std::to_string(mu);
        out += ',';
        out += format17(x);
        out += ',';
        out += format17(ref);
        out += ',';
        out += format17(x - ref);
        out += '\n';
      }
    }
  }
  return out;
}

inline nlohmann::json metrics_json(const run_metrics& rm, const scenario& sc) {
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["scenario"] = scenario_echo(sc);
  nlohmann::json m;
  m["tail_fraction"] = rm.tail_fraction;
  m["steady_state_err"] = rm.steady_state_err;
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& c : rm.convergence_time) {
    if (c)
      conv.push_back(*c);
    else
      conv.push_back(nullptr);
  }
  m["convergence_time"] = conv;
  j["metrics"] = m;
  return j;
}

inline nlohmann::json gains_json(const gain_schedule& g) {
  nlohmann::json j;
  j["m"] = g.m;
  j["k"] = g.k;
  j["k_tilde"] = g.k_tilde;
  j["l_tilde"] = g.l_tilde;
  return j;
}

struct loaded_config {
  scenario_file file;
  scenario sc;
};

/// Parse + build, mapping failures onto the exit-code contract. Returns
/// nonzero exit code on failure after printing a diagnostic to stderr.
inline int load_config(const std::string& config_path, loaded_config& out) {
  std::string text;
  try {
    text = read_file(config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  }
  try {
    out.file = parse_scenario_json(text);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  }
  try {
    out.sc = build_scenario(out.file);
  } catch (const scenario_validation_error& e) {
    std::cerr << "validation error: " << violation_name(e.which) << "\n";
    return exit_validation_error;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  }
  return exit_ok;
}

}  // namespace cli_detail

/// run: execute one scenario, write trajectory.csv, metrics.json, gains.json.
inline int cmd_run(const std::string& config_path, const std::string& out_dir,
                   bool json_stdout = false) {
  cli_detail::loaded_config cfg;
  if (const int rc = cli_detail::load_config(config_path, cfg)) return rc;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  trajectory_log log;
  try {
    log = run(cfg.sc);
  } catch (const blow_up_error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return exit_blow_up;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  }

  const run_metrics rm = metrics(log, 0.2, default_thresholds(cfg.sc.m, cfg.sc.dt));
  const nlohmann::json mj = cli_detail::metrics_json(rm, cfg.sc);

  try {
    cli_detail::atomic_write(std::filesystem::path(out_dir) / "trajectory.csv",
                             cli_detail::trajectory_csv(log));
    cli_detail::atomic_write(std::filesystem::path(out_dir) / "metrics.json", mj.dump(2) + "\n");
    cli_detail::atomic_write(std::filesystem::path(out_dir) / "gains.json",
                             cli_detail::gains_json(cfg.sc.gains).dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  }

  if (json_stdout) std::cout << mj.dump(2) << "\n";
  return exit_ok;
}

/// sweep: re-run a scenario over dt or eps_bar values, write sweep.csv and
/// scaling.json with the fitted and predicted exponents.
inline int cmd_sweep(const std::string& config_path, const std::string& param, const vec& values,
                     const std::string& out_dir, bool json_stdout = false) {
  sweep_param sp;
  if (param == "dt") {
    sp = sweep_param::dt;
  } else if (param == "eps") {
    sp = sweep_param::eps_bar;
  } else {
    std::cerr << "config error: --param must be dt or eps\n";
    return exit_config_error;
  }
  if (values.size() < 3) {
    std::cerr << "config error: sweep needs at least 3 values\n";
    return exit_config_error;
  }

  cli_detail::loaded_config cfg;
  if (const int rc = cli_detail::load_config(config_path, cfg)) return rc;

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  sweep_result result;
  try {
    result = sweep(cfg.sc, sp, values);
  } catch (const blow_up_error& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return exit_blow_up;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config_error;
  }

  std::string csv = "param,value,mu,steady_state_err\n";
  for (std::size_t idx = 0; idx < values.size(); ++idx)
    for (int mu = 0; mu <= cfg.sc.m; ++mu) {
      csv += param;
      csv += ',';
      csv += cli_detail::format17(values[idx]);
      csv += ',';
      csv += std::to_string(mu);
      csv += ',';
      csv += cli_detail::format17(result.per_value[idx].steady_state_err[mu]);
      csv += '\n';
    }

  nlohmann::json sj;
  sj["tool_version"] = tool_version;
  sj["param"] = param;
  sj["values"] = values;
  nlohmann::json per_mu = nlohmann::json::array();
  for (int mu = 0; mu <= cfg.sc.m; ++mu) {
    per_mu.push_back({{"mu", mu},
                      {"exponent", result.fits[mu].exponent},
                      {"r_squared", result.fits[mu].r_squared},
                      {"predicted_exponent", result.predicted_exponents[mu]}});
  }
  sj["fits"] = per_mu;

  try {
    cli_detail::atomic_write(std::filesystem::path(out_dir) / "sweep.csv", csv);
    cli_detail::atomic_write(std::filesystem::path(out_dir) / "scaling.json", sj.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_config_error;
  }

  if (json_stdout) std::cout << sj.dump(2) << "\n";
  return exit_ok;
}

/// verify-gains: numerical check of the gain-selection conditions. For m = 1
/// this runs the full Lyapunov-based battery; for m > 1 only the recursion
/// form of the schedule can be checked.
inline int cmd_verify_gains(const std::string& config_path, int samples, std::uint64_t seed,
                            const std::string& out_dir = "", bool json_stdout = false) {
  cli_detail::loaded_config cfg;
  if (const int rc = cli_detail::load_config(config_path, cfg)) return rc;

  nlohmann::json report;
  report["tool_version"] = tool_version;
  report["m"] = cfg.sc.m;
  bool all_pass = true;
  auto add_condition = [&](const std::string& name, bool pass, const std::string& detail) {
    report["conditions"].push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    std::cerr << (pass ? "pass" : "FAIL") << "  " << name << (detail.empty() ? "" : "  (" + detail + ")")
              << "\n";
    all_pass = all_pass && pass;
  };

  const gain_schedule& g = cfg.sc.gains;
  report["gains"] = cli_detail::gains_json(g);

  if (cfg.sc.m == 1) {
    const mat& h_mat = cfg.sc.sp.h;
    add_condition("k1>1", g.k[1] > 1.0, "k1 = " + std::to_string(g.k[1]));
    if (!(g.k[1] > 1.0)) {
      // the remaining conditions are not defined without k1 > 1
      report["h"] = nullptr;
      const std::string text = report.dump(2) + "\n";
      if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        cli_detail::atomic_write(std::filesystem::path(out_dir) / "verify.json", text);
      }
      if (json_stdout) std::cout << text;
      return exit_verify_failure;
    }

    const double h_star = estimate_h_star(h_mat, g.k[1], samples, seed);
    const double h = recommended_h(h_mat, g.k[1], samples, seed);
    const pd_result pd = m_matrix_pd(h_mat, h);
    const double h_margin = worst_h_margin(h_mat, g.k[1], h, samples, seed);
    report["h"] = h;
    report["h_star_estimate"] = h_star;
    report["m_of_h_margin"] = pd.margin;
    std::cerr << "h = " << h << " (chosen), h* estimate = " << h_star
              << ", M(h) margin = " << pd.margin << "\n";
    add_condition("M(h) positive definite", pd.positive_definite,
                  "margin = " + std::to_string(pd.margin));
    add_condition("-h*eta1+gamma1 < 0 on sampled sphere", h_margin < 0.0,
                  "worst = " + std::to_string(h_margin));

    k0_estimate_result k0;
    try {
      k0 = estimate_k0_star(h_mat, g, h, samples, seed);
    } catch (const std::exception& e) {
      add_condition("k0 sup estimate", false, e.what());
      const std::string text = report.dump(2) + "\n";
      if (json_stdout) std::cout << text;
      return exit_verify_failure;
    }
    report["k0_star_estimate"] = k0.value;
    add_condition("gamma0 < 0 where eta0 = 0", k0.hypothesis_ok, "");
    if (!k0.hypothesis_ok && k0.witness) report["witness"] = *k0.witness;
    // The sampled sup is an estimate of the gain level at which the Lyapunov
    // argument certifies convergence. It is conservative (for any admissible
    // h the axis points alone force it to at least h/k0), so a configured k0
    // below it is reported, not failed: the estimate bounds the certificate,
    // not the convergence boundary.
    report["k0_configured"] = g.k[0];
    report["k0_meets_certificate"] = g.k[0] > k0.value;
    std::cerr << "note: sampled certificate level k0* = " << k0.value << ", configured k0 = "
              << g.k[0] << (g.k[0] > k0.value ? " (certified)" : " (below certificate level)")
              << "\n";
  } else {
    // recursion-form check only
    report["mode"] = "recursion-form check only";
    double max_residual = 0.0;
    for (int mu = 1; mu <= g.m; ++mu) {
      const double expected = (g.m == 1)
                                  ? g.k_tilde[mu] * g.k[0]
                                  : g.k_tilde[mu] * std::pow(g.k[mu - 1], recursion_exponent(g.m, mu));
      max_residual = std::max(max_residual, std::abs(g.k[mu] - expected));
    }
    bool positive = true;
    for (double kv : g.k) positive = positive && kv > 0.0;
    add_condition("gains positive", positive, "");
    add_condition("k/k_tilde recursion consistency", max_residual <= 1e-12,
                  "max residual = " + std::to_string(max_residual));
    const bool built_by_recursion = cfg.file.gains_are_tilde;
    report["conforming_to_recursion"] = built_by_recursion;
    std::cerr << (built_by_recursion
                      ? "note: schedule built by the recursion from tilde gains\n"
                      : "note: explicit gain override; schedule not built by the recursion\n");
  }

  const std::string text = report.dump(2) + "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    try {
      cli_detail::atomic_write(std::filesystem::path(out_dir) / "verify.json", text);
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return exit_config_error;
    }
  }
  if (json_stdout) std::cout << text;
  return all_pass ? exit_ok : exit_verify_failure;
}

/// selftest: run the built-in property suite and print pass counts.
inline int cmd_selftest(bool json_stdout = false, const selftest_options& opt = {}) {
  const std::vector<check_result> results = run_property_suite(opt);
  int passed = 0;
  nlohmann::json j;
  j["tool_version"] = tool_version;
  j["checks"] = nlohmann::json::array();
  for (const check_result& r : results) {
    std::cerr << (r.pass ? "pass" : "FAIL") << "  " << r.name << "  (" << r.detail << ")\n";
    j["checks"].push_back({{"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    if (r.pass) ++passed;
  }
  std::cerr << passed << "/" << results.size() << " checks passed\n";
  j["passed"] = passed;
  j["total"] = results.size();
  if (json_stdout) std::cout << j.dump(2) << "\n";
  return passed == static_cast<int>(results.size()) ? exit_ok : exit_selftest_failure;
}

}  // namespace distdiff
