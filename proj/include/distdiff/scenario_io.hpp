#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "distdiff/graph.hpp"
#include "distdiff/protocol.hpp"
#include "distdiff/simulator.hpp"

namespace distdiff {

struct scenario_parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct scenario_validation_error : std::runtime_error {
  violation which;
  explicit scenario_validation_error(violation v)
      : std::runtime_error(std::string("network validation failed: ") + violation_name(v)),
        which(v) {}
};

namespace io_detail {

using json = nlohmann::json;

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& allowed,
                         const std::set<std::string>& required) {
  if (!obj.is_object()) throw scenario_parse_error(where + ": expected an object");
  for (const auto& kv : obj.items())
    if (!allowed.count(kv.key()))
      throw scenario_parse_error(where + ": unknown key \"" + kv.key() + "\"");
  for (const std::string& k : required)
    if (!obj.contains(k)) throw scenario_parse_error(where + ": missing key \"" + k + "\"");
}

inline double get_finite(const json& obj, const std::string& where, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw scenario_parse_error(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw scenario_parse_error(where + "." + key + ": non-finite value");
  return d;
}

inline std::int64_t get_int(const json& obj, const std::string& where, const std::string& key) {
  const json& v = obj.at(key);
  if (!v.is_number_integer())
    throw scenario_parse_error(where + "." + key + ": expected an integer");
  return v.get<std::int64_t>();
}

inline vec get_number_list(const json& v, const std::string& where) {
  if (!v.is_array()) throw scenario_parse_error(where + ": expected an array of numbers");
  vec out;
  for (const json& x : v) {
    if (!x.is_number()) throw scenario_parse_error(where + ": expected numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) throw scenario_parse_error(where + ": non-finite value");
    out.push_back(d);
  }
  return out;
}

}  // namespace io_detail

/// Parsed scenario configuration. Agent labels in the file are 1-based; the
/// conversion to 0-based indices happens exactly once, here.
struct scenario_file {
  int m = 1;
  // topology
  bool topology_is_cycle = false;
  std::size_t cycle_n = 0;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // 0-based after parsing
  std::vector<std::size_t> leaders;                        // 0-based after parsing
  // signal
  bool signal_is_sinusoid = true;
  double amplitude = 1.0;
  double omega = 0.5;
  vec poly_coeffs;
  std::optional<double> deriv_bound_override;
  // l_tilde
  l_tilde_mode lt_mode;
  // gains
  bool gains_are_tilde = false;
  vec gain_values;
  // timing
  double dt = 1e-3;
  double t_final = 60.0;
  // noise
  double eps_bar = 0.0;
  std::uint64_t noise_seed = 0;
  // init
  bool init_is_range = true;
  double init_lo = -5.0, init_hi = 5.0;
  std::uint64_t init_seed = 0;
  std::vector<vec> init_matrix;  // rows of length m+1
  // mode
  bool mode_sampled = true;
  int substeps = 100;

  nlohmann::json raw;  // echo of the parsed document
};

inline scenario_file parse_scenario_json(const std::string& text) {
  using io_detail::get_finite;
  using io_detail::get_int;
  using io_detail::get_number_list;
  using io_detail::require_keys;
  using nlohmann::json;

  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw scenario_parse_error(std::string("invalid JSON: ") + e.what());
  }

  require_keys(doc, "scenario",
               {"m", "topology", "leaders", "signal", "deriv_bound", "l_tilde", "gains", "dt",
                "t_final", "noise", "init", "mode"},
               {"m", "topology", "leaders", "signal", "l_tilde", "gains", "dt", "t_final",
                "noise", "init", "mode"});

  scenario_file sf;
  sf.raw = doc;
  sf.m = static_cast<int>(get_int(doc, "scenario", "m"));
  if (sf.m < 1) throw scenario_parse_error("scenario.m: must be >= 1");

  // topology
  {
    const json& topo = doc.at("topology");
    if (topo.contains("preset")) {
      require_keys(topo, "topology", {"preset", "n"}, {"preset", "n"});
      if (topo.at("preset") != "cycle")
        throw scenario_parse_error("topology.preset: only \"cycle\" is available");
      const std::int64_t n = get_int(topo, "topology", "n");
      if (n < 3) throw scenario_parse_error("topology.n: cycle needs n >= 3");
      sf.topology_is_cycle = true;
      sf.cycle_n = static_cast<std::size_t>(n);
    } else {
      require_keys(topo, "topology", {"edges"}, {"edges"});
      const json& edges = topo.at("edges");
      if (!edges.is_array() || edges.empty())
        throw scenario_parse_error("topology.edges: expected a non-empty array of pairs");
      std::size_t max_label = 0;
      std::vector<std::pair<std::size_t, std::size_t>> raw_edges;
      for (const json& e : edges) {
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() ||
            !e[1].is_number_integer())
          throw scenario_parse_error("topology.edges: each edge is a pair of 1-based labels");
        const std::int64_t a = e[0].get<std::int64_t>();
        const std::int64_t b = e[1].get<std::int64_t>();
        if (a < 1 || b < 1) throw scenario_parse_error("topology.edges: labels are 1-based");
        raw_edges.push_back({static_cast<std::size_t>(a - 1), static_cast<std::size_t>(b - 1)});
        max_label = std::max({max_label, static_cast<std::size_t>(a), static_cast<std::size_t>(b)});
      }
      sf.edges = std::move(raw_edges);
      sf.cycle_n = max_label;  // agent count inferred from the largest label
    }
  }

  // leaders
  {
    const json& leaders = doc.at("leaders");
    if (!leaders.is_array()) throw scenario_parse_error("leaders: expected an array");
    for (const json& l : leaders) {
      if (!l.is_number_integer()) throw scenario_parse_error("leaders: labels are integers");
      const std::int64_t v = l.get<std::int64_t>();
      if (v < 1 || static_cast<std::size_t>(v) > sf.cycle_n)
        throw scenario_parse_error("leaders: label out of range");
      sf.leaders.push_back(static_cast<std::size_t>(v - 1));
    }
  }

  // signal
  {
    const json& sig = doc.at("signal");
    if (!sig.contains("type")) throw scenario_parse_error("signal: missing key \"type\"");
    if (sig.at("type") == "sinusoid") {
      require_keys(sig, "signal", {"type", "amplitude", "omega"}, {"type", "amplitude", "omega"});
      sf.signal_is_sinusoid = true;
      sf.amplitude = get_finite(sig, "signal", "amplitude");
      sf.omega = get_finite(sig, "signal", "omega");
    } else if (sig.at("type") == "polynomial") {
      require_keys(sig, "signal", {"type", "coeffs"}, {"type", "coeffs"});
      sf.signal_is_sinusoid = false;
      sf.poly_coeffs = get_number_list(sig.at("coeffs"), "signal.coeffs");
    } else {
      throw scenario_parse_error("signal.type: expected \"sinusoid\" or \"polynomial\"");
    }
  }

  if (doc.contains("deriv_bound")) sf.deriv_bound_override = get_finite(doc, "scenario", "deriv_bound");

  // l_tilde
  {
    const json& lt = doc.at("l_tilde");
    if (lt.contains("mode")) {
      require_keys(lt, "l_tilde", {"mode"}, {"mode"});
      if (lt.at("mode") == "singular")
        sf.lt_mode = l_tilde_mode::singular();
      else if (lt.at("mode") == "spectral_radius")
        sf.lt_mode = l_tilde_mode::spectral_radius();
      else
        throw scenario_parse_error("l_tilde.mode: expected \"singular\" or \"spectral_radius\"");
    } else {
      require_keys(lt, "l_tilde", {"explicit"}, {"explicit"});
      const double v = get_finite(lt, "l_tilde", "explicit");
      if (!(v > 0.0)) throw scenario_parse_error("l_tilde.explicit: must be > 0");
      sf.lt_mode = l_tilde_mode::explicit_value(v);
    }
  }

  // gains
  {
    const json& g = doc.at("gains");
    if (g.contains("tilde")) {
      require_keys(g, "gains", {"tilde"}, {"tilde"});
      sf.gains_are_tilde = true;
      sf.gain_values = get_number_list(g.at("tilde"), "gains.tilde");
    } else {
      require_keys(g, "gains", {"explicit"}, {"explicit"});
      sf.gains_are_tilde = false;
      sf.gain_values = get_number_list(g.at("explicit"), "gains.explicit");
    }
    if (sf.gain_values.size() != static_cast<std::size_t>(sf.m) + 1)
      throw scenario_parse_error("gains: need exactly m+1 values");
  }

  sf.dt = get_finite(doc, "scenario", "dt");
  sf.t_final = get_finite(doc, "scenario", "t_final");
  if (!(sf.dt > 0.0)) throw scenario_parse_error("dt: must be > 0");
  if (!(sf.t_final > sf.dt)) throw scenario_parse_error("t_final: must exceed dt");

  // noise
  {
    const json& noise = doc.at("noise");
    require_keys(noise, "noise", {"eps_bar", "seed"}, {"eps_bar", "seed"});
    sf.eps_bar = get_finite(noise, "noise", "eps_bar");
    if (sf.eps_bar < 0.0) throw scenario_parse_error("noise.eps_bar: must be >= 0");
    sf.noise_seed = static_cast<std::uint64_t>(get_int(noise, "noise", "seed"));
  }

  // init
  {
    const json& init = doc.at("init");
    if (init.contains("range")) {
      require_keys(init, "init", {"range", "seed"}, {"range", "seed"});
      const vec r = get_number_list(init.at("range"), "init.range");
      if (r.size() != 2 || !(r[1] >= r[0]))
        throw scenario_parse_error("init.range: expected [lo, hi] with hi >= lo");
      sf.init_is_range = true;
      sf.init_lo = r[0];
      sf.init_hi = r[1];
      sf.init_seed = static_cast<std::uint64_t>(get_int(init, "init", "seed"));
    } else {
      require_keys(init, "init", {"matrix"}, {"matrix"});
      const json& rows = init.at("matrix");
      if (!rows.is_array() || rows.empty())
        throw scenario_parse_error("init.matrix: expected an array of rows");
      sf.init_is_range = false;
      for (const json& row : rows) {
        const vec r = get_number_list(row, "init.matrix");
        if (r.size() != static_cast<std::size_t>(sf.m) + 1)
          throw scenario_parse_error("init.matrix: each row needs m+1 entries");
        sf.init_matrix.push_back(r);
      }
    }
  }

  // mode
  {
    const json& mode = doc.at("mode");
    if (!mode.contains("type")) throw scenario_parse_error("mode: missing key \"type\"");
    if (mode.at("type") == "sampled") {
      require_keys(mode, "mode", {"type"}, {"type"});
      sf.mode_sampled = true;
    } else if (mode.at("type") == "continuous") {
      require_keys(mode, "mode", {"type", "substeps"}, {"type", "substeps"});
      const std::int64_t s = get_int(mode, "mode", "substeps");
      if (s < 1) throw scenario_parse_error("mode.substeps: must be >= 1");
      sf.mode_sampled = false;
      sf.substeps = static_cast<int>(s);
    } else {
      throw scenario_parse_error("mode.type: expected \"sampled\" or \"continuous\"");
    }
  }

  return sf;
}

/// Builds the runnable scenario: network, spectra, gains, signal. Throws
/// scenario_validation_error when the network violates the connectivity
/// assumption, scenario_parse_error for everything structural.
inline scenario build_scenario(const scenario_file& sf) {
  scenario sc;
  sc.m = sf.m;

  if (sf.topology_is_cycle) {
    sc.net = cycle_graph(sf.cycle_n);
  } else {
    sc.net = network(sf.cycle_n);
    for (const auto& e : sf.edges) sc.net.add_edge(e.first, e.second);
  }
  for (std::size_t l : sf.leaders) sc.net.set_leader(l);

  const violation v = validate(sc.net);
  if (v != violation::none) throw scenario_validation_error(v);

  if (sf.signal_is_sinusoid)
    sc.signal = leader_signal::sinusoid(sf.amplitude, sf.omega, sf.m);
  else
    sc.signal = leader_signal::polynomial(sf.poly_coeffs, sf.m, sf.t_final);

  const double deriv_bound =
      sf.deriv_bound_override ? *sf.deriv_bound_override : sc.signal.deriv_bound();
  sc.sp = spectra(sc.net, deriv_bound, sf.lt_mode);

  if (sf.gains_are_tilde)
    sc.gains = design_gains(sf.m, sf.gain_values, sc.sp.l_tilde);
  else
    sc.gains = gains_from_explicit(sf.m, sf.gain_values, sc.sp.l_tilde);

  sc.dt = sf.dt;
  sc.t_final = sf.t_final;
  sc.noise = noise_source(sf.eps_bar, sf.noise_seed);

  if (sf.init_is_range) {
    sc.init = init_spec::range(sf.init_lo, sf.init_hi, sf.init_seed);
  } else {
    if (sf.init_matrix.size() != sc.net.n_agents)
      throw scenario_parse_error("init.matrix: need one row per agent");
    state_block b(sc.net.n_agents, sf.m);
    for (std::size_t i = 0; i < sf.init_matrix.size(); ++i)
      for (int mu = 0; mu <= sf.m; ++mu) b.at(i, mu) = sf.init_matrix[i][mu];
    sc.init = init_spec::explicit_block(std::move(b));
  }

  sc.mode = sf.mode_sampled ? run_mode::sampled_mode() : run_mode::continuous(sf.substeps);
  return sc;
}

/// Canonical JSON echo of a resolved scenario, written into run artifacts.
inline nlohmann::json scenario_echo(const scenario& sc) {
  nlohmann::json j;
  j["m"] = sc.m;
  j["n_agents"] = sc.net.n_agents;
  {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : sc.net.edges) edges.push_back({e.first + 1, e.second + 1});
    j["edges"] = edges;
    nlohmann::json leaders = nlohmann::json::array();
    for (std::size_t i = 0; i < sc.net.n_agents; ++i)
      if (sc.net.leader_access[i]) leaders.push_back(i + 1);
    j["leaders"] = leaders;
  }
  if (sc.signal.kind() == signal_kind::sinusoid) {
    j["signal"] = {{"type", "sinusoid"},
                   {"amplitude", sc.signal.amplitude()},
                   {"omega", sc.signal.omega()}};
  } else if (sc.signal.kind() == signal_kind::polynomial) {
    j["signal"] = {{"type", "polynomial"}, {"coeffs", sc.signal.coefficients()}};
  } else {
    j["signal"] = {{"type", "table"}};
  }
  j["deriv_bound"] = sc.signal.deriv_bound();
  j["l_tilde"] = sc.sp.l_tilde;
  j["gains"] = {{"k", sc.gains.k}, {"k_tilde", sc.gains.k_tilde}};
  j["dt"] = sc.dt;
  j["t_final"] = sc.t_final;
  j["noise"] = {{"eps_bar", sc.noise.eps_bar}, {"seed", sc.noise.seed}};
  if (sc.init.use_range)
    j["init"] = {{"range", {sc.init.lo, sc.init.hi}}, {"seed", sc.init.seed}};
  else
    j["init"] = {{"matrix", "explicit"}};
  j["mode"] = sc.mode.sampled
                  ? nlohmann::json{{"type", "sampled"}}
                  : nlohmann::json{{"type", "continuous"}, {"substeps", sc.mode.substeps}};
  return j;
}

}  // namespace distdiff
