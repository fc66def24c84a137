#pragma once

// Run configuration (JSON) and persistence of trajectories, diagnostics,
// events and certificates.
//
// Every number written to CSV uses 17 significant digits and '\n' line
// endings; JSON documents keep a fixed key order. Output for identical
// inputs is byte-identical.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tcs/certificates.hpp"
#include "tcs/diagnostics.hpp"
#include "tcs/integrator.hpp"
#include "tcs/model.hpp"
#include "tcs/scenarios.hpp"

namespace tcs {

using ojson = nlohmann::ordered_json;

enum class OutputKind { trajectory_csv, diagnostics_csv, events_json, certificate_json, svg_plots };

inline const char* to_string(OutputKind k) {
  switch (k) {
    case OutputKind::trajectory_csv: return "trajectory_csv";
    case OutputKind::diagnostics_csv: return "diagnostics_csv";
    case OutputKind::events_json: return "events_json";
    case OutputKind::certificate_json: return "certificate_json";
    case OutputKind::svg_plots: return "svg_plots";
  }
  return "?";
}

struct RunConfig {
  ScenarioSpec scenario;
  SystemParams params;
  IntegratorConfig integrator;
  double output_dt = 0.01;
  std::set<OutputKind> outputs{OutputKind::trajectory_csv, OutputKind::diagnostics_csv, OutputKind::events_json,
                               OutputKind::certificate_json};

  bool operator==(const RunConfig&) const = default;
};

/// Schema violation; `pointer` is the JSON pointer of the offending field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(std::move(pointer)), message_(message) {}
  const std::string& pointer() const { return pointer_; }
  const std::string& message() const { return message_; }

 private:
  std::string pointer_, message_;
};

// ---------------------------------------------------------------------------
// number formatting

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// JSON value for a possibly non-finite real: finite numbers stay numbers,
/// infinities become the strings "inf" / "-inf".
inline ojson json_real(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

// ---------------------------------------------------------------------------
// config parsing

namespace config_detail {

using json = nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& ptr, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(ptr.empty() ? "/" : ptr, "must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(ptr + "/" + it.key(), "unknown key");
  }
}

inline double get_real(const json& obj, const std::string& ptr, const char* key, std::optional<double> def) {
  if (!obj.contains(key)) {
    if (!def) throw ConfigError(ptr + "/" + key, "required field is missing");
    return *def;
  }
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(ptr + "/" + key, "must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError(ptr + "/" + key, "must be finite");
  return d;
}

inline std::int64_t get_int(const json& obj, const std::string& ptr, const char* key, std::optional<std::int64_t> def) {
  if (!obj.contains(key)) {
    if (!def) throw ConfigError(ptr + "/" + key, "required field is missing");
    return *def;
  }
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigError(ptr + "/" + key, "must be an integer");
  return v.get<std::int64_t>();
}

inline std::uint64_t get_seed(const json& obj, const std::string& ptr, std::uint64_t def) {
  if (!obj.contains("seed")) return def;
  const auto& v = obj.at("seed");
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    throw ConfigError(ptr + "/seed", "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline void require(bool cond, const std::string& ptr, const char* msg) {
  if (!cond) throw ConfigError(ptr, msg);
}

inline Vec get_vector(const json& v, const std::string& ptr) {
  require(v.is_array(), ptr, "must be an array of numbers");
  Vec out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    require(v[k].is_number(), ptr + "/" + std::to_string(k), "must be a number");
    out.push_back(v[k].get<double>());
  }
  return out;
}

inline ScenarioKind parse_kind(const json& v, const std::string& ptr) {
  require(v.is_string(), ptr, "must be a string");
  const auto s = v.get<std::string>();
  for (auto k : {ScenarioKind::random_cap, ScenarioKind::example21, ScenarioKind::prop41, ScenarioKind::custom})
    if (s == to_string(k)) return k;
  throw ConfigError(ptr, "unknown scenario kind '" + s + "'");
}

inline KernelFamily parse_family(const json& v, const std::string& ptr) {
  require(v.is_string(), ptr, "must be a string");
  const auto s = v.get<std::string>();
  for (auto k : {KernelFamily::constant_one, KernelFamily::rational_decay, KernelFamily::singular_power})
    if (s == to_string(k)) return k;
  throw ConfigError(ptr, "unknown kernel family '" + s + "'");
}

inline ScenarioSpec parse_scenario(const json& j) {
  const std::string p = "/scenario";
  reject_unknown(j, p,
                 {"kind", "seed", "n_agents", "dim", "velocity_cap_angle", "position_box", "min_initial_gap",
                  "temp_range", "gap", "agents"});
  ScenarioSpec s;
  if (!j.contains("kind")) throw ConfigError(p + "/kind", "required field is missing");
  s.kind = parse_kind(j.at("kind"), p + "/kind");
  s.seed = get_seed(j, p, 1);
  s.velocity_cap_angle = get_real(j, p, "velocity_cap_angle", 0.3);
  s.position_box = get_real(j, p, "position_box", 1.0);
  s.min_initial_gap = get_real(j, p, "min_initial_gap", 0.05);
  s.gap = get_real(j, p, "gap", 1.0);
  if (j.contains("temp_range")) {
    const Vec tr = get_vector(j.at("temp_range"), p + "/temp_range");
    require(tr.size() == 2, p + "/temp_range", "must have exactly two entries [lo, hi]");
    s.temp_range = {tr[0], tr[1]};
  }
  require(s.velocity_cap_angle >= 0.0 && s.velocity_cap_angle < std::numbers::pi / 4, p + "/velocity_cap_angle",
          "must lie in [0, pi/4) so that cos(2 cap) > 0");
  require(s.position_box > 0.0, p + "/position_box", "must be > 0");
  require(s.min_initial_gap > 0.0, p + "/min_initial_gap", "must be > 0");
  require(s.temp_range.first > 0.0 && s.temp_range.second >= s.temp_range.first, p + "/temp_range",
          "must satisfy 0 < lo <= hi");
  require(s.gap > 0.0, p + "/gap", "must be > 0");

  if (j.contains("agents")) {
    const auto& arr = j.at("agents");
    require(arr.is_array(), p + "/agents", "must be an array");
    require(s.kind == ScenarioKind::custom || arr.empty(), p + "/agents", "only allowed for kind 'custom'");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string ap = p + "/agents/" + std::to_string(i);
      reject_unknown(arr[i], ap, {"position", "velocity", "temperature"});
      AgentState a;
      require(arr[i].contains("position"), ap + "/position", "required field is missing");
      require(arr[i].contains("velocity"), ap + "/velocity", "required field is missing");
      a.position = get_vector(arr[i].at("position"), ap + "/position");
      a.velocity = get_vector(arr[i].at("velocity"), ap + "/velocity");
      a.temperature = get_real(arr[i], ap, "temperature", std::nullopt);
      require(!a.position.empty(), ap + "/position", "must be nonempty");
      require(a.velocity.size() == a.position.size(), ap + "/velocity", "must match the position dimension");
      require(std::abs(norm(a.velocity) - 1.0) <= 1e-12, ap + "/velocity", "must have unit norm (to 1e-12)");
      require(a.temperature > 0.0, ap + "/temperature", "must be > 0");
      s.agents.push_back(std::move(a));
    }
  }

  switch (s.kind) {
    case ScenarioKind::example21:
    case ScenarioKind::prop41:
      require(get_int(j, p, "n_agents", 2) == 2, p + "/n_agents", "must be 2 for this scenario kind");
      require(get_int(j, p, "dim", 2) == 2, p + "/dim", "must be 2 for this scenario kind");
      s.n_agents = 2;
      s.dim = 2;
      break;
    case ScenarioKind::custom: {
      require(s.agents.size() >= 2, p + "/agents", "custom scenarios need at least two agents");
      const auto n = static_cast<std::int64_t>(s.agents.size());
      const auto d = static_cast<std::int64_t>(s.agents.front().position.size());
      require(get_int(j, p, "n_agents", n) == n, p + "/n_agents", "must equal the number of agents");
      require(get_int(j, p, "dim", d) == d, p + "/dim", "must equal the agent dimension");
      for (std::size_t i = 0; i < s.agents.size(); ++i)
        require(static_cast<std::int64_t>(s.agents[i].position.size()) == d,
                p + "/agents/" + std::to_string(i) + "/position", "all agents must share one dimension");
      SystemState st;
      st.agents = s.agents;
      require(min_pair_distance(st).distance > 0.0, p + "/agents", "positions must be pairwise distinct");
      s.n_agents = static_cast<int>(n);
      s.dim = static_cast<int>(d);
      break;
    }
    case ScenarioKind::random_cap: {
      const auto n = get_int(j, p, "n_agents", 10);
      const auto d = get_int(j, p, "dim", 2);
      require(n >= 2 && n <= 100000, p + "/n_agents", "must be >= 2");
      require(d >= 1 && d <= 1000, p + "/dim", "must be >= 1");
      s.n_agents = static_cast<int>(n);
      s.dim = static_cast<int>(d);
      break;
    }
  }
  return s;
}

inline SystemParams parse_params(const json& j, const ScenarioSpec& sc) {
  const std::string p = "/params";
  reject_unknown(j, p, {"alpha", "kappa1", "kappa2", "zeta"});
  SystemParams out;
  out.n_agents = sc.n_agents;
  out.dim = sc.dim;
  out.alpha = get_real(j, p, "alpha", std::nullopt);
  out.kappa1 = get_real(j, p, "kappa1", std::nullopt);
  out.kappa2 = get_real(j, p, "kappa2", std::nullopt);
  require(out.alpha > 0.0, p + "/alpha", "alpha must be > 0");
  require(out.kappa1 >= 0.0, p + "/kappa1", "kappa1 must be >= 0");
  require(out.kappa2 >= 0.0, p + "/kappa2", "kappa2 must be >= 0");
  if (j.contains("zeta")) {
    const auto& z = j.at("zeta");
    reject_unknown(z, p + "/zeta", {"family", "beta"});
    if (z.contains("family")) out.zeta.family = parse_family(z.at("family"), p + "/zeta/family");
    out.zeta.beta = get_real(z, p + "/zeta", "beta", 2.0);
    require(out.zeta.beta >= 0.0, p + "/zeta/beta", "must be >= 0");
  }
  if (sc.kind == ScenarioKind::prop41) {
    require(out.alpha < 1.0, p + "/alpha", "prop41 scenarios require 0 < alpha < 1");
    require(out.kappa1 > 0.0, p + "/kappa1", "prop41 scenarios require kappa1 > 0");
  }
  return out;
}

inline IntegratorConfig parse_integrator(const json& j) {
  const std::string p = "/integrator";
  reject_unknown(j, p, {"rel_tol", "abs_tol", "dt_init", "dt_max", "collision_threshold", "event_time_tol", "t_end"});
  IntegratorConfig c;
  c.rel_tol = get_real(j, p, "rel_tol", c.rel_tol);
  c.abs_tol = get_real(j, p, "abs_tol", c.abs_tol);
  c.dt_init = get_real(j, p, "dt_init", c.dt_init);
  c.dt_max = get_real(j, p, "dt_max", c.dt_max);
  c.collision_threshold = get_real(j, p, "collision_threshold", c.collision_threshold);
  c.event_time_tol = get_real(j, p, "event_time_tol", c.event_time_tol);
  c.t_end = get_real(j, p, "t_end", std::nullopt);
  for (auto [key, val] : {std::pair{"rel_tol", c.rel_tol}, std::pair{"abs_tol", c.abs_tol},
                          std::pair{"dt_init", c.dt_init}, std::pair{"dt_max", c.dt_max},
                          std::pair{"collision_threshold", c.collision_threshold},
                          std::pair{"event_time_tol", c.event_time_tol}})
    require(val > 0.0, p + "/" + key, "must be > 0");
  require(c.t_end >= 0.0, p + "/t_end", "must be >= 0");
  return c;
}

}  // namespace config_detail

inline RunConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  reject_unknown(j, "", {"scenario", "params", "integrator", "output_dt", "outputs"});
  if (!j.contains("scenario")) throw ConfigError("/scenario", "required field is missing");
  if (!j.contains("params")) throw ConfigError("/params", "required field is missing");
  if (!j.contains("integrator")) throw ConfigError("/integrator", "required field is missing");
  RunConfig c;
  c.scenario = parse_scenario(j.at("scenario"));
  c.params = parse_params(j.at("params"), c.scenario);
  c.integrator = parse_integrator(j.at("integrator"));
  const double t_end = c.integrator.t_end;
  c.output_dt = get_real(j, "", "output_dt", t_end > 0.0 ? std::min(0.01, t_end) : 0.01);
  require(c.output_dt > 0.0, "/output_dt", "must be > 0");
  require(t_end == 0.0 || c.output_dt <= t_end, "/output_dt", "must not exceed t_end");
  if (j.contains("outputs")) {
    const auto& arr = j.at("outputs");
    require(arr.is_array(), "/outputs", "must be an array of strings");
    c.outputs.clear();
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string ptr = "/outputs/" + std::to_string(k);
      require(arr[k].is_string(), ptr, "must be a string");
      const auto s = arr[k].get<std::string>();
      bool found = false;
      for (auto o : {OutputKind::trajectory_csv, OutputKind::diagnostics_csv, OutputKind::events_json,
                     OutputKind::certificate_json, OutputKind::svg_plots})
        if (s == to_string(o)) {
          c.outputs.insert(o);
          found = true;
        }
      require(found, ptr, "unknown output kind");
    }
  }
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("/", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("/", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

/// Fully materialized config; parse_config(to_json(c)) == c.
inline ojson to_json(const RunConfig& c) {
  ojson sc;
  sc["kind"] = to_string(c.scenario.kind);
  sc["seed"] = c.scenario.seed;
  sc["n_agents"] = c.scenario.n_agents;
  sc["dim"] = c.scenario.dim;
  sc["velocity_cap_angle"] = c.scenario.velocity_cap_angle;
  sc["position_box"] = c.scenario.position_box;
  sc["min_initial_gap"] = c.scenario.min_initial_gap;
  sc["temp_range"] = {c.scenario.temp_range.first, c.scenario.temp_range.second};
  sc["gap"] = c.scenario.gap;
  if (c.scenario.kind == ScenarioKind::custom) {
    sc["agents"] = ojson::array();
    for (const auto& a : c.scenario.agents)
      sc["agents"].push_back(ojson{{"position", a.position}, {"velocity", a.velocity}, {"temperature", a.temperature}});
  }
  ojson j;
  j["scenario"] = sc;
  j["params"] = ojson{{"alpha", c.params.alpha},
                      {"kappa1", c.params.kappa1},
                      {"kappa2", c.params.kappa2},
                      {"zeta", ojson{{"family", to_string(c.params.zeta.family)}, {"beta", c.params.zeta.beta}}}};
  j["integrator"] = ojson{{"rel_tol", c.integrator.rel_tol},
                          {"abs_tol", c.integrator.abs_tol},
                          {"dt_init", c.integrator.dt_init},
                          {"dt_max", c.integrator.dt_max},
                          {"collision_threshold", c.integrator.collision_threshold},
                          {"event_time_tol", c.integrator.event_time_tol},
                          {"t_end", c.integrator.t_end}};
  j["output_dt"] = c.output_dt;
  j["outputs"] = ojson::array();
  for (auto o : c.outputs) j["outputs"].push_back(to_string(o));
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kDiagnosticsHeader =
    "time,d_x,d_v,d_t,a_v,entropy,temp_sum,temp_min,temp_max,min_pair_dist,entropy_production,lyap_plus,lyap_minus";

inline void write_diagnostics(const std::vector<DiagnosticsFrame>& frames, std::ostream& out) {
  if (frames.empty()) throw std::invalid_argument("write_diagnostics: no frames");
  out << kDiagnosticsHeader << '\n';
  for (const auto& f : frames) {
    for (double v : {f.time, f.d_x, f.d_v, f.d_t, f.a_v, f.entropy, f.temp_sum, f.temp_min, f.temp_max,
                     f.min_pair_dist, f.entropy_production})
      out << format_double(v) << ',';
    out << (f.lyap_plus ? format_double(*f.lyap_plus) : "") << ',';
    out << (f.lyap_minus ? format_double(*f.lyap_minus) : "") << '\n';
  }
  if (!out) throw std::runtime_error("write_diagnostics: write failed");
}

inline std::vector<DiagnosticsFrame> read_diagnostics(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kDiagnosticsHeader)
    throw std::runtime_error("read_diagnostics: unexpected header");
  std::vector<DiagnosticsFrame> frames;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      cells.push_back(line.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (cells.size() != 13) throw std::runtime_error("read_diagnostics: expected 13 columns");
    auto num = [](const std::string& s) { return std::strtod(s.c_str(), nullptr); };
    DiagnosticsFrame f;
    double* fields[] = {&f.time, &f.d_x, &f.d_v, &f.d_t, &f.a_v, &f.entropy, &f.temp_sum, &f.temp_min,
                        &f.temp_max, &f.min_pair_dist, &f.entropy_production};
    for (std::size_t k = 0; k < 11; ++k) *fields[k] = num(cells[k]);
    if (!cells[11].empty()) f.lyap_plus = num(cells[11]);
    if (!cells[12].empty()) f.lyap_minus = num(cells[12]);
    frames.push_back(f);
  }
  return frames;
}

/// Long-format trajectory: one row per (sample, agent).
inline void write_trajectory(const Trajectory& traj, std::ostream& out) {
  const std::size_t d = traj.samples.empty() ? 0 : traj.samples.front().dim();
  out << "time,agent";
  for (std::size_t k = 1; k <= d; ++k) out << ",x" << k;
  for (std::size_t k = 1; k <= d; ++k) out << ",v" << k;
  out << ",T\n";
  for (const auto& s : traj.samples)
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto& a = s.agents[i];
      out << format_double(s.time) << ',' << i;
      for (double x : a.position) out << ',' << format_double(x);
      for (double v : a.velocity) out << ',' << format_double(v);
      out << ',' << format_double(a.temperature) << '\n';
    }
  if (!out) throw std::runtime_error("write_trajectory: write failed");
}

// ---------------------------------------------------------------------------
// JSON reports

inline ojson to_json(const FlockingCertificate& c) {
  ojson j;
  j["theorem"] = to_string(c.theorem);
  j["satisfied"] = c.satisfied;
  if (c.satisfied && c.d_x_inf) j["d_x_inf"] = json_real(*c.d_x_inf);
  j["rate_v"] = json_real(c.rate_v);
  j["rate_t"] = json_real(c.rate_t);
  j["margin"] = json_real(c.margin);
  j["spacing_guarantee"] = c.spacing_guarantee;
  j["requires_collision_free"] = c.requires_collision_free;
  if (c.d6_margin) {
    j["d6_margin"] = json_real(*c.d6_margin);
    if (c.d6_axis) j["d6_axis"] = *c.d6_axis;
  }
  if (c.d7_margin) j["d7_margin"] = json_real(*c.d7_margin);
  j["initial"] = ojson{{"d_x", c.initial.d_x0},   {"d_v", c.initial.d_v0},   {"d_t", c.initial.d_t0},
                       {"a_v", c.initial.a_v0},   {"temp_max", c.initial.t_max}, {"temp_min", c.initial.t_min},
                       {"min_pair_dist", c.initial.min_pair_dist}};
  return j;
}

/// Outcome of attempting one checker: a certificate or the precondition
/// failure that stopped it.
struct CertificateAttempt {
  Theorem theorem = Theorem::thm31;
  std::optional<FlockingCertificate> certificate;
  std::string error;
};

inline void write_certificate(const FlockingCertificate& c, std::ostream& out) {
  out << to_json(c).dump(2) << '\n';
  if (!out) throw std::runtime_error("write_certificate: write failed");
}

inline void write_certificates(const std::vector<CertificateAttempt>& attempts, std::ostream& out) {
  ojson j;
  j["certificates"] = ojson::array();
  for (const auto& a : attempts) {
    if (a.certificate) {
      j["certificates"].push_back(to_json(*a.certificate));
    } else {
      j["certificates"].push_back(ojson{{"theorem", to_string(a.theorem)}, {"satisfied", false}, {"error", a.error}});
    }
  }
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write_certificates: write failed");
}

inline ojson events_json(const Termination& term) {
  ojson j;
  j["termination"] = to_string(term.kind);
  if (!term.message.empty()) j["message"] = term.message;
  j["events"] = ojson::array();
  if (term.event) {
    const auto& e = *term.event;
    j["events"].push_back(ojson{{"time", e.time},
                                {"pair", {e.pair.first, e.pair.second}},
                                {"min_distance", e.min_distance_at_event}});
  }
  return j;
}

inline void write_events(const Termination& term, std::ostream& out) {
  out << events_json(term).dump(2) << '\n';
  if (!out) throw std::runtime_error("write_events: write failed");
}

inline ojson state_json(const SystemState& s) {
  ojson j;
  j["time"] = s.time;
  j["agents"] = ojson::array();
  for (const auto& a : s.agents)
    j["agents"].push_back(ojson{{"position", a.position}, {"velocity", a.velocity}, {"temperature", a.temperature}});
  return j;
}

}  // namespace tcs
