#pragma once

// Command implementations behind the tcslab executable. Each returns the
// process exit status and writes human-readable output to the given streams,
// so they can be exercised directly from tests.
//
// Exit codes:
//   0  success (simulate: reached t_end; check: some certificate satisfied;
//      compare: endpoints agree)
//   1  error (bad config, precondition failure, oracle collision)
//   2  simulate: run ended in a collision event
//   3  check: no certificate satisfied
//   4  compare: endpoints disagree beyond tolerance

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tcs/certificates.hpp"
#include "tcs/diagnostics.hpp"
#include "tcs/integrator.hpp"
#include "tcs/io.hpp"
#include "tcs/oracle.hpp"
#include "tcs/plot.hpp"
#include "tcs/scenarios.hpp"

namespace tcs {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int error = 1;
inline constexpr int collision = 2;
inline constexpr int uncertified = 3;
inline constexpr int mismatch = 4;
}  // namespace exit_code

struct CommandOptions {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

// ---------------------------------------------------------------------------
// pipeline

/// Runs every checker; precondition failures are captured per theorem.
inline std::vector<CertificateAttempt> evaluate_certificates(const SystemState& s, const SystemParams& p) {
  std::vector<CertificateAttempt> out;
  auto attempt = [&](Theorem t, auto&& fn) {
    CertificateAttempt a;
    a.theorem = t;
    try {
      a.certificate = fn();
      a.theorem = a.certificate->theorem;
    } catch (const PreconditionError& e) {
      a.error = e.what();
    }
    out.push_back(std::move(a));
  };
  attempt(Theorem::thm31, [&] { return check_thm31(s, p); });
  attempt(Theorem::thm32, [&] { return check_thm32(s, p); });
  attempt(Theorem::thm41_cond1, [&] { return check_thm41(s, p); });
  return out;
}

/// First satisfied certificate in the order lyapunov, bootstrap, spacing.
inline const FlockingCertificate* primary_certificate(const std::vector<CertificateAttempt>& attempts) {
  for (Theorem t : {Theorem::thm32, Theorem::thm31, Theorem::thm41_cond1, Theorem::thm41_cond2})
    for (const auto& a : attempts)
      if (a.certificate && a.certificate->satisfied && a.certificate->theorem == t) return &*a.certificate;
  return nullptr;
}

struct SimulationResult {
  RunConfig config;
  SystemState initial;
  std::vector<CertificateAttempt> certificates;
  std::optional<FlockingCertificate> certificate;  // the one attached to diagnostics
  Trajectory trajectory;
  std::vector<DiagnosticsFrame> frames;
  CheckReport monotonicity;
  EntropyRateReport entropy_rate;
  std::optional<CheckReport> decay;

  bool collided() const { return trajectory.termination.kind == Termination::Kind::collision; }

  double min_distance_over_run() const {
    double m = kInf;
    for (const auto& f : frames) m = std::min(m, f.min_pair_dist);
    if (trajectory.termination.event) m = std::min(m, trajectory.termination.event->min_distance_at_event);
    return m;
  }
};

inline SimulationResult simulate(const RunConfig& cfg) {
  SimulationResult r;
  r.config = cfg;
  r.initial = build_scenario(cfg.scenario, cfg.params);
  r.certificates = evaluate_certificates(r.initial, cfg.params);
  if (const auto* c = primary_certificate(r.certificates)) r.certificate = *c;
  r.trajectory = run(r.initial, cfg.params, cfg.integrator, cfg.output_dt);
  const FlockingCertificate* cert = r.certificate ? &*r.certificate : nullptr;
  r.frames = compute_frames(r.trajectory, cfg.params, cert);
  r.monotonicity = check_monotonicity(r.frames);
  r.entropy_rate = check_entropy_rate(r.frames, r.trajectory);
  // the flocking conclusions are stated for collision-free solutions
  if (cert && r.trajectory.termination.kind == Termination::Kind::reached_t_end)
    r.decay = check_decay_bounds(r.frames, *cert);
  return r;
}

inline ojson check_report_json(const CheckReport& rep) {
  ojson arr = ojson::array();
  for (const auto& c : rep.checks) {
    ojson j{{"name", c.name}, {"applicable", c.applicable}, {"passed", c.passed}, {"worst", json_real(c.worst)}};
    if (c.first_violation) j["first_violation"] = *c.first_violation;
    arr.push_back(j);
  }
  return arr;
}

inline ojson checks_json(const SimulationResult& r) {
  ojson j;
  j["monotonicity"] = check_report_json(r.monotonicity);
  j["entropy_rate"] = ojson{{"applicable", r.entropy_rate.check.applicable},
                            {"passed", r.entropy_rate.check.passed},
                            {"max_mismatch", r.entropy_rate.max_mismatch},
                            {"tolerance", r.entropy_rate.tolerance}};
  if (r.decay) j["decay"] = check_report_json(*r.decay);
  const auto& st = r.trajectory.stats;
  j["integrator"] = ojson{{"accepted_steps", st.accepted},
                          {"rejected_steps", st.rejected},
                          {"max_pre_projection_drift", st.max_pre_projection_drift},
                          {"max_post_projection_deviation", st.max_post_projection_deviation}};
  return j;
}

namespace cmd_detail {

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open '" + p.string() + "' for writing");
  f << content;
  if (!f) throw std::runtime_error("write to '" + p.string() + "' failed");
}

template <class Fn>
std::string render(Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

inline RunConfig load_with_overrides(const CommandOptions& opt) {
  RunConfig cfg = load_config(opt.config_path);
  if (opt.seed) cfg.scenario.seed = *opt.seed;
  return cfg;
}

inline std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(10) << v;
  return ss.str();
}

}  // namespace cmd_detail

/// Writes every requested artifact plus the echoed config and check report.
inline void write_artifacts(const SimulationResult& r, const std::filesystem::path& dir) {
  using cmd_detail::render;
  using cmd_detail::write_file;
  std::filesystem::create_directories(dir);
  const auto& outs = r.config.outputs;
  const FlockingCertificate* cert = r.certificate ? &*r.certificate : nullptr;
  write_file(dir / "config.json", to_json(r.config).dump(2) + "\n");
  write_file(dir / "checks.json", checks_json(r).dump(2) + "\n");
  if (outs.contains(OutputKind::trajectory_csv))
    write_file(dir / "trajectory.csv", render([&](std::ostream& o) { write_trajectory(r.trajectory, o); }));
  if (outs.contains(OutputKind::diagnostics_csv))
    write_file(dir / "diagnostics.csv", render([&](std::ostream& o) { write_diagnostics(r.frames, o); }));
  if (outs.contains(OutputKind::events_json))
    write_file(dir / "events.json", render([&](std::ostream& o) { write_events(r.trajectory.termination, o); }));
  if (outs.contains(OutputKind::certificate_json))
    write_file(dir / "certificate.json", render([&](std::ostream& o) { write_certificates(r.certificates, o); }));
  if (outs.contains(OutputKind::svg_plots))
    write_file(dir / "decay.svg", render([&](std::ostream& o) { write_decay_svg(r.frames, cert, o); }));
}

inline std::string summary_line(const SimulationResult& r) {
  using cmd_detail::fmt;
  std::ostringstream ss;
  const auto& term = r.trajectory.termination;
  ss << "termination=" << to_string(term.kind);
  if (term.event) ss << " collision_time=" << fmt(term.event->time);
  ss << " final_d_v=" << fmt(r.frames.back().d_v) << " final_d_t=" << fmt(r.frames.back().d_t)
     << " min_distance=" << fmt(r.min_distance_over_run());
  return ss.str();
}

// ---------------------------------------------------------------------------
// simulate

inline int cmd_simulate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = cmd_detail::load_with_overrides(opt);
    const SimulationResult r = simulate(cfg);
    if (!opt.out_dir.empty()) write_artifacts(r, opt.out_dir);
    if (!opt.quiet) {
      out << summary_line(r) << '\n';
      for (const auto& c : r.monotonicity.checks)
        if (c.applicable && !c.passed) out << "check failed: " << c.name << " (worst " << c.worst << ")\n";
      if (r.decay)
        for (const auto& c : r.decay->checks)
          if (!c.passed) out << "check failed: " << c.name << " (worst " << c.worst << ")\n";
    }
    switch (r.trajectory.termination.kind) {
      case Termination::Kind::reached_t_end: return exit_code::ok;
      case Termination::Kind::collision: return exit_code::collision;
      case Termination::Kind::step_failure:
        err << "error: step failure: " << r.trajectory.termination.message << '\n';
        return exit_code::error;
    }
    return exit_code::error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::error;
  }
}

// ---------------------------------------------------------------------------
// check

inline int cmd_check(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = cmd_detail::load_with_overrides(opt);
    const SystemState s = build_scenario(cfg.scenario, cfg.params);
    const auto attempts = evaluate_certificates(s, cfg.params);
    if (!opt.out_dir.empty()) {
      std::filesystem::create_directories(opt.out_dir);
      cmd_detail::write_file(std::filesystem::path(opt.out_dir) / "certificate.json",
                             cmd_detail::render([&](std::ostream& o) { write_certificates(attempts, o); }));
    }
    bool any = false;
    if (!opt.quiet)
      out << std::left << std::setw(13) << "theorem" << std::setw(11) << "satisfied" << std::setw(18) << "d_x_inf"
          << std::setw(18) << "rate_v" << std::setw(18) << "rate_t" << "margin\n";
    for (const auto& a : attempts) {
      if (!a.certificate) {
        if (!opt.quiet) out << std::setw(13) << to_string(a.theorem) << "precondition failed: " << a.error << '\n';
        continue;
      }
      const auto& c = *a.certificate;
      any = any || c.satisfied;
      if (opt.quiet) continue;
      auto cell = [](double v) { return cmd_detail::fmt(v); };
      out << std::setw(13) << to_string(c.theorem) << std::setw(11) << (c.satisfied ? "yes" : "no") << std::setw(18)
          << (c.satisfied && c.d_x_inf ? cell(*c.d_x_inf) : std::string("-")) << std::setw(18)
          << (c.satisfied ? cell(c.rate_v) : "-") << std::setw(18) << (c.satisfied ? cell(c.rate_t) : "-")
          << cell(c.margin) << '\n';
    }
    return any ? exit_code::ok : exit_code::uncertified;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::error;
  }
}

// ---------------------------------------------------------------------------
// compare

struct CompareResult {
  double discrepancy = 0.0;
  double tolerance = 0.0;
  SystemState adaptive, oracle;
};

/// Endpoint comparison of the adaptive integrator against the fixed-step
/// oracle. Throws OracleCollisionError, or DomainError if the adaptive run
/// does not reach t_end.
inline CompareResult compare_endpoints(const SystemState& initial, const SystemParams& p,
                                       const IntegratorConfig& icfg, double oracle_dt) {
  CompareResult r;
  OracleConfig ocfg;
  ocfg.dt = oracle_dt;
  ocfg.t_end = icfg.t_end;
  ocfg.collision_threshold = icfg.collision_threshold;
  r.oracle = run_oracle(initial, p, ocfg);
  const Trajectory traj = run(initial, p, icfg, std::max(icfg.t_end, 1e-300));
  if (traj.termination.kind != Termination::Kind::reached_t_end)
    throw DomainError("adaptive run did not reach t_end (" + std::string(to_string(traj.termination.kind)) + ")");
  r.adaptive = traj.samples.back();
  for (std::size_t i = 0; i < initial.size(); ++i) {
    const auto& a = r.adaptive.agents[i];
    const auto& b = r.oracle.agents[i];
    for (std::size_t k = 0; k < a.position.size(); ++k) {
      r.discrepancy = std::max(r.discrepancy, std::abs(a.position[k] - b.position[k]));
      r.discrepancy = std::max(r.discrepancy, std::abs(a.velocity[k] - b.velocity[k]));
    }
    r.discrepancy = std::max(r.discrepancy, std::abs(a.temperature - b.temperature));
  }
  r.tolerance = std::max(1e-7, 100.0 * icfg.rel_tol);
  return r;
}

inline int cmd_compare(const CommandOptions& opt, double oracle_dt, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = cmd_detail::load_with_overrides(opt);
    const SystemState s = build_scenario(cfg.scenario, cfg.params);
    const CompareResult r = compare_endpoints(s, cfg.params, cfg.integrator, oracle_dt);
    const bool pass = r.discrepancy <= r.tolerance;
    if (!opt.quiet)
      out << "max_endpoint_discrepancy=" << cmd_detail::fmt(r.discrepancy)
          << " tolerance=" << cmd_detail::fmt(r.tolerance) << (pass ? " PASS" : " FAIL") << '\n';
    return pass ? exit_code::ok : exit_code::mismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::error;
  }
}

// ---------------------------------------------------------------------------
// scenario

inline int cmd_scenario(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const RunConfig cfg = cmd_detail::load_with_overrides(opt);
    ojson j;
    j["kind"] = to_string(cfg.scenario.kind);
    j["state"] = state_json(build_scenario(cfg.scenario, cfg.params));
    j["initial"] = [&] {
      const auto ic = initial_constants(build_scenario(cfg.scenario, cfg.params));
      return ojson{{"d_x", ic.d_x0},       {"d_v", ic.d_v0},       {"d_t", ic.d_t0},
                   {"a_v", ic.a_v0},       {"temp_max", ic.t_max}, {"temp_min", ic.t_min},
                   {"min_pair_dist", ic.min_pair_dist}};
    }();
    if (cfg.scenario.kind == ScenarioKind::prop41) {
      const auto p41 = build_prop41(cfg.params.alpha, cfg.params.kappa1, cfg.scenario.gap);
      j["theta"] = p41.theta;
      j["a"] = p41.a;
      j["predicted_collision_bound"] = p41.collision_bound;
    }
    out << j.dump(2) << '\n';
    return exit_code::ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::error;
  }
}

// ---------------------------------------------------------------------------
// sweep

struct SweepAxis {
  std::string path;  // alpha | kappa1 | kappa2 | velocity_cap_angle | seed
  std::vector<nlohmann::json> values;
};

struct SweepSpec {
  nlohmann::json base;  // RunConfig document; each cell is re-validated
  std::vector<SweepAxis> axes;
  int parallelism = 1;
};

inline constexpr std::size_t kMaxSweepCells = 100000;

inline SweepSpec parse_sweep(const nlohmann::json& j) {
  using config_detail::reject_unknown;
  reject_unknown(j, "", {"base", "axes", "parallelism"});
  SweepSpec s;
  if (!j.contains("base")) throw ConfigError("/base", "required field is missing");
  s.base = j.at("base");
  // validate the base document up front
  try {
    (void)parse_config(s.base);
  } catch (const ConfigError& e) {
    throw ConfigError("/base" + (e.pointer() == "/" ? std::string() : e.pointer()), e.message());
  }
  s.parallelism = static_cast<int>(config_detail::get_int(j, "", "parallelism", 1));
  if (s.parallelism < 1) throw ConfigError("/parallelism", "must be >= 1");
  std::size_t cells = 1;
  if (j.contains("axes")) {
    const auto& axes = j.at("axes");
    if (!axes.is_array()) throw ConfigError("/axes", "must be an array");
    for (std::size_t k = 0; k < axes.size(); ++k) {
      const std::string p = "/axes/" + std::to_string(k);
      reject_unknown(axes[k], p, {"path", "values"});
      SweepAxis ax;
      if (!axes[k].contains("path") || !axes[k].at("path").is_string())
        throw ConfigError(p + "/path", "must be a string");
      ax.path = axes[k].at("path").get<std::string>();
      if (ax.path != "alpha" && ax.path != "kappa1" && ax.path != "kappa2" && ax.path != "velocity_cap_angle" &&
          ax.path != "seed")
        throw ConfigError(p + "/path", "unsupported sweep parameter '" + ax.path + "'");
      if (!axes[k].contains("values") || !axes[k].at("values").is_array() || axes[k].at("values").empty())
        throw ConfigError(p + "/values", "must be a nonempty array");
      for (std::size_t m = 0; m < axes[k].at("values").size(); ++m) {
        const auto& v = axes[k].at("values")[m];
        const std::string vp = p + "/values/" + std::to_string(m);
        if (ax.path == "seed" ? !v.is_number_integer() : !v.is_number())
          throw ConfigError(vp, ax.path == "seed" ? "must be an integer" : "must be a number");
        ax.values.push_back(v);
      }
      cells *= ax.values.size();
      if (cells > kMaxSweepCells) throw ConfigError(p, "sweep exceeds 100000 cells");
      s.axes.push_back(std::move(ax));
    }
  }
  return s;
}

struct SweepRow {
  std::size_t cell = 0;
  nlohmann::json config;  // the cell's run config document
  std::string thm31, thm32, thm41;
  bool spacing_guarantee = false;
  std::string termination;
  std::optional<double> collision_time;
  double final_d_v = 0.0;
  double min_distance = 0.0;
  std::string error;
};

inline constexpr const char* kSweepHeader =
    "cell,alpha,kappa1,kappa2,velocity_cap_angle,seed,thm31,thm32,thm41,spacing_guarantee,termination,"
    "collision_time,final_d_v,min_distance,error";

namespace cmd_detail {

inline nlohmann::json cell_config(const SweepSpec& spec, std::size_t cell) {
  nlohmann::json j = spec.base;
  // last axis varies fastest
  std::size_t rem = cell;
  for (std::size_t k = spec.axes.size(); k-- > 0;) {
    const auto& ax = spec.axes[k];
    const auto& v = ax.values[rem % ax.values.size()];
    rem /= ax.values.size();
    if (ax.path == "velocity_cap_angle" || ax.path == "seed")
      j["scenario"][ax.path] = v;
    else
      j["params"][ax.path] = v;
  }
  return j;
}

inline std::string outcome(const std::vector<CertificateAttempt>& attempts, std::size_t idx) {
  const auto& a = attempts[idx];
  if (!a.certificate) return "precondition_failed";
  return a.certificate->satisfied ? "satisfied" : "unsatisfied";
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

}  // namespace cmd_detail

inline SweepRow run_cell(const SweepSpec& spec, std::size_t cell) {
  SweepRow row;
  row.cell = cell;
  row.config = cmd_detail::cell_config(spec, cell);
  try {
    const RunConfig cfg = parse_config(row.config);
    const SimulationResult r = simulate(cfg);
    row.thm31 = cmd_detail::outcome(r.certificates, 0);
    row.thm32 = cmd_detail::outcome(r.certificates, 1);
    row.thm41 = cmd_detail::outcome(r.certificates, 2);
    row.spacing_guarantee = r.certificates[2].certificate && r.certificates[2].certificate->spacing_guarantee;
    row.termination = to_string(r.trajectory.termination.kind);
    if (r.trajectory.termination.event) row.collision_time = r.trajectory.termination.event->time;
    row.final_d_v = r.frames.back().d_v;
    row.min_distance = r.min_distance_over_run();
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

inline std::vector<SweepRow> run_sweep(const SweepSpec& spec) {
  std::size_t cells = 1;
  for (const auto& ax : spec.axes) cells *= ax.values.size();
  std::vector<SweepRow> rows(cells);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < cells; k = next++) rows[k] = run_cell(spec, k);
  };
  const auto n_threads = static_cast<std::size_t>(std::min<std::size_t>(spec.parallelism, cells));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
  }
  return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << kSweepHeader << '\n';
  for (const auto& r : rows) {
    const auto& sc = r.config.contains("scenario") ? r.config["scenario"] : nlohmann::json::object();
    const auto& pr = r.config.contains("params") ? r.config["params"] : nlohmann::json::object();
    auto real = [](const nlohmann::json& obj, const char* key, double def) {
      return obj.contains(key) && obj.at(key).is_number() ? format_double(obj.at(key).get<double>())
                                                          : format_double(def);
    };
    const std::string seed = sc.contains("seed") ? sc.at("seed").dump() : "1";
    out << r.cell << ',' << real(pr, "alpha", 0.0) << ',' << real(pr, "kappa1", 0.0) << ','
        << real(pr, "kappa2", 0.0) << ',' << real(sc, "velocity_cap_angle", 0.3) << ',' << seed << ',';
    if (r.error.empty()) {
      out << r.thm31 << ',' << r.thm32 << ',' << r.thm41 << ',' << (r.spacing_guarantee ? "true" : "false") << ','
          << r.termination << ',' << (r.collision_time ? format_double(*r.collision_time) : "") << ','
          << format_double(r.final_d_v) << ',' << format_double(r.min_distance) << ",\n";
    } else {
      out << ",,,,,,,," << cmd_detail::csv_escape(r.error) << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_sweep_csv: write failed");
}

inline int cmd_sweep(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("/", "cannot open sweep file '" + opt.config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("/", std::string("malformed JSON: ") + e.what());
    }
    if (opt.seed && j.contains("base") && j["base"].is_object()) j["base"]["scenario"]["seed"] = *opt.seed;
    const SweepSpec spec = parse_sweep(j);
    const auto rows = run_sweep(spec);
    const std::string csv = cmd_detail::render([&](std::ostream& o) { write_sweep_csv(rows, o); });
    if (!opt.out_dir.empty()) {
      std::filesystem::create_directories(opt.out_dir);
      cmd_detail::write_file(std::filesystem::path(opt.out_dir) / "sweep_summary.csv", csv);
    }
    if (!opt.quiet) out << csv;
    return exit_code::ok;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::error;
  }
}

}  // namespace tcs
