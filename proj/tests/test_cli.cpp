#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "tcs/commands.hpp"

using namespace tcs;
using tcs_test::source_path;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

template <class Fn>
Outcome invoke(Fn fn, const std::string& config, const std::string& out_dir = "") {
  CommandOptions opt;
  opt.config_path = config;
  opt.out_dir = out_dir;
  std::ostringstream o, e;
  Outcome r;
  r.code = fn(opt, o, e);
  r.out = o.str();
  r.err = e.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tcs-cli-test-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string write_json(const fs::path& dir, const std::string& name, const std::string& text) {
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int shell_raw(const std::string& cmd) {
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

int shell(const std::string& cmd) { return shell_raw(cmd + " >/dev/null 2>&1"); }

}  // namespace

TEST(Simulate, HeadOnCollisionExitsTwo) {
  const auto dir = scratch("ex21");
  const auto r = invoke(cmd_simulate, source_path("configs/example21.json"), dir.string());
  EXPECT_EQ(r.code, exit_code::collision);
  EXPECT_NE(r.out.find("termination=collision"), std::string::npos);
  const auto ev = nlohmann::json::parse(slurp(dir / "events.json"));
  ASSERT_EQ(ev["events"].size(), 1u);
  EXPECT_NEAR(ev["events"][0]["time"].get<double>(), 0.5, 1e-6);
  for (const char* f : {"config.json", "checks.json", "trajectory.csv", "diagnostics.csv", "certificate.json"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_FALSE(fs::exists(dir / "decay.svg"));
}

TEST(Simulate, CertifiedRunExitsZeroWithCleanChecks) {
  const auto dir = scratch("lyap");
  const auto r = invoke(cmd_simulate, source_path("configs/lyapunov_reference.json"), dir.string());
  EXPECT_EQ(r.code, exit_code::ok) << r.err;
  EXPECT_EQ(r.out.find("check failed"), std::string::npos) << r.out;
  for (const char* key : {"termination=reached_t_end", "final_d_v=", "final_d_t=", "min_distance="})
    EXPECT_NE(r.out.find(key), std::string::npos) << key;
  const auto checks = nlohmann::json::parse(slurp(dir / "checks.json"));
  for (const auto& c : checks["monotonicity"]) EXPECT_TRUE(c["passed"].get<bool>()) << c.dump();
  for (const auto& c : checks["decay"]) EXPECT_TRUE(c["passed"].get<bool>()) << c.dump();
  EXPECT_TRUE(fs::exists(dir / "decay.svg"));
  EXPECT_FALSE(fs::exists(dir / "trajectory.csv"));  // not requested
}

TEST(Simulate, MalformedConfigExitsOneWithPointer) {
  const auto dir = scratch("bad");
  const auto cfg = write_json(dir, "bad.json",
                              R"({"scenario":{"kind":"random_cap"},"params":{"alpha":0,"kappa1":1,"kappa2":1},
                                 "integrator":{"t_end":1}})");
  const auto r = invoke(cmd_simulate, cfg);
  EXPECT_EQ(r.code, exit_code::error);
  EXPECT_NE(r.err.find("/params/alpha"), std::string::npos) << r.err;
}

TEST(Simulate, ArtifactsByteIdenticalAcrossRuns) {
  const auto a = scratch("rep-a"), b = scratch("rep-b");
  const auto cfg = source_path("configs/minimal.json");
  ASSERT_EQ(invoke(cmd_simulate, cfg, a.string()).code, exit_code::ok);
  ASSERT_EQ(invoke(cmd_simulate, cfg, b.string()).code, exit_code::ok);
  for (const auto& e : fs::directory_iterator(a))
    EXPECT_EQ(slurp(e.path()), slurp(b / e.path().filename())) << e.path().filename();
}

TEST(Check, ReferenceTable) {
  const auto dir = scratch("check");
  const auto r = invoke(cmd_check, source_path("configs/lyapunov_reference.json"), dir.string());
  EXPECT_EQ(r.code, exit_code::ok);
  std::istringstream lines(r.out);
  std::string line;
  bool saw32 = false, saw31 = false;
  while (std::getline(lines, line)) {
    if (line.rfind("thm32", 0) == 0) {
      saw32 = true;
      EXPECT_NE(line.find("yes"), std::string::npos);
      EXPECT_NE(line.find(" 3 "), std::string::npos) << line;
    }
    if (line.rfind("thm31", 0) == 0) {
      saw31 = true;
      EXPECT_NE(line.find("no"), std::string::npos);
    }
  }
  EXPECT_TRUE(saw31 && saw32) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "certificate.json"));
  EXPECT_EQ(j["certificates"].size(), 3u);
}

TEST(Check, NonPositiveAngleExitsThree) {
  const auto dir = scratch("check-neg");
  const auto cfg = write_json(dir, "c.json", R"({"scenario":{"kind":"example21"},
      "params":{"alpha":2,"kappa1":1,"kappa2":1},"integrator":{"t_end":1}})");
  const auto r = invoke(cmd_check, cfg);
  EXPECT_EQ(r.code, exit_code::uncertified);
  std::size_t failures = 0;
  for (std::size_t pos = 0; (pos = r.out.find("precondition failed", pos)) != std::string::npos; ++pos) ++failures;
  EXPECT_EQ(failures, 3u);
}

TEST(Check, AlignedStartAllSatisfied) {
  const auto dir = scratch("check-aligned");
  const auto cfg = write_json(dir, "c.json", R"({"scenario":{"kind":"custom","agents":[
      {"position":[0,0],"velocity":[0.6,0.8],"temperature":1},
      {"position":[2,0],"velocity":[0.6,0.8],"temperature":2},
      {"position":[0,1],"velocity":[0.6,0.8],"temperature":1}]},
      "params":{"alpha":2,"kappa1":1,"kappa2":1},"integrator":{"t_end":1}})");
  const auto r = invoke(cmd_check, cfg);
  EXPECT_EQ(r.code, exit_code::ok);
  std::size_t yes = 0;
  for (std::size_t pos = 0; (pos = r.out.find(" yes ", pos)) != std::string::npos; ++pos) ++yes;
  EXPECT_EQ(yes, 3u) << r.out;
}

TEST(Compare, SmokeScenarioPasses) {
  const auto dir = scratch("cmp");
  const auto cfg = write_json(dir, "c.json", R"({"scenario":{"kind":"random_cap","seed":2,"n_agents":3,
      "min_initial_gap":0.3},"params":{"alpha":1.5,"kappa1":1,"kappa2":1},"integrator":{"t_end":1}})");
  CommandOptions opt;
  opt.config_path = cfg;
  std::ostringstream o, e;
  EXPECT_EQ(cmd_compare(opt, 1e-4, o, e), exit_code::ok) << o.str() << e.str();
  EXPECT_NE(o.str().find("PASS"), std::string::npos);
}

TEST(Compare, FreeStreamingIsExact) {
  const auto dir = scratch("cmp0");
  const auto cfg = write_json(dir, "c.json", R"({"scenario":{"kind":"random_cap","seed":4,"n_agents":4},
      "params":{"alpha":1,"kappa1":0,"kappa2":0},"integrator":{"t_end":1}})");
  const auto rc = load_config(cfg);
  const SystemState s = build_scenario(rc.scenario, rc.params);
  const auto r = compare_endpoints(s, rc.params, rc.integrator, 1e-4);
  EXPECT_LE(r.discrepancy, 1e-12);
}

TEST(Compare, CollisionRefused) {
  const auto r = invoke([](const CommandOptions& o, std::ostream& a, std::ostream& b) { return cmd_compare(o, 1e-4, a, b); },
                        source_path("configs/example21.json"));
  EXPECT_EQ(r.code, exit_code::error);
  EXPECT_NE(r.err.find("oracle"), std::string::npos) << r.err;
}

TEST(Scenario, PrintsProp41Angle) {
  const auto r = invoke(cmd_scenario, source_path("configs/prop41.json"));
  ASSERT_EQ(r.code, exit_code::ok);
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_NEAR(std::sin(j["theta"].get<double>()), (std::sqrt(5.0) - 1.0) / 2.0, 1e-10);
  EXPECT_NEAR(j["predicted_collision_bound"].get<double>(), 1.61803, 1e-5);
}

TEST(Sweep, AlphaAxisMatchesGolden) {
  const auto dir = scratch("sweep-alpha");
  const auto r = invoke(cmd_sweep, source_path("configs/sweep_alpha.json"), dir.string());
  ASSERT_EQ(r.code, exit_code::ok) << r.err;
  const std::string csv = slurp(dir / "sweep_summary.csv");
  EXPECT_EQ(csv, slurp(source_path("tests/golden/sweep_alpha.csv")));
  EXPECT_EQ(csv, r.out);
}

TEST(Sweep, AlphaAxisPhaseOutcome) {
  const SweepSpec spec = parse_sweep(nlohmann::json::parse(slurp(source_path("configs/sweep_alpha.json"))));
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].termination, "collision");
  ASSERT_TRUE(rows[0].collision_time);
  // reduced two-body ODE solved independently: r' = -2 sin th, th' = -k1 sin 2th / (2 r^a)
  EXPECT_NEAR(*rows[0].collision_time, 0.97291108, 1e-7);
  EXPECT_EQ(rows[1].termination, "reached_t_end");
  EXPECT_EQ(rows[2].termination, "reached_t_end");
}

TEST(Sweep, SeedAxisDistinctAndStable) {
  const SweepSpec spec = parse_sweep(nlohmann::json::parse(slurp(source_path("configs/sweep_seeds.json"))));
  const auto a = run_sweep(spec);
  ASSERT_EQ(a.size(), 10u);
  std::set<double> finals;
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].cell, k);
    EXPECT_EQ(a[k].config["scenario"]["seed"].get<int>(), static_cast<int>(k) + 1);
    EXPECT_TRUE(a[k].error.empty()) << a[k].error;
    finals.insert(a[k].min_distance);
  }
  EXPECT_EQ(finals.size(), 10u);
  SweepSpec serial = spec;
  serial.parallelism = 1;
  std::ostringstream x, y;
  write_sweep_csv(a, x);
  write_sweep_csv(run_sweep(serial), y);
  EXPECT_EQ(x.str(), y.str());
}

TEST(Sweep, EmptyAxesEqualsSimulate) {
  const auto base = nlohmann::json::parse(slurp(source_path("configs/minimal.json")));
  const SweepSpec spec = parse_sweep(nlohmann::json{{"base", base}, {"axes", nlohmann::json::array()}});
  const auto rows = run_sweep(spec);
  ASSERT_EQ(rows.size(), 1u);
  const auto sim = simulate(parse_config(base));
  EXPECT_EQ(rows[0].termination, to_string(sim.trajectory.termination.kind));
  EXPECT_EQ(rows[0].final_d_v, sim.frames.back().d_v);
  EXPECT_EQ(rows[0].min_distance, sim.min_distance_over_run());
}

TEST(Sweep, CellFailuresRecordedInRow) {
  const auto base = nlohmann::json::parse(slurp(source_path("configs/minimal.json")));
  nlohmann::json j{{"base", base},
                   {"axes", {{{"path", "velocity_cap_angle"}, {"values", {0.2, 1.2}}}}},
                   {"parallelism", 2}};
  const auto rows = run_sweep(parse_sweep(j));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].error.empty());
  EXPECT_NE(rows[1].error.find("/scenario/velocity_cap_angle"), std::string::npos) << rows[1].error;
}

TEST(Sweep, SpecValidation) {
  const auto base = nlohmann::json::parse(slurp(source_path("configs/minimal.json")));
  auto ptr = [&](const nlohmann::json& j) {
    try {
      parse_sweep(j);
    } catch (const ConfigError& e) {
      return e.pointer();
    }
    return std::string("<accepted>");
  };
  EXPECT_EQ(ptr({{"base", base}, {"axes", {{{"path", "gap"}, {"values", {1}}}}}}), "/axes/0/path");
  EXPECT_EQ(ptr({{"base", base}, {"axes", {{{"path", "seed"}, {"values", {1.5}}}}}}), "/axes/0/values/0");
  EXPECT_EQ(ptr({{"base", base}, {"parallelism", 0}}), "/parallelism");
  nlohmann::json bad = base;
  bad["params"]["alpha"] = -1;
  EXPECT_EQ(ptr({{"base", bad}}), "/base/params/alpha");
  std::vector<int> many(400);
  EXPECT_EQ(ptr({{"base", base},
                 {"axes", {{{"path", "alpha"}, {"values", many}}, {{"path", "kappa1"}, {"values", many}}}}}),
            "/axes/1");
}

TEST(Binary, ExitCodesThroughTheCommandLine) {
  const std::string bin = TCSLAB_BIN;
  const auto dir = scratch("bin");
  EXPECT_EQ(shell(bin + " simulate --quiet --config " + source_path("configs/example21.json") + " --out " +
                  (dir / "a").string()),
            2);
  EXPECT_EQ(shell(bin + " check --quiet --config " + source_path("configs/lyapunov_reference.json")), 0);
  EXPECT_EQ(shell(bin + " scenario --config " + source_path("configs/prop41.json")), 0);
  EXPECT_NE(shell(bin + " simulate --config /nonexistent.json"), 0);
  EXPECT_NE(shell(bin), 0);
  EXPECT_NE(shell(bin + " compare --config " + source_path("configs/minimal.json") + " --oracle-dt 0.5"), 0);
}

TEST(Binary, SeedOverrideChangesState) {
  const std::string bin = TCSLAB_BIN;
  const auto dir = scratch("seed");
  const std::string cfg = source_path("configs/minimal.json");
  ASSERT_EQ(shell_raw(bin + " scenario --config " + cfg + " > " + (dir / "a.json").string()), 0);
  ASSERT_EQ(shell_raw(bin + " scenario --config " + cfg + " --seed 99 > " + (dir / "b.json").string()), 0);
  ASSERT_EQ(shell_raw(bin + " scenario --config " + cfg + " --seed 3 > " + (dir / "c.json").string()), 0);
  ASSERT_FALSE(slurp(dir / "a.json").empty());
  EXPECT_NE(slurp(dir / "a.json"), slurp(dir / "b.json"));
  EXPECT_EQ(slurp(dir / "a.json"), slurp(dir / "c.json"));  // minimal.json uses seed 3
}
