#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "helpers.hpp"
#include "tcs/functionals.hpp"
#include "tcs/integrator.hpp"
#include "tcs/scenarios.hpp"

using namespace tcs;
using tcs_test::params_for;

namespace {

ScenarioSpec spec_of(std::uint64_t seed, int n, int d, double cap) {
  ScenarioSpec sp;
  sp.seed = seed;
  sp.n_agents = n;
  sp.dim = d;
  sp.velocity_cap_angle = cap;
  sp.temp_range = {0.5, 2.5};
  return sp;
}

void expect_valid(const SystemState& s) {
  for (const auto& a : s.agents) {
    EXPECT_LE(std::abs(norm(a.velocity) - 1.0), 1e-12);
    EXPECT_GT(a.temperature, 0.0);
  }
  EXPECT_GT(min_pair_distance(s).distance, 0.0);
}

}  // namespace

TEST(BuildRandom, SeedDeterminism) {
  const auto sp = spec_of(99, 7, 3, 0.4);
  const SystemState a = build_random(sp), b = build_random(sp);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.agents[i].position, b.agents[i].position);
    EXPECT_EQ(a.agents[i].velocity, b.agents[i].velocity);
    EXPECT_EQ(a.agents[i].temperature, b.agents[i].temperature);
  }
  const SystemState c = build_random(spec_of(100, 7, 3, 0.4));
  EXPECT_NE(a.agents[0].position, c.agents[0].position);
}

TEST(BuildRandom, ZeroCapAlignsEveryone) {
  for (int d : {1, 2, 3}) {
    const SystemState s = build_random(spec_of(5, 6, d, 0.0));
    for (const auto& a : s.agents) EXPECT_EQ(a.velocity, s.agents[0].velocity);
    EXPECT_DOUBLE_EQ(velocity_pair_angle(s).value, 1.0);
  }
}

TEST(BuildRandom, CapGuaranteesPairAngle) {
  const SystemState s = build_random(spec_of(2024, 10, 3, 0.3));
  EXPECT_GE(velocity_pair_angle(s).value, std::cos(0.6));
  EXPECT_NEAR(std::cos(0.6), 0.8253, 1e-4);
  expect_valid(s);
}

TEST(BuildRandom, PropertiesAcrossSeeds) {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const int n = 2 + static_cast<int>(seed % 9);
    const int d = 1 + static_cast<int>(seed % 4);
    const double cap = 0.05 + 0.7 * static_cast<double>(seed % 10) / 10.0;
    auto sp = spec_of(seed, n, d, cap);
    sp.min_initial_gap = 0.02;
    const SystemState s = build_random(sp);
    ASSERT_EQ(s.size(), static_cast<std::size_t>(n));
    ASSERT_EQ(s.dim(), static_cast<std::size_t>(d));
    expect_valid(s);
    EXPECT_GE(velocity_pair_angle(s).value, std::cos(2.0 * cap) - 1e-12) << seed;
    EXPECT_GE(min_pair_distance(s).distance, sp.min_initial_gap) << seed;
    for (const auto& a : s.agents) {
      for (double x : a.position) {
        EXPECT_GE(x, 0.0);
        EXPECT_LE(x, sp.position_box);
      }
      EXPECT_GE(a.temperature, 0.5);
      EXPECT_LE(a.temperature, 2.5);
    }
  }
}

TEST(BuildRandom, InfeasibleGapRejected) {
  auto sp = spec_of(1, 50, 1, 0.2);
  sp.min_initial_gap = 0.5;  // 50 points, gap 0.5, in a unit segment
  EXPECT_THROW(build_random(sp), InfeasibleSpec);
}

TEST(BuildRandom, InvalidSpecRejected) {
  auto sp = spec_of(1, 4, 2, std::numbers::pi / 4);
  EXPECT_THROW(build_random(sp), DomainError);
  sp = spec_of(1, 1, 2, 0.2);
  EXPECT_THROW(build_random(sp), DomainError);
  sp = spec_of(1, 4, 2, 0.2);
  sp.temp_range = {0.0, 1.0};
  EXPECT_THROW(build_random(sp), DomainError);
}

TEST(Example21, Layout) {
  const SystemState s = build_example21(2.5);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.agents[1].position, (Vec{2.5, 0.0}));
  EXPECT_EQ(s.agents[0].velocity, (Vec{1.0, 0.0}));
  EXPECT_EQ(s.agents[1].velocity, (Vec{-1.0, 0.0}));
  EXPECT_DOUBLE_EQ(velocity_pair_angle(s).value, -1.0);
  EXPECT_THROW(build_example21(0.0), DomainError);
}

TEST(Prop41, ReferenceAngleAndBound) {
  const auto sc = build_prop41(0.5, 1.0, 1.0);
  // the construction condition reduces to s^2 + s - 1 = 0 for s = sin(theta)
  const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
  EXPECT_NEAR(std::sin(sc.theta), golden, 1e-10);
  EXPECT_NEAR(sc.theta, 0.66624, 1e-5);
  EXPECT_NEAR(std::cos(2.0 * sc.theta), 0.23607, 1e-5);
  EXPECT_NEAR(velocity_pair_angle(sc.state).value, std::cos(2.0 * sc.theta), 1e-14);
  EXPECT_NEAR(sc.a, 1.23607, 1e-5);
  EXPECT_NEAR(sc.collision_bound, 1.61803, 1e-5);
  expect_valid(sc.state);
}

TEST(Prop41, ConditionResidualAcrossParameters) {
  for (double alpha : {0.1, 0.5, 0.9})
    for (double k1 : {0.2, 1.0, 5.0})
      for (double gap : {0.3, 1.0, 4.0}) {
        const auto sc = build_prop41(alpha, k1, gap);
        const auto& a = sc.state.agents;
        // v1^2 - v2^2 = k1 (1 + A0) gap^(1-a) / (2 (1-a))
        const double lhs = a[0].velocity[1] - a[1].velocity[1];
        const double a0 = dot(a[0].velocity, a[1].velocity);
        const double rhs = k1 * (1.0 + a0) * std::pow(gap, 1.0 - alpha) / (2.0 * (1.0 - alpha));
        EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::abs(rhs)) << alpha << " " << k1 << " " << gap;
        EXPECT_EQ(a[0].position[0], a[1].position[0]);
        EXPECT_GT(a[1].position[1], a[0].position[1]);
        EXPECT_GT(a[0].velocity[1], a[1].velocity[1]);
        EXPECT_EQ(std::atan2(a[0].velocity[1], a[0].velocity[0]) + std::atan2(a[1].velocity[1], a[1].velocity[0]),
                  0.0);
      }
}

TEST(Prop41, Preconditions) {
  EXPECT_THROW(build_prop41(1.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(build_prop41(0.0, 1.0, 1.0), DomainError);
  EXPECT_THROW(build_prop41(0.5, 0.0, 1.0), DomainError);
  EXPECT_THROW(build_prop41(0.5, 1.0, -1.0), DomainError);
}

TEST(Prop41, SymmetryPersistsAlongTrajectory) {
  const auto sc = build_prop41(0.5, 1.0, 1.0);
  IntegratorConfig ic;
  ic.t_end = 5.0;
  const auto traj = run(sc.state, params_for(sc.state, 0.5, 1.0), ic, 0.01);
  ASSERT_GT(traj.samples.size(), 10u);
  for (const auto& smp : traj.samples) {
    const auto& a = smp.agents;
    EXPECT_LE(std::abs(a[0].position[0] - a[1].position[0]), 1e-9) << smp.time;
    const double th1 = std::atan2(a[0].velocity[1], a[0].velocity[0]);
    const double th2 = std::atan2(a[1].velocity[1], a[1].velocity[0]);
    EXPECT_LE(std::abs(th1 + th2), 1e-9) << smp.time;
  }
}

TEST(BuildScenario, DispatchesOnKind) {
  ScenarioSpec sp;
  sp.kind = ScenarioKind::prop41;
  sp.gap = 1.0;
  SystemParams p;
  p.alpha = 0.5;
  p.kappa1 = 1.0;
  const SystemState s = build_scenario(sp, p);
  EXPECT_NEAR(s.agents[0].velocity[1], (std::sqrt(5.0) - 1.0) / 2.0, 1e-10);

  sp.kind = ScenarioKind::custom;
  sp.agents = {{{0.0}, {1.0}, 1.0}, {{1.0}, {1.0}, 2.0}};
  EXPECT_EQ(build_scenario(sp, p).agents[1].temperature, 2.0);

  sp.kind = ScenarioKind::example21;
  sp.gap = 3.0;
  EXPECT_EQ(build_scenario(sp, p).agents[1].position[0], 3.0);
}
