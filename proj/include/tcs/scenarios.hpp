#pragma once

// Initial-condition builders: seeded random configurations with a velocity
// cap (so every pairwise heading angle is below a quarter turn), the
// head-on collision pair, and the symmetric two-agent construction that
// collides in finite time under a weakly singular kernel.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcs/model.hpp"

namespace tcs {

enum class ScenarioKind { random_cap, example21, prop41, custom };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::random_cap: return "random_cap";
    case ScenarioKind::example21: return "example21";
    case ScenarioKind::prop41: return "prop41";
    case ScenarioKind::custom: return "custom";
  }
  return "?";
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::random_cap;
  std::uint64_t seed = 1;
  int n_agents = 2;
  int dim = 2;
  double velocity_cap_angle = 0.3;  // half-angle, in (0, pi/2)
  double position_box = 1.0;
  double min_initial_gap = 0.05;
  std::pair<double, double> temp_range{1.0, 1.0};
  double gap = 1.0;                  // example21 / prop41 separation
  std::vector<AgentState> agents;    // custom

  bool operator==(const ScenarioSpec& o) const {
    auto same_agents = [&] {
      if (agents.size() != o.agents.size()) return false;
      for (std::size_t i = 0; i < agents.size(); ++i)
        if (agents[i].position != o.agents[i].position || agents[i].velocity != o.agents[i].velocity ||
            agents[i].temperature != o.agents[i].temperature)
          return false;
      return true;
    };
    return kind == o.kind && seed == o.seed && n_agents == o.n_agents && dim == o.dim &&
           velocity_cap_angle == o.velocity_cap_angle && position_box == o.position_box &&
           min_initial_gap == o.min_initial_gap && temp_range == o.temp_range && gap == o.gap &&
           same_agents();
  }
};

/// Raised when rejection sampling cannot place the agents.
class InfeasibleSpec : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxPlacementAttempts = 100000;

namespace detail {

inline Vec random_unit(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec u(d);
  double n = 0.0;
  do {
    for (double& c : u) c = normal(rng);
    n = norm(u);
  } while (!(n > 1e-12));
  for (double& c : u) c /= n;
  return u;
}

// Uniform direction inside the cap of half-angle `cap` about `axis`: the
// polar angle has density proportional to sin^(d-2), sampled by rejection.
inline Vec sample_cap(std::mt19937_64& rng, const Vec& axis, double cap) {
  const std::size_t d = axis.size();
  if (d == 1 || cap == 0.0) return axis;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double theta = 0.0;
  if (d == 2) {
    // signed angle in the plane
    theta = cap * (2.0 * unif(rng) - 1.0);
    Vec v{std::cos(theta) * axis[0] - std::sin(theta) * axis[1],
          std::sin(theta) * axis[0] + std::cos(theta) * axis[1]};
    normalize_in_place(v);
    return v;
  }
  const double smax = std::sin(cap);
  while (true) {
    theta = cap * unif(rng);
    if (unif(rng) <= std::pow(std::sin(theta) / smax, static_cast<double>(d - 2))) break;
  }
  // unit direction orthogonal to the axis
  Vec w;
  while (true) {
    w = random_unit(rng, d);
    const double ip = dot(w, axis);
    for (std::size_t k = 0; k < d; ++k) w[k] -= ip * axis[k];
    const double n = norm(w);
    if (n > 1e-6) {
      for (double& c : w) c /= n;
      break;
    }
  }
  Vec v(d);
  for (std::size_t k = 0; k < d; ++k) v[k] = std::cos(theta) * axis[k] + std::sin(theta) * w[k];
  normalize_in_place(v);
  return v;
}

}  // namespace detail

inline SystemState build_random(const ScenarioSpec& spec) {
  if (spec.n_agents < 2) throw DomainError("n_agents must be >= 2");
  if (spec.dim < 1) throw DomainError("dim must be >= 1");
  if (!(spec.velocity_cap_angle >= 0.0 && spec.velocity_cap_angle < std::numbers::pi / 4))
    throw DomainError("velocity_cap_angle must lie in [0, pi/4) so that cos(2 cap) > 0");
  if (!(spec.position_box > 0.0)) throw DomainError("position_box must be > 0");
  if (!(spec.min_initial_gap > 0.0)) throw DomainError("min_initial_gap must be > 0");
  if (!(spec.temp_range.first > 0.0 && spec.temp_range.second >= spec.temp_range.first))
    throw DomainError("temp_range must satisfy 0 < lo <= hi");

  const auto n = static_cast<std::size_t>(spec.n_agents);
  const auto d = static_cast<std::size_t>(spec.dim);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> box(0.0, spec.position_box);

  SystemState s;
  s.agents.resize(n);
  int attempts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Vec x(d);
    while (true) {
      if (++attempts > kMaxPlacementAttempts)
        throw InfeasibleSpec("could not place agents with the requested min_initial_gap");
      for (double& c : x) c = box(rng);
      bool ok = true;
      for (std::size_t j = 0; j < i && ok; ++j) ok = distance(x, s.agents[j].position) >= spec.min_initial_gap;
      if (ok) break;
    }
    s.agents[i].position = std::move(x);
  }

  const Vec axis = detail::random_unit(rng, d);
  for (auto& a : s.agents) a.velocity = detail::sample_cap(rng, axis, spec.velocity_cap_angle);

  std::uniform_real_distribution<double> temp(spec.temp_range.first, spec.temp_range.second);
  for (auto& a : s.agents)
    a.temperature = spec.temp_range.first == spec.temp_range.second ? spec.temp_range.first : temp(rng);
  return s;
}

/// Two agents on a line heading straight at each other, embedded in d = 2.
inline SystemState build_example21(double gap) {
  if (!(gap > 0.0)) throw DomainError("gap must be > 0");
  SystemState s;
  s.agents = {AgentState{{0.0, 0.0}, {1.0, 0.0}, 1.0}, AgentState{{gap, 0.0}, {-1.0, 0.0}, 1.0}};
  return s;
}

struct Prop41Scenario {
  SystemState state;
  double theta = 0.0;             // v1 = (cos t, sin t), v2 = (cos t, -sin t)
  double collision_bound = 0.0;   // gap^alpha / (a alpha)
  double a = 0.0;                 // k1 (1 + cos 2t) / (2 (1 - alpha))
};

/// Symmetric two-agent data x1 = (0,0), x2 = (0,gap) with headings +-theta,
/// where theta solves 2 sin(t)/cos(t)^2 = k1 gap^(1-alpha)/(1-alpha).
inline Prop41Scenario build_prop41(double alpha, double kappa1, double gap) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("prop41 requires 0 < alpha < 1");
  if (!(kappa1 > 0.0)) throw DomainError("prop41 requires kappa1 > 0");
  if (!(gap > 0.0)) throw DomainError("gap must be > 0");

  const double target = kappa1 * std::pow(gap, 1.0 - alpha) / (1.0 - alpha);
  auto f = [&](double t) { return 2.0 * std::sin(t) / (std::cos(t) * std::cos(t)) - target; };
  double lo = 0.0;
  double hi = std::numbers::pi / 2;
  // f(lo) < 0 and f -> +inf at pi/2; bisect to machine resolution
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  const double theta = 0.5 * (lo + hi);
  if (!(theta > 0.0 && theta < std::numbers::pi / 2) || !std::isfinite(f(theta)))
    throw InfeasibleSpec("prop41 angle bisection failed");

  Prop41Scenario out;
  out.theta = theta;
  const double c = std::cos(theta), sn = std::sin(theta);
  out.state.agents = {AgentState{{0.0, 0.0}, {c, sn}, 1.0}, AgentState{{0.0, gap}, {c, -sn}, 1.0}};
  out.a = kappa1 * (1.0 + std::cos(2.0 * theta)) / (2.0 * (1.0 - alpha));
  out.collision_bound = std::pow(gap, alpha) / (out.a * alpha);
  return out;
}

/// Builds the initial state for any scenario kind. `params` supplies alpha
/// and kappa1 for prop41.
inline SystemState build_scenario(const ScenarioSpec& spec, const SystemParams& params) {
  switch (spec.kind) {
    case ScenarioKind::random_cap: return build_random(spec);
    case ScenarioKind::example21: return build_example21(spec.gap);
    case ScenarioKind::prop41: return build_prop41(params.alpha, params.kappa1, spec.gap).state;
    case ScenarioKind::custom: {
      SystemState s;
      s.agents = spec.agents;
      return s;
    }
  }
  throw DomainError("unknown scenario kind");
}

}  // namespace tcs
