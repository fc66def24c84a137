#pragma once

// Scalar functionals of a configuration: diameters, the velocity-pair angle
// and temperature aggregates. All extremal searches scan every pair and keep
// the lowest-index pair on ties.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>

#include "tcs/model.hpp"

namespace tcs {

struct Extremum {
  double value = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
};

inline Extremum position_diameter(const SystemState& s) {
  Extremum e{0.0, 0, 0};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double r = distance(s.agents[i].position, s.agents[j].position);
      if (r > e.value) e = {r, i, j};
    }
  return e;
}

inline Extremum velocity_diameter(const SystemState& s) {
  Extremum e{0.0, 0, 0};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double r = distance(s.agents[i].velocity, s.agents[j].velocity);
      if (r > e.value) e = {r, i, j};
    }
  return e;
}

inline double temperature_diameter(const SystemState& s) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& a : s.agents) {
    lo = std::min(lo, a.temperature);
    hi = std::max(hi, a.temperature);
  }
  return s.agents.empty() ? 0.0 : hi - lo;
}

/// min_{i,j} <v_i, v_j>; the diagonal contributes |v_i|^2 = 1, so this is the
/// smallest off-diagonal inner product clamped to 1.
inline Extremum velocity_pair_angle(const SystemState& s) {
  Extremum e{1.0, 0, 0};
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) {
      const double ip = dot(s.agents[i].velocity, s.agents[j].velocity);
      if (ip < e.value) e = {ip, i, j};
    }
  e.value = std::clamp(e.value, -1.0, 1.0);
  return e;
}

inline double max_temperature(const SystemState& s) {
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& a : s.agents) m = std::max(m, a.temperature);
  return m;
}

inline double min_temperature(const SystemState& s) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& a : s.agents) m = std::min(m, a.temperature);
  return m;
}

inline double temperature_sum(const SystemState& s) {
  double sum = 0.0;
  for (const auto& a : s.agents) sum += a.temperature;
  return sum;
}

inline double entropy(const SystemState& s) {
  double sum = 0.0;
  for (const auto& a : s.agents) sum += std::log(a.temperature);
  return sum;
}

/// dS/dt = (k2 / 2N) sum_{i,j} zeta_ij (1/T_i - 1/T_j)^2, summed over i<j
/// (each unordered pair appears twice in the full double sum).
inline double entropy_production(const SystemState& s, const SystemParams& p) {
  const std::size_t n = s.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = distance(s.agents[i].position, s.agents[j].position);
      const double diff = 1.0 / s.agents[i].temperature - 1.0 / s.agents[j].temperature;
      sum += 2.0 * zeta_eval(r, p.zeta) * diff * diff;
    }
  return p.kappa2 * sum / (2.0 * static_cast<double>(n));
}

/// Constants of the initial configuration that enter every sufficient
/// condition: diameters, the velocity-pair angle and the temperature range.
struct InitialConstants {
  double d_x0 = 0.0;
  double d_v0 = 0.0;
  double d_t0 = 0.0;
  double a_v0 = 1.0;
  double t_max = 1.0;
  double t_min = 1.0;
  double min_pair_dist = 0.0;

  bool operator==(const InitialConstants&) const = default;
};

inline InitialConstants initial_constants(const SystemState& s) {
  InitialConstants c;
  c.d_x0 = position_diameter(s).value;
  c.d_v0 = velocity_diameter(s).value;
  c.d_t0 = temperature_diameter(s);
  c.a_v0 = velocity_pair_angle(s).value;
  c.t_max = max_temperature(s);
  c.t_min = min_temperature(s);
  c.min_pair_dist = min_pair_distance(s).distance;
  return c;
}

}  // namespace tcs
