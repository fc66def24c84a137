#pragma once

// Fixed-step classical Runge-Kutta reference integrator. Works directly on
// SystemState and shares nothing with the adaptive stepper except the
// public right-hand-side functions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tcs/model.hpp"

namespace tcs {

struct OracleConfig {
  double dt = 1e-5;
  double t_end = 1.0;
  double collision_threshold = 1e-8;

  void validate() const {
    if (!(dt > 0.0) || dt > 1e-3) throw DomainError("oracle dt must lie in (0, 1e-3]");
    if (!(t_end >= 0.0)) throw DomainError("oracle t_end must be >= 0");
  }
};

class OracleCollisionError : public std::runtime_error {
 public:
  explicit OracleCollisionError(std::size_t step)
      : std::runtime_error("oracle: pairwise distance fell below threshold at step " + std::to_string(step)),
        step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

namespace oracle_detail {

struct Deriv {
  std::vector<Vec> dx, dv;
  Vec dt;
};

inline Deriv derivative(const SystemState& s, const SystemParams& p) {
  Deriv d;
  d.dx.reserve(s.size());
  for (const auto& a : s.agents) d.dx.push_back(a.velocity);
  d.dv = velocity_rhs(s, p);
  d.dt = temperature_rhs(s, p);
  return d;
}

// base + h * sum_k w_k * derivs_k
inline SystemState combine(const SystemState& base, double h, std::initializer_list<std::pair<double, const Deriv*>> terms) {
  SystemState out = base;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto& a = out.agents[i];
    for (const auto& [w, d] : terms) {
      for (std::size_t k = 0; k < a.position.size(); ++k) {
        a.position[k] += h * w * d->dx[i][k];
        a.velocity[k] += h * w * d->dv[i][k];
      }
      a.temperature += h * w * d->dt[i];
    }
  }
  return out;
}

// Compensated (Kahan) accumulation of one RK4 increment into positions and
// temperatures; long fixed-step runs otherwise drift by ~steps * ulp.
struct Compensation {
  std::vector<Vec> x;
  Vec t;
  explicit Compensation(const SystemState& s) : x(s.size(), Vec(s.dim(), 0.0)), t(s.size(), 0.0) {}
};

inline void kahan_add(double& sum, double& comp, double incr) {
  const double y = incr - comp;
  const double t = sum + y;
  comp = (t - sum) - y;
  sum = t;
}

inline void rk4_update(SystemState& s, Compensation& c, double h, const Deriv& k1, const Deriv& k2, const Deriv& k3,
                       const Deriv& k4) {
  const double w = h / 6.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto& a = s.agents[i];
    for (std::size_t k = 0; k < a.position.size(); ++k) {
      kahan_add(a.position[k], c.x[i][k], w * (k1.dx[i][k] + 2.0 * k2.dx[i][k] + 2.0 * k3.dx[i][k] + k4.dx[i][k]));
      a.velocity[k] += w * (k1.dv[i][k] + 2.0 * k2.dv[i][k] + 2.0 * k3.dv[i][k] + k4.dv[i][k]);
    }
    kahan_add(a.temperature, c.t[i], w * (k1.dt[i] + 2.0 * k2.dt[i] + 2.0 * k3.dt[i] + k4.dt[i]));
  }
}

inline double min_distance(const SystemState& s) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j)
      m = std::min(m, distance(s.agents[i].position, s.agents[j].position));
  return m;
}

}  // namespace oracle_detail

/// Integrates to cfg.t_end with a fixed step (the last step is shortened to
/// land on t_end), renormalizing velocities after every step.
inline SystemState run_oracle(const SystemState& initial, const SystemParams& params, const OracleConfig& cfg) {
  using namespace oracle_detail;
  params.validate();
  cfg.validate();
  SystemState s = initial;
  Compensation comp(s);
  const double t_end = initial.time + cfg.t_end;
  const auto n_steps = static_cast<std::size_t>(std::ceil(cfg.t_end / cfg.dt - 1e-9));
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double t = initial.time + static_cast<double>(step) * cfg.dt;
    const double h = std::min(cfg.dt, t_end - t);
    if (!(h > 0.0)) break;
    try {
      const Deriv k1 = derivative(s, params);
      const Deriv k2 = derivative(combine(s, 0.5 * h, {{1.0, &k1}}), params);
      const Deriv k3 = derivative(combine(s, 0.5 * h, {{1.0, &k2}}), params);
      const Deriv k4 = derivative(combine(s, h, {{1.0, &k3}}), params);
      rk4_update(s, comp, h, k1, k2, k3, k4);
    } catch (const CollisionError&) {
      throw OracleCollisionError(step + 1);
    }
    for (auto& a : s.agents) {
      const double nv = norm(a.velocity);
      for (double& c : a.velocity) c /= nv;
    }
    s.time = t + h;
    if (min_distance(s) <= cfg.collision_threshold) throw OracleCollisionError(step + 1);
  }
  s.time = t_end;
  return s;
}

}  // namespace tcs
