#pragma once

#include <cmath>
#include <random>
#include <string>

#include "tcs/model.hpp"

namespace tcs_test {

inline std::string source_path(const std::string& rel) { return std::string(TCS_SOURCE_DIR) + "/" + rel; }

// Random state with arbitrary unit headings and temperatures in [0.5, 3].
inline tcs::SystemState random_state(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  tcs::SystemState s;
  s.agents.resize(n);
  for (auto& a : s.agents) {
    a.position.resize(d);
    a.velocity.resize(d);
    for (double& x : a.position) x = 4.0 * u(rng) - 2.0;
    double nv = 0.0;
    do {
      for (double& v : a.velocity) v = g(rng);
      nv = tcs::norm(a.velocity);
    } while (nv < 1e-6);
    for (double& v : a.velocity) v /= nv;
    a.temperature = 0.5 + 2.5 * u(rng);
  }
  return s;
}

inline tcs::SystemParams params_for(const tcs::SystemState& s, double alpha = 1.5, double k1 = 1.0,
                                    double k2 = 1.0) {
  tcs::SystemParams p;
  p.n_agents = static_cast<int>(s.size());
  p.dim = static_cast<int>(s.dim());
  p.alpha = alpha;
  p.kappa1 = k1;
  p.kappa2 = k2;
  return p;
}

// Two agents at distance 1 on the x-axis with headings 60 degrees apart.
inline tcs::SystemState sixty_degree_pair(double t1 = 1.0, double t2 = 1.0) {
  tcs::SystemState s;
  s.agents = {{{0.0, 0.0}, {1.0, 0.0}, t1}, {{1.0, 0.0}, {0.5, std::sqrt(3.0) / 2.0}, t2}};
  return s;
}

}  // namespace tcs_test
