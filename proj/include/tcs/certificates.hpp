#pragma once

// Sufficient conditions for flocking, thermal equilibrium and strict spacing,
// evaluated from initial data.
//
// Notation used below (all taken from the initial state):
//   D0 = D_X(0), DV = D_V(0), A0 = min <v_i, v_j>, TM = max T_i
//   travel(D) = TM * DV / (k1 * A0 * phi(D))   -- bound on int_0^inf D_V
//   Phi(a, b) = int_a^b r^-alpha dr
//
//   bootstrap  : D0 + travel(D) < D                       for some D
//   lyapunov   : DV < (k1 A0 / TM) Phi(D0, inf)
//   spacing #1 : travel(D) < min(max{D - D0, Phi(D0,D)/phi(D)}, gap_k)
//   spacing #2 : alpha > 1 and travel(D) < max{D - D0, Phi(D0,D)/phi(D)}
//
// gap_k is the smallest separation of initial positions along axis k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tcs/functionals.hpp"
#include "tcs/model.hpp"

namespace tcs {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when a checker's hypotheses (A0 > 0, k1 > 0, distinct positions)
/// do not hold.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Theorem { thm31, thm32, thm41_cond1, thm41_cond2 };

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::thm31: return "thm31";
    case Theorem::thm32: return "thm32";
    case Theorem::thm41_cond1: return "thm41_cond1";
    case Theorem::thm41_cond2: return "thm41_cond2";
  }
  return "?";
}

struct FlockingCertificate {
  Theorem theorem = Theorem::thm31;
  bool satisfied = false;
  std::optional<double> d_x_inf;
  double rate_v = 0.0;
  double rate_t = 0.0;
  double margin = -kInf;
  bool spacing_guarantee = false;
  // Set for alpha < 1, where the flocking conclusions hold only along
  // collision-free solutions.
  bool requires_collision_free = false;
  InitialConstants initial;

  // spacing checker details
  std::optional<double> d6_margin;
  std::optional<int> d6_axis;
  std::optional<double> d6_witness;
  std::optional<double> d7_margin;
  std::optional<double> d7_witness;
};

struct SearchConfig {
  double upper_factor = 1e6;  // grid spans [D0, upper_factor * D0]
  double rel_tol = 1e-10;     // bisection tolerance, relative
  int points_per_decade = 200;
};

// ---------------------------------------------------------------------------
// kernel primitive

/// int_a^b r^-alpha dr for 0 < a <= b (b may be +inf).
inline double kernel_primitive(double a, double b, double alpha) {
  if (!(a > 0.0)) throw DomainError("kernel_primitive requires a > 0");
  if (!(alpha > 0.0)) throw DomainError("kernel_primitive requires alpha > 0");
  if (!(b >= a)) throw DomainError("kernel_primitive requires a <= b");
  if (std::isinf(b)) return alpha > 1.0 ? std::pow(a, 1.0 - alpha) / (alpha - 1.0) : kInf;
  if (alpha == 1.0) return std::log(b / a);
  return (std::pow(b, 1.0 - alpha) - std::pow(a, 1.0 - alpha)) / (1.0 - alpha);
}

/// Oriented integral int_a^b for any positive a, b.
inline double signed_kernel_primitive(double a, double b, double alpha) {
  return b >= a ? kernel_primitive(a, b, alpha) : -kernel_primitive(b, a, alpha);
}

/// Smallest b >= a with kernel_primitive(a, b, alpha) == value, or nullopt
/// when value is at or beyond the tail integral.
inline std::optional<double> kernel_primitive_inverse(double a, double value, double alpha) {
  if (!(a > 0.0)) throw DomainError("kernel_primitive_inverse requires a > 0");
  if (!(value >= 0.0)) throw DomainError("kernel_primitive_inverse requires value >= 0");
  if (value == 0.0) return a;
  if (alpha == 1.0) return a * std::exp(value);
  const double base = std::pow(a, 1.0 - alpha) + (1.0 - alpha) * value;
  if (!(base > 0.0)) return std::nullopt;
  const double b = std::pow(base, 1.0 / (1.0 - alpha));
  if (!std::isfinite(b)) return std::nullopt;
  return b;
}

namespace detail {

// lhs < rhs with room for rounding noise.
inline bool strictly_less(double lhs, double rhs) {
  if (std::isinf(rhs) && rhs > 0.0) return std::isfinite(lhs);
  return rhs - lhs > 1e-12 * std::max(std::abs(lhs), std::abs(rhs));
}

inline void require_hypotheses(const InitialConstants& ic, const SystemParams& p) {
  if (!(ic.a_v0 > 0.0)) throw PreconditionError("velocity-pair angle A(v)(0) must be > 0");
  if (!(p.kappa1 > 0.0)) throw PreconditionError("kappa1 must be > 0");
  if (!(p.alpha > 0.0)) throw PreconditionError("alpha must be > 0");
  if (!(ic.min_pair_dist > 0.0)) throw PreconditionError("initial positions must be pairwise distinct");
}

// travel(D) = TM DV / (k1 A0 phi(D))
inline double travel_budget(const InitialConstants& ic, const SystemParams& p, double D) {
  return ic.t_max * ic.d_v0 / (p.kappa1 * ic.a_v0 * phi_eval(D, p.alpha));
}

inline void fill_rates(FlockingCertificate& c, const SystemParams& p, double D) {
  c.d_x_inf = D;
  c.rate_v = p.kappa1 * c.initial.a_v0 * phi_eval(D, p.alpha) / c.initial.t_max;
  c.rate_t = p.kappa2 * zeta_eval(D, p.zeta) / (c.initial.t_max * c.initial.t_max);
}

inline std::vector<double> log_grid(double lo, const SearchConfig& sc) {
  const double decades = std::log10(sc.upper_factor);
  const int n = std::max(2, static_cast<int>(std::ceil(sc.points_per_decade * decades)) + 1);
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) g[static_cast<std::size_t>(k)] = lo * std::pow(sc.upper_factor, double(k) / (n - 1));
  return g;
}

// max{D - D0, Phi(D0, D) / phi(D)}
inline double spacing_reach(const InitialConstants& ic, const SystemParams& p, double D) {
  return std::max(D - ic.d_x0, kernel_primitive(ic.d_x0, D, p.alpha) / phi_eval(D, p.alpha));
}

}  // namespace detail

inline FlockingCertificate check_thm32(const SystemState& initial, const SystemParams& params) {
  FlockingCertificate c;
  c.theorem = Theorem::thm32;
  c.initial = initial_constants(initial);
  detail::require_hypotheses(c.initial, params);
  const auto& ic = c.initial;

  const double gain = params.kappa1 * ic.a_v0 / ic.t_max;
  const double tail = kernel_primitive(ic.d_x0, kInf, params.alpha);
  const double rhs = std::isinf(tail) ? kInf : gain * tail;
  c.margin = std::isinf(rhs) ? kInf : rhs - ic.d_v0;
  c.requires_collision_free = params.alpha < 1.0;
  c.satisfied = detail::strictly_less(ic.d_v0, rhs);
  if (!c.satisfied) return c;

  const auto D = kernel_primitive_inverse(ic.d_x0, ic.d_v0 / gain, params.alpha);
  if (!D) {
    // rounding put the inversion just past the tail
    c.satisfied = false;
    return c;
  }
  detail::fill_rates(c, params, *D);
  return c;
}

inline FlockingCertificate check_thm31(const SystemState& initial, const SystemParams& params,
                                       const SearchConfig& search = {}) {
  FlockingCertificate c;
  c.theorem = Theorem::thm31;
  c.initial = initial_constants(initial);
  detail::require_hypotheses(c.initial, params);
  c.requires_collision_free = params.alpha < 1.0;
  const auto& ic = c.initial;

  auto slack = [&](double D) { return D - ic.d_x0 - detail::travel_budget(ic, params, D); };
  auto holds = [&](double D) { return detail::strictly_less(ic.d_x0 + detail::travel_budget(ic, params, D), D); };

  const auto grid = detail::log_grid(ic.d_x0, search);
  std::optional<std::size_t> first;
  double best = -kInf;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    best = std::max(best, slack(grid[k]));
    if (!first && holds(grid[k])) first = k;
  }
  c.margin = best;
  if (!first) return c;

  double hi = grid[*first];
  double lo = *first > 0 ? grid[*first - 1] : ic.d_x0;
  while (hi - lo > search.rel_tol * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (holds(mid) ? hi : lo) = mid;
  }
  c.satisfied = true;
  detail::fill_rates(c, params, hi);
  return c;
}

inline FlockingCertificate check_thm41(const SystemState& initial, const SystemParams& params,
                                       const SearchConfig& search = {}) {
  FlockingCertificate c;
  c.initial = initial_constants(initial);
  detail::require_hypotheses(c.initial, params);
  const auto& ic = c.initial;
  const std::size_t n = initial.size();
  const std::size_t d = initial.dim();

  std::vector<double> candidates = detail::log_grid(ic.d_x0, search);
  if (auto t31 = check_thm31(initial, params, search); t31.satisfied) candidates.push_back(*t31.d_x_inf);
  if (auto t32 = check_thm32(initial, params); t32.satisfied) candidates.push_back(*t32.d_x_inf);
  std::sort(candidates.begin(), candidates.end());

  std::vector<double> axis_gap(d, kInf);
  for (std::size_t k = 0; k < d; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        axis_gap[k] = std::min(axis_gap[k], std::abs(initial.agents[i].position[k] - initial.agents[j].position[k]));

  // margins are the largest slack seen; witnesses the smallest satisfying D
  double d6_best = -kInf, d7_best = -kInf;
  for (double D : candidates) {
    if (!(D > 0.0) || !std::isfinite(D)) continue;
    const double travel = detail::travel_budget(ic, params, D);
    const double reach = detail::spacing_reach(ic, params, D);
    for (std::size_t k = 0; k < d; ++k) {
      const double cap = std::min(reach, axis_gap[k]);
      d6_best = std::max(d6_best, cap - travel);
      if (!c.d6_witness && detail::strictly_less(travel, cap)) {
        c.d6_witness = D;
        c.d6_axis = static_cast<int>(k);
      }
    }
    if (params.alpha > 1.0) {
      d7_best = std::max(d7_best, reach - travel);
      if (!c.d7_witness && detail::strictly_less(travel, reach)) c.d7_witness = D;
    }
  }
  const bool d6 = c.d6_witness.has_value();
  const bool d7 = c.d7_witness.has_value();
  c.d6_margin = d6_best;
  if (params.alpha > 1.0) c.d7_margin = d7_best;

  c.spacing_guarantee = d6 || d7;
  c.satisfied = c.spacing_guarantee;
  if (d6) {
    c.theorem = Theorem::thm41_cond1;
    c.margin = d6_best;
    detail::fill_rates(c, params, *c.d6_witness);
  } else if (d7) {
    c.theorem = Theorem::thm41_cond2;
    c.margin = d7_best;
    detail::fill_rates(c, params, *c.d7_witness);
  } else {
    c.theorem = (params.alpha > 1.0 && d7_best > d6_best) ? Theorem::thm41_cond2 : Theorem::thm41_cond1;
    c.margin = std::max(d6_best, d7_best);
  }
  return c;
}

}  // namespace tcs
