#pragma once

// Unit-speed thermodynamic Cucker-Smale model: state types, communication
// kernels and the right-hand sides of the velocity/temperature equations.
//
//   dx_i/dt = v_i
//   dv_i/dt = (k1/N) sum_j phi(|x_i-x_j|) (v_j - <v_j,v_i> v_i) / T_j
//   dT_i/dt = (k2/N) sum_j zeta(|x_i-x_j|) (1/T_i - 1/T_j)
//
// phi(r) = r^-alpha is singular at the origin, so every pairwise evaluation
// is gated on strictly positive distance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tcs {

using Vec = std::vector<double>;

/// Raised for arguments outside a function's mathematical domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when two agents share a position inside a pairwise evaluation.
class CollisionError : public std::runtime_error {
 public:
  CollisionError(std::size_t i, std::size_t j)
      : std::runtime_error("agents " + std::to_string(i) + " and " + std::to_string(j) +
                           " occupy the same position"),
        pair_(i, j) {}

  std::pair<std::size_t, std::size_t> pair() const { return pair_; }

 private:
  std::pair<std::size_t, std::size_t> pair_;
};

struct AgentState {
  Vec position;
  Vec velocity;  // unit norm
  double temperature = 1.0;
};

enum class KernelFamily { constant_one, rational_decay, singular_power };

inline const char* to_string(KernelFamily f) {
  switch (f) {
    case KernelFamily::constant_one: return "constant_one";
    case KernelFamily::rational_decay: return "rational_decay";
    case KernelFamily::singular_power: return "singular_power";
  }
  return "?";
}

/// Temperature communication weight zeta.
struct KernelSpec {
  KernelFamily family = KernelFamily::rational_decay;
  double beta = 2.0;

  bool operator==(const KernelSpec&) const = default;
};

struct SystemParams {
  int n_agents = 2;
  int dim = 2;
  double kappa1 = 1.0;
  double kappa2 = 1.0;
  double alpha = 1.0;
  KernelSpec zeta{};

  bool operator==(const SystemParams&) const = default;

  // Zero couplings are accepted: they give the free-streaming control case.
  void validate() const {
    if (n_agents < 2) throw DomainError("n_agents must be >= 2");
    if (dim < 1) throw DomainError("dim must be >= 1");
    if (!(kappa1 >= 0.0) || !std::isfinite(kappa1)) throw DomainError("kappa1 must be >= 0");
    if (!(kappa2 >= 0.0) || !std::isfinite(kappa2)) throw DomainError("kappa2 must be >= 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be > 0");
    if (!(zeta.beta >= 0.0) || !std::isfinite(zeta.beta)) throw DomainError("zeta beta must be >= 0");
  }
};

struct SystemState {
  double time = 0.0;
  std::vector<AgentState> agents;

  std::size_t size() const { return agents.size(); }
  std::size_t dim() const { return agents.empty() ? 0 : agents.front().position.size(); }
};

// ---------------------------------------------------------------------------
// small vector helpers

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    s += d * d;
  }
  return std::sqrt(s);
}

/// v <- v/|v|; returns the magnitude of the correction | |v| - 1 |.
inline double normalize_in_place(std::span<double> v) {
  const double n = norm(v);
  if (!(n > 0.0)) throw DomainError("cannot normalize a zero velocity");
  for (double& c : v) c /= n;
  return std::abs(n - 1.0);
}

// ---------------------------------------------------------------------------
// kernels

inline double phi_eval(double r, double alpha) {
  if (!(r > 0.0)) throw DomainError("phi(r) is singular for r <= 0");
  return std::pow(r, -alpha);
}

inline double zeta_eval(double r, const KernelSpec& spec) {
  switch (spec.family) {
    case KernelFamily::constant_one:
      if (r < 0.0) throw DomainError("zeta(r) requires r >= 0");
      return 1.0;
    case KernelFamily::rational_decay:
      if (r < 0.0) throw DomainError("zeta(r) requires r >= 0");
      return std::pow(1.0 + r * r, -0.5 * spec.beta);
    case KernelFamily::singular_power:
      if (!(r > 0.0)) throw DomainError("singular zeta(r) requires r > 0");
      return std::pow(r, -spec.beta);
  }
  throw DomainError("unknown kernel family");
}

// ---------------------------------------------------------------------------
// right-hand sides

/// Flat view of the model variables: x and v are n*d row-major, t has n
/// entries. The integrators pack their state vectors in this order.
struct FlatView {
  std::size_t n = 0;
  std::size_t d = 0;
  std::span<const double> x;
  std::span<const double> v;
  std::span<const double> t;
};

/// Evaluates dv/dt and dT/dt for a flat state. Pairs are visited once,
/// i<j ascending, so results are bitwise reproducible; the temperature
/// contributions are accumulated antisymmetrically.
inline void evaluate_rhs(const FlatView& s, const SystemParams& p, std::span<double> dv,
                         std::span<double> dt) {
  const std::size_t n = s.n;
  const std::size_t d = s.d;
  std::fill(dv.begin(), dv.end(), 0.0);
  std::fill(dt.begin(), dt.end(), 0.0);

  for (std::size_t i = 0; i < n; ++i) {
    if (!(s.t[i] > 0.0)) throw DomainError("temperature must be positive");
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = s.x.subspan(i * d, d);
    const auto vi = s.v.subspan(i * d, d);
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto xj = s.x.subspan(j * d, d);
      const auto vj = s.v.subspan(j * d, d);
      const double r = distance(xi, xj);
      if (!(r > 0.0)) throw CollisionError(i, j);

      if (p.kappa1 != 0.0) {
        const double w = phi_eval(r, p.alpha);
        const double ip = dot(vi, vj);
        const double wi = w / s.t[j];
        const double wj = w / s.t[i];
        for (std::size_t k = 0; k < d; ++k) {
          dv[i * d + k] += wi * (vj[k] - ip * vi[k]);
          dv[j * d + k] += wj * (vi[k] - ip * vj[k]);
        }
      }
      if (p.kappa2 != 0.0) {
        const double flux = zeta_eval(r, p.zeta) * (1.0 / s.t[i] - 1.0 / s.t[j]);
        dt[i] += flux;
        dt[j] -= flux;
      }
    }
  }

  const double c1 = p.kappa1 / static_cast<double>(n);
  const double c2 = p.kappa2 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto dvi = dv.subspan(i * d, d);
    const auto vi = s.v.subspan(i * d, d);
    for (double& c : dvi) c *= c1;
    // Remove the rounding-level radial component so <dv_i, v_i> = 0.
    const double vv = dot(vi, vi);
    if (vv > 0.0) {
      const double radial = dot(dvi, vi) / vv;
      for (std::size_t k = 0; k < d; ++k) dvi[k] -= radial * vi[k];
    }
    dt[i] *= c2;
  }
}

struct PackedAgents {
  std::size_t n = 0;
  std::size_t d = 0;
  Vec x, v, t;

  explicit PackedAgents(const SystemState& s) : n(s.size()), d(s.dim()) {
    x.reserve(n * d);
    v.reserve(n * d);
    t.reserve(n);
    for (const auto& a : s.agents) {
      if (a.position.size() != d || a.velocity.size() != d)
        throw DomainError("agent vectors must all have the state dimension");
      x.insert(x.end(), a.position.begin(), a.position.end());
      v.insert(v.end(), a.velocity.begin(), a.velocity.end());
      t.push_back(a.temperature);
    }
  }

  FlatView view() const { return {n, d, x, v, t}; }
};

inline std::vector<Vec> velocity_rhs(const SystemState& state, const SystemParams& params) {
  const PackedAgents pk(state);
  Vec dv(pk.n * pk.d), dt(pk.n);
  SystemParams vp = params;
  vp.kappa2 = 0.0;
  evaluate_rhs(pk.view(), vp, dv, dt);
  std::vector<Vec> out(pk.n);
  for (std::size_t i = 0; i < pk.n; ++i)
    out[i].assign(dv.begin() + static_cast<std::ptrdiff_t>(i * pk.d),
                  dv.begin() + static_cast<std::ptrdiff_t>((i + 1) * pk.d));
  return out;
}

inline Vec temperature_rhs(const SystemState& state, const SystemParams& params) {
  const PackedAgents pk(state);
  Vec dv(pk.n * pk.d), dt(pk.n);
  SystemParams tp = params;
  tp.kappa1 = 0.0;
  evaluate_rhs(pk.view(), tp, dv, dt);
  return dt;
}

/// Smallest pairwise distance and the (lowest-index) pair attaining it.
struct PairDistance {
  double distance = 0.0;
  std::size_t i = 0;
  std::size_t j = 0;
};

inline PairDistance min_pair_distance(std::span<const double> x, std::size_t n, std::size_t d) {
  PairDistance best{std::numeric_limits<double>::infinity(), 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = distance(x.subspan(i * d, d), x.subspan(j * d, d));
      if (r < best.distance) best = {r, i, j};
    }
  return best;
}

inline PairDistance min_pair_distance(const SystemState& s) {
  const PackedAgents pk(s);
  return min_pair_distance(pk.x, pk.n, pk.d);
}

}  // namespace tcs
