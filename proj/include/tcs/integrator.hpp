#pragma once

// Adaptive integration of the unit-speed model.
//
// Dormand-Prince 5(4) with PI step-size control and its 4th-order continuous
// extension. After every accepted step each velocity is projected back onto
// the unit sphere. The step size is additionally capped so that no pairwise
// distance can shrink by more than half within a step, which keeps the
// singular kernel resolvable without regularizing it. Collisions are declared
// at a small positive distance threshold and localized by bisection on the
// dense output.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "tcs/model.hpp"

namespace tcs {

struct IntegratorConfig {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double dt_init = 1e-3;
  double dt_max = 0.1;
  double collision_threshold = 1e-8;
  double event_time_tol = 1e-10;
  double t_end = 1.0;

  bool operator==(const IntegratorConfig&) const = default;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string(name) + " must be > 0");
    };
    positive(rel_tol, "rel_tol");
    positive(abs_tol, "abs_tol");
    positive(dt_init, "dt_init");
    positive(dt_max, "dt_max");
    positive(collision_threshold, "collision_threshold");
    positive(event_time_tol, "event_time_tol");
    if (!(t_end >= 0.0) || !std::isfinite(t_end)) throw DomainError("t_end must be >= 0");
  }
};

struct CollisionEvent {
  double time = 0.0;
  std::pair<std::size_t, std::size_t> pair{0, 0};
  double min_distance_at_event = 0.0;
};

/// Raised when the step size underflows.
class StepFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMinStep = 1e-15;

// ---------------------------------------------------------------------------
// packed state: [x (n*d) | v (n*d) | T (n)]

struct Layout {
  std::size_t n = 0;
  std::size_t d = 0;

  std::size_t size() const { return 2 * n * d + n; }
  std::size_t v_offset() const { return n * d; }
  std::size_t t_offset() const { return 2 * n * d; }

  FlatView view(std::span<const double> y) const {
    return {n, d, y.subspan(0, n * d), y.subspan(v_offset(), n * d), y.subspan(t_offset(), n)};
  }
};

inline Vec pack(const SystemState& s) {
  const std::size_t n = s.size();
  const std::size_t d = s.dim();
  Vec y(2 * n * d + n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = s.agents[i];
    if (a.position.size() != d || a.velocity.size() != d)
      throw DomainError("agent vectors must all have the state dimension");
    std::copy(a.position.begin(), a.position.end(), y.begin() + static_cast<std::ptrdiff_t>(i * d));
    std::copy(a.velocity.begin(), a.velocity.end(),
              y.begin() + static_cast<std::ptrdiff_t>(n * d + i * d));
    y[2 * n * d + i] = a.temperature;
  }
  return y;
}

inline SystemState unpack(std::span<const double> y, const Layout& L, double time) {
  SystemState s;
  s.time = time;
  s.agents.resize(L.n);
  for (std::size_t i = 0; i < L.n; ++i) {
    auto& a = s.agents[i];
    a.position.assign(y.begin() + static_cast<std::ptrdiff_t>(i * L.d),
                      y.begin() + static_cast<std::ptrdiff_t>((i + 1) * L.d));
    a.velocity.assign(y.begin() + static_cast<std::ptrdiff_t>(L.v_offset() + i * L.d),
                      y.begin() + static_cast<std::ptrdiff_t>(L.v_offset() + (i + 1) * L.d));
    a.temperature = y[L.t_offset() + i];
  }
  return s;
}

/// Full packed derivative f(y).
inline void packed_rhs(const Layout& L, const SystemParams& p, std::span<const double> y,
                       std::span<double> f) {
  const std::size_t nd = L.n * L.d;
  std::copy(y.begin() + static_cast<std::ptrdiff_t>(L.v_offset()),
            y.begin() + static_cast<std::ptrdiff_t>(L.v_offset() + nd), f.begin());
  evaluate_rhs(L.view(y), p, f.subspan(L.v_offset(), nd), f.subspan(L.t_offset(), L.n));
}

/// Projects every velocity block onto the unit sphere; returns the largest
/// pre-projection deviation | |v| - 1 |.
inline double project_velocities(const Layout& L, std::span<double> y) {
  double worst = 0.0;
  for (std::size_t i = 0; i < L.n; ++i)
    worst = std::max(worst, normalize_in_place(y.subspan(L.v_offset() + i * L.d, L.d)));
  return worst;
}

inline double max_speed_deviation(const Layout& L, std::span<const double> y) {
  double worst = 0.0;
  for (std::size_t i = 0; i < L.n; ++i)
    worst = std::max(worst, std::abs(norm(y.subspan(L.v_offset() + i * L.d, L.d)) - 1.0));
  return worst;
}

/// Largest dt for which straight-line motion at the current relative
/// velocities changes no pairwise distance by more than `fraction`.
inline double distance_change_cap(const Layout& L, std::span<const double> y, double fraction = 0.5) {
  double cap = std::numeric_limits<double>::infinity();
  const auto x = y.subspan(0, L.n * L.d);
  const auto v = y.subspan(L.v_offset(), L.n * L.d);
  for (std::size_t i = 0; i < L.n; ++i)
    for (std::size_t j = i + 1; j < L.n; ++j) {
      const double rel = distance(v.subspan(i * L.d, L.d), v.subspan(j * L.d, L.d));
      if (rel > 0.0) {
        const double r = distance(x.subspan(i * L.d, L.d), x.subspan(j * L.d, L.d));
        cap = std::min(cap, fraction * r / rel);
      }
    }
  return cap;
}

// ---------------------------------------------------------------------------
// Dormand-Prince tableau

namespace dopri {
inline constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
inline constexpr double a21 = 1.0 / 5;
inline constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
inline constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
inline constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
inline constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
inline constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                        a75 = -2187.0 / 6784, a76 = 11.0 / 84;
inline constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// continuous extension
inline constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                        d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                        d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
}  // namespace dopri

/// Interpolant over one accepted step [t0, t0+h]. Velocities returned by
/// `state_at` are projected onto the unit sphere.
class DenseSegment {
 public:
  DenseSegment() = default;
  DenseSegment(Layout L, double t0, double h, std::array<Vec, 5> coeffs)
      : layout_(L), t0_(t0), h_(h), r_(std::move(coeffs)) {}

  double t0() const { return t0_; }
  double t1() const { return t0_ + h_; }
  const Layout& layout() const { return layout_; }

  Vec packed_at(double t) const {
    const double th = h_ > 0.0 ? (t - t0_) / h_ : 0.0;
    const double th1 = 1.0 - th;
    Vec y(r_[0].size());
    for (std::size_t k = 0; k < y.size(); ++k)
      y[k] = r_[0][k] + th * (r_[1][k] + th1 * (r_[2][k] + th * (r_[3][k] + th1 * r_[4][k])));
    return y;
  }

  Vec projected_at(double t) const {
    Vec y = packed_at(t);
    project_velocities(layout_, y);
    return y;
  }

  SystemState state_at(double t) const { return unpack(projected_at(t), layout_, t); }

  PairDistance min_distance_at(double t) const {
    const Vec y = packed_at(t);
    return min_pair_distance(std::span<const double>(y).subspan(0, layout_.n * layout_.d), layout_.n,
                             layout_.d);
  }

 private:
  Layout layout_{};
  double t0_ = 0.0;
  double h_ = 0.0;
  std::array<Vec, 5> r_{};
};

/// PI controller memory carried between steps.
struct StepControl {
  double err_old = 1e-4;
};

struct StepStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  double max_pre_projection_drift = 0.0;
  double max_post_projection_deviation = 0.0;
  double max_projection_correction = 0.0;
};

/// Outcome of one call to `Stepper::step`.
struct StepResult {
  enum class Kind { accepted, collision_bracket, failure } kind = Kind::accepted;
  double t_new = 0.0;
  double dt_used = 0.0;
  double dt_next = 0.0;
  double pre_projection_drift = 0.0;  // | |v|-1 | before projection
  double post_projection_deviation = 0.0;
  DenseSegment segment;  // valid for accepted and collision_bracket
  std::string message;   // failure reason
};

/// Single-trajectory stepper. Owns the packed state, the FSAL derivative and
/// the controller memory; strictly sequential.
class Stepper {
 public:
  Stepper(const SystemState& initial, const SystemParams& params, const IntegratorConfig& cfg)
      : params_(params), cfg_(cfg), layout_{initial.size(), initial.dim()}, t_(initial.time),
        y_(pack(initial)), k1_(layout_.size()) {
    packed_rhs(layout_, params_, y_, k1_);
  }

  double time() const { return t_; }
  std::span<const double> packed() const { return y_; }
  SystemState state() const { return unpack(y_, layout_, t_); }
  const Layout& layout() const { return layout_; }
  const StepStats& stats() const { return stats_; }

  /// Largest step the singularity guard allows from the current state.
  double guard_cap() const { return distance_change_cap(layout_, y_); }

  /// Attempts steps starting from dt_try, shrinking on rejection, until one
  /// is accepted or the step size underflows. An accepted step that brings a
  /// pair within the collision threshold is reported as a bracket and the
  /// internal state is left at the start of that step.
  StepResult step(double dt_try) {
    using dopri::e1, dopri::e3, dopri::e4, dopri::e5, dopri::e6, dopri::e7;
    const std::size_t m = layout_.size();
    double h = std::min({dt_try, cfg_.dt_max, guard_cap()});

    while (true) {
      if (!(h >= kMinStep)) {
        StepResult r;
        r.kind = StepResult::Kind::failure;
        r.message = "step size underflow at t=" + std::to_string(t_);
        return r;
      }

      bool stage_ok = true;
      try {
        stages(h);
      } catch (const CollisionError&) {
        stage_ok = false;
      } catch (const DomainError&) {
        stage_ok = false;
      }

      double err = std::numeric_limits<double>::infinity();
      if (stage_ok) {
        err = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
          const double ek =
              h * (e1 * k1_[k] + e3 * k3_[k] + e4 * k4_[k] + e5 * k5_[k] + e6 * k6_[k] + e7 * k7_[k]);
          const double sc = cfg_.abs_tol + cfg_.rel_tol * std::max(std::abs(y_[k]), std::abs(ynew_[k]));
          err = std::max(err, std::abs(ek) / sc);
        }
      }

      if (stage_ok && err <= 1.0) {
        // PI controller (Hairer-Wanner constants)
        constexpr double beta = 0.04;
        constexpr double expo1 = 0.2 - beta * 0.75;
        const double e = std::max(err, 1e-10);
        double fac = std::pow(e, expo1) / std::pow(control_.err_old, beta) / 0.9;
        fac = std::clamp(fac, 0.1, 5.0);
        control_.err_old = std::max(err, 1e-4);
        // an exactly zero error estimate (equilibrium coupling) carries no
        // step-size information, so go straight to the cap
        double h_next = err == 0.0 ? cfg_.dt_max : h / fac;

        StepResult r;
        r.dt_used = h;
        r.t_new = t_ + h;
        r.segment = make_segment(h);

        const PairDistance md = min_pair_distance(
            std::span<const double>(ynew_).subspan(0, layout_.n * layout_.d), layout_.n, layout_.d);
        if (md.distance <= cfg_.collision_threshold) {
          r.kind = StepResult::Kind::collision_bracket;
          return r;
        }

        r.pre_projection_drift = project_velocities(layout_, ynew_);
        r.post_projection_deviation = max_speed_deviation(layout_, ynew_);
        stats_.max_pre_projection_drift = std::max(stats_.max_pre_projection_drift, r.pre_projection_drift);
        stats_.max_post_projection_deviation =
            std::max(stats_.max_post_projection_deviation, r.post_projection_deviation);
        stats_.max_projection_correction = std::max(stats_.max_projection_correction, r.pre_projection_drift);
        ++stats_.accepted;

        t_ = r.t_new;
        y_.swap(ynew_);
        packed_rhs(layout_, params_, y_, k1_);

        h_next = std::min({h_next, cfg_.dt_max, guard_cap()});
        r.dt_next = h_next;
        r.kind = StepResult::Kind::accepted;
        return r;
      }

      ++stats_.rejected;
      if (stage_ok) {
        h /= std::clamp(std::pow(err, 0.2 - 0.04 * 0.75) / 0.9, 1.0, 5.0);
      } else {
        h *= 0.5;
      }
    }
  }

 private:
  void stages(double h) {
    using namespace dopri;
    const std::size_t m = layout_.size();
    auto ensure = [m](Vec& v) { v.resize(m); };
    for (Vec* v : {&k2_, &k3_, &k4_, &k5_, &k6_, &k7_, &ytmp_, &ynew_}) ensure(*v);

    for (std::size_t k = 0; k < m; ++k) ytmp_[k] = y_[k] + h * a21 * k1_[k];
    packed_rhs(layout_, params_, ytmp_, k2_);
    for (std::size_t k = 0; k < m; ++k) ytmp_[k] = y_[k] + h * (a31 * k1_[k] + a32 * k2_[k]);
    packed_rhs(layout_, params_, ytmp_, k3_);
    for (std::size_t k = 0; k < m; ++k)
      ytmp_[k] = y_[k] + h * (a41 * k1_[k] + a42 * k2_[k] + a43 * k3_[k]);
    packed_rhs(layout_, params_, ytmp_, k4_);
    for (std::size_t k = 0; k < m; ++k)
      ytmp_[k] = y_[k] + h * (a51 * k1_[k] + a52 * k2_[k] + a53 * k3_[k] + a54 * k4_[k]);
    packed_rhs(layout_, params_, ytmp_, k5_);
    for (std::size_t k = 0; k < m; ++k)
      ytmp_[k] = y_[k] + h * (a61 * k1_[k] + a62 * k2_[k] + a63 * k3_[k] + a64 * k4_[k] + a65 * k5_[k]);
    packed_rhs(layout_, params_, ytmp_, k6_);
    for (std::size_t k = 0; k < m; ++k)
      ynew_[k] = y_[k] + h * (a71 * k1_[k] + a73 * k3_[k] + a74 * k4_[k] + a75 * k5_[k] + a76 * k6_[k]);
    packed_rhs(layout_, params_, ynew_, k7_);
  }

  DenseSegment make_segment(double h) const {
    using namespace dopri;
    const std::size_t m = layout_.size();
    std::array<Vec, 5> r;
    for (auto& v : r) v.resize(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double ydiff = ynew_[k] - y_[k];
      const double bspl = h * k1_[k] - ydiff;
      r[0][k] = y_[k];
      r[1][k] = ydiff;
      r[2][k] = bspl;
      r[3][k] = ydiff - h * k7_[k] - bspl;
      r[4][k] = h * (d1 * k1_[k] + d3 * k3_[k] + d4 * k4_[k] + d5 * k5_[k] + d6 * k6_[k] + d7 * k7_[k]);
    }
    return DenseSegment(layout_, t_, h, std::move(r));
  }

  SystemParams params_;
  IntegratorConfig cfg_;
  Layout layout_;
  double t_ = 0.0;
  Vec y_, k1_, k2_, k3_, k4_, k5_, k6_, k7_, ytmp_, ynew_;
  StepControl control_;
  StepStats stats_;
};

/// Localizes the first threshold crossing inside [seg.t0(), seg.t1()].
/// The segment start must be above the threshold and its end at or below it.
inline CollisionEvent locate_collision(const DenseSegment& seg, const IntegratorConfig& cfg) {
  const double thr = cfg.collision_threshold;
  double lo = seg.t0();
  double hi = seg.t1();
  if (!(hi > lo) || seg.min_distance_at(lo).distance <= thr || seg.min_distance_at(hi).distance > thr)
    throw std::logic_error("locate_collision: invalid bracket");

  // Coarse scan picks the earliest sub-bracket in case the minimum distance
  // dips below the threshold more than once inside the step.
  constexpr int kScan = 16;
  for (int s = 1; s <= kScan; ++s) {
    const double t = seg.t0() + (seg.t1() - seg.t0()) * s / kScan;
    if (s == kScan || seg.min_distance_at(t).distance <= thr) {
      hi = (s == kScan) ? seg.t1() : t;
      lo = seg.t0() + (seg.t1() - seg.t0()) * (s - 1) / kScan;
      break;
    }
  }
  while (hi - lo > cfg.event_time_tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (seg.min_distance_at(mid).distance <= thr)
      hi = mid;
    else
      lo = mid;
  }
  const PairDistance md = seg.min_distance_at(hi);
  return {hi, {md.i, md.j}, md.distance};
}

struct Termination {
  enum class Kind { reached_t_end, collision, step_failure } kind = Kind::reached_t_end;
  std::optional<CollisionEvent> event;
  std::string message;
};

inline const char* to_string(Termination::Kind k) {
  switch (k) {
    case Termination::Kind::reached_t_end: return "reached_t_end";
    case Termination::Kind::collision: return "collision";
    case Termination::Kind::step_failure: return "step_failure";
  }
  return "?";
}

struct Trajectory {
  std::vector<SystemState> samples;
  Termination termination;
  StepStats stats;
  double output_dt = 0.0;
};

/// Integrates to cfg.t_end or the first collision, sampling every output_dt
/// (plus t_end itself when it is not a multiple of output_dt).
inline Trajectory run(const SystemState& initial, const SystemParams& params,
                      const IntegratorConfig& cfg, double output_dt) {
  params.validate();
  cfg.validate();
  if (!(output_dt > 0.0)) throw DomainError("output_dt must be > 0");
  if (initial.size() != static_cast<std::size_t>(params.n_agents) ||
      initial.dim() != static_cast<std::size_t>(params.dim))
    throw DomainError("initial state does not match n_agents/dim");
  for (const auto& a : initial.agents) {
    if (!(a.temperature > 0.0)) throw DomainError("temperature must be positive");
    if (std::abs(norm(a.velocity) - 1.0) > 1e-12) throw DomainError("velocities must have unit norm");
  }
  const PairDistance md0 = min_pair_distance(initial);
  if (!(cfg.collision_threshold < md0.distance))
    throw DomainError("collision_threshold must be below the initial minimum pairwise distance");

  Trajectory traj;
  traj.output_dt = output_dt;
  const double t0 = initial.time;
  const double t_end = t0 + cfg.t_end;
  traj.samples.push_back(initial);
  if (cfg.t_end == 0.0) return traj;

  Stepper stepper(initial, params, cfg);
  std::size_t next_k = 1;
  auto sample_time = [&](std::size_t k) { return t0 + static_cast<double>(k) * output_dt; };
  // Treat t_end as landing on the grid when within rounding of a multiple.
  const double grid_eps = 1e-12 * std::max(1.0, cfg.t_end);

  double dt = cfg.dt_init;
  while (stepper.time() < t_end) {
    const double remaining = t_end - stepper.time();
    double dt_try = std::min(dt, remaining);
    const bool last = dt_try >= remaining;
    StepResult r = stepper.step(dt_try);

    if (r.kind == StepResult::Kind::failure) {
      traj.termination = {Termination::Kind::step_failure, std::nullopt, r.message};
      break;
    }
    if (r.kind == StepResult::Kind::collision_bracket) {
      const CollisionEvent ev = locate_collision(r.segment, cfg);
      while (sample_time(next_k) < ev.time) traj.samples.push_back(r.segment.state_at(sample_time(next_k++)));
      traj.termination = {Termination::Kind::collision, ev, {}};
      break;
    }

    const bool reached = last && r.dt_used >= remaining;
    const double t_new = reached ? t_end : r.t_new;
    while (sample_time(next_k) <= t_new + (reached ? grid_eps : 0.0)) {
      const double ts = std::min(sample_time(next_k), t_new);
      traj.samples.push_back(r.segment.state_at(ts));
      ++next_k;
    }
    if (reached) {
      if (traj.samples.back().time < t_end - grid_eps) {
        SystemState s = stepper.state();
        s.time = t_end;
        traj.samples.push_back(std::move(s));
      }
      break;
    }
    dt = r.dt_next;
  }
  traj.stats = stepper.stats();
  return traj;
}

}  // namespace tcs
