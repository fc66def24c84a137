#pragma once

// Per-sample diagnostics and sample-level checks of the monotonicity,
// conservation and decay properties the model is known to satisfy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tcs/certificates.hpp"
#include "tcs/functionals.hpp"
#include "tcs/integrator.hpp"
#include "tcs/model.hpp"

namespace tcs {

struct DiagnosticsFrame {
  double time = 0.0;
  double d_x = 0.0;
  double d_v = 0.0;
  double d_t = 0.0;
  double a_v = 1.0;
  double entropy = 0.0;
  double temp_sum = 0.0;
  double temp_min = 0.0;
  double temp_max = 0.0;
  double min_pair_dist = 0.0;
  double entropy_production = 0.0;
  std::optional<double> lyap_plus;
  std::optional<double> lyap_minus;

  bool operator==(const DiagnosticsFrame&) const = default;
};

/// The Lyapunov pair L± = D_V ± (k1 A0 / TM) Phi(D_X) uses the constants
/// frozen in the certificate, with Phi anchored at D_X(0).
inline DiagnosticsFrame compute_frame(const SystemState& s, const SystemParams& p,
                                      const FlockingCertificate* certificate = nullptr) {
  DiagnosticsFrame f;
  f.time = s.time;
  f.d_x = position_diameter(s).value;
  f.d_v = velocity_diameter(s).value;
  f.d_t = temperature_diameter(s);
  f.a_v = velocity_pair_angle(s).value;
  f.entropy = entropy(s);
  f.temp_sum = temperature_sum(s);
  f.temp_min = min_temperature(s);
  f.temp_max = max_temperature(s);
  f.min_pair_dist = min_pair_distance(s).distance;
  f.entropy_production = entropy_production(s, p);
  if (certificate != nullptr) {
    const auto& ic = certificate->initial;
    const double gain = p.kappa1 * ic.a_v0 / ic.t_max;
    const double phi_int = signed_kernel_primitive(ic.d_x0, f.d_x, p.alpha);
    f.lyap_plus = f.d_v + gain * phi_int;
    f.lyap_minus = f.d_v - gain * phi_int;
  }
  return f;
}

inline std::vector<DiagnosticsFrame> compute_frames(const Trajectory& traj, const SystemParams& p,
                                                    const FlockingCertificate* certificate = nullptr) {
  std::vector<DiagnosticsFrame> out;
  out.reserve(traj.samples.size());
  for (const auto& s : traj.samples) out.push_back(compute_frame(s, p, certificate));
  return out;
}

/// Result of one named sample-level check.
struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string n) : name(std::move(n)) {}

  std::string name;
  bool applicable = true;
  bool passed = true;
  std::optional<std::size_t> first_violation;  // sample index
  double worst = 0.0;                          // largest violation amount (or mismatch)
};

struct CheckReport {
  std::vector<CheckResult> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
  const CheckResult* find(const std::string& name) const {
    for (const auto& c : checks)
      if (c.name == name) return &c;
    return nullptr;
  }
};

inline constexpr double kMonotoneTol = 1e-9;

namespace detail {

// sign=+1: nondecreasing, sign=-1: nonincreasing; per-consecutive-pair tol.
template <class Get>
CheckResult monotone_check(const std::string& name, const std::vector<DiagnosticsFrame>& fr, Get get,
                           int sign, double tol) {
  CheckResult r{name};
  for (std::size_t k = 1; k < fr.size(); ++k) {
    const double drop = -sign * (get(fr[k]) - get(fr[k - 1]));
    if (drop > tol) {
      if (!r.first_violation) r.first_violation = k;
      r.passed = false;
    }
    r.worst = std::max(r.worst, drop);
  }
  return r;
}

}  // namespace detail

inline CheckReport check_monotonicity(const std::vector<DiagnosticsFrame>& frames) {
  CheckReport rep;
  if (frames.empty()) return rep;
  rep.checks.push_back(detail::monotone_check(
      "entropy_nondecreasing", frames, [](const auto& f) { return f.entropy; }, +1, kMonotoneTol));
  rep.checks.push_back(detail::monotone_check(
      "temp_max_nonincreasing", frames, [](const auto& f) { return f.temp_max; }, -1, kMonotoneTol));
  rep.checks.push_back(detail::monotone_check(
      "temp_min_nondecreasing", frames, [](const auto& f) { return f.temp_min; }, +1, kMonotoneTol));

  CheckResult sum{"temp_sum_constant"};
  for (std::size_t k = 1; k < frames.size(); ++k) {
    const double dev = std::abs(frames[k].temp_sum - frames[0].temp_sum);
    if (dev > kMonotoneTol && !sum.first_violation) {
      sum.first_violation = k;
      sum.passed = false;
    }
    sum.worst = std::max(sum.worst, dev);
  }
  rep.checks.push_back(sum);

  if (frames[0].a_v > 0.0) {
    rep.checks.push_back(detail::monotone_check(
        "a_v_nondecreasing", frames, [](const auto& f) { return f.a_v; }, +1, kMonotoneTol));
  } else {
    CheckResult na("a_v_nondecreasing");
    na.applicable = false;
    rep.checks.push_back(na);
  }
  return rep;
}

/// Compares the central finite-difference slope of the sampled entropy with
/// the closed-form production rate at interior samples. The tolerance is
/// max(1e-6, 5 dt^2 scale) with scale = max(1, max production).
struct EntropyRateReport {
  CheckResult check{"entropy_rate"};
  double max_mismatch = 0.0;
  double tolerance = 0.0;
  double slope_at_start = 0.0;  // one-sided second-order slope at sample 0
};

inline EntropyRateReport check_entropy_rate(const std::vector<DiagnosticsFrame>& frames,
                                            const Trajectory& traj) {
  EntropyRateReport rep;
  const double h = traj.output_dt;
  double scale = 1.0;
  for (const auto& f : frames) scale = std::max(scale, f.entropy_production);
  rep.tolerance = std::max(1e-6, 5.0 * h * h * scale);
  if (frames.size() < 3 || !(h > 0.0)) {
    rep.check.applicable = false;
    return rep;
  }
  rep.slope_at_start = (-3.0 * frames[0].entropy + 4.0 * frames[1].entropy - frames[2].entropy) / (2.0 * h);
  for (std::size_t k = 1; k + 1 < frames.size(); ++k) {
    // the final sample may sit off the uniform grid
    if (std::abs((frames[k + 1].time - frames[k].time) - h) > 1e-9 * h ||
        std::abs((frames[k].time - frames[k - 1].time) - h) > 1e-9 * h)
      continue;
    const double slope = (frames[k + 1].entropy - frames[k - 1].entropy) / (2.0 * h);
    const double mis = std::abs(slope - frames[k].entropy_production);
    if (mis > rep.max_mismatch) rep.max_mismatch = mis;
    if (mis > rep.tolerance && !rep.check.first_violation) {
      rep.check.first_violation = k;
      rep.check.passed = false;
    }
  }
  rep.check.worst = rep.max_mismatch;
  return rep;
}

/// Sample-level verification of a certificate's conclusions: the diameter
/// bound, exponential velocity/temperature decay and the Lyapunov pair.
/// Throws PreconditionError for an unsatisfied certificate.
inline CheckReport check_decay_bounds(const std::vector<DiagnosticsFrame>& frames,
                                      const FlockingCertificate& cert) {
  if (!cert.satisfied || !cert.d_x_inf) throw PreconditionError("decay bounds need a satisfied certificate");
  CheckReport rep;
  if (frames.empty()) return rep;
  const double dx_inf = *cert.d_x_inf;
  const bool strict = cert.theorem == Theorem::thm31;
  const double t0 = frames[0].time;

  CheckResult dx{"d_x_bounded"}, dv{"d_v_decay"}, dt{"d_t_decay"};
  for (std::size_t k = 0; k < frames.size(); ++k) {
    const auto& f = frames[k];
    const double t = f.time - t0;
    const double over_x = f.d_x - dx_inf;
    // non-strict bound tolerates rounding of D_X itself (rigid motion sits on it)
    if ((strict ? over_x >= 0.0 : over_x > 1e-12 * dx_inf) && !dx.first_violation) {
      dx.first_violation = k;
      dx.passed = false;
    }
    dx.worst = std::max(dx.worst, over_x);

    const double bound_v = frames[0].d_v * std::exp(-cert.rate_v * t) * (1.0 + 1e-6);
    if (f.d_v > bound_v && !dv.first_violation) {
      dv.first_violation = k;
      dv.passed = false;
    }
    dv.worst = std::max(dv.worst, f.d_v - bound_v);

    const double bound_t = frames[0].d_t * std::exp(-cert.rate_t * t) * (1.0 + 1e-6);
    if (f.d_t > bound_t && !dt.first_violation) {
      dt.first_violation = k;
      dt.passed = false;
    }
    dt.worst = std::max(dt.worst, f.d_t - bound_t);
  }
  rep.checks = {dx, dv, dt};

  if (frames[0].lyap_plus && frames[0].lyap_minus) {
    rep.checks.push_back(detail::monotone_check(
        "lyap_plus_nonincreasing", frames, [](const auto& f) { return f.lyap_plus.value_or(0.0); }, -1,
        kMonotoneTol));
    rep.checks.push_back(detail::monotone_check(
        "lyap_minus_nonincreasing", frames, [](const auto& f) { return f.lyap_minus.value_or(0.0); }, -1,
        kMonotoneTol));
  }
  return rep;
}

}  // namespace tcs
