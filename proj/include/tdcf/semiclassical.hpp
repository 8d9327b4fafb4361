#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tdcf/detail/fft.hpp"
#include "tdcf/error.hpp"
#include "tdcf/params.hpp"
#include "tdcf/stability.hpp"

namespace tdcf {

/// Mean-field model with a depleted pump. The linear model's pump is
/// eps = (eta / kappa_gamma) chi_nl.
struct SemiclassicalParams {
  SystemConfig base;
  double chi_nl = 1.0;
  double kappa_gamma = 1.0;
  cplx eta{0.0, 0.0};

  /// Drive amplitude that reproduces base.pump (magnitude and phase).
  static SemiclassicalParams from_config(const SystemConfig& base, double chi_nl = 1.0, double kappa_gamma = 1.0) {
    SemiclassicalParams p{base, chi_nl, kappa_gamma, {}};
    if (chi_nl == 0.0 && base.pump.magnitude > 0.0)
      throw ValidationError("chi_nl: zero coupling cannot produce a nonzero pump");
    if (chi_nl != 0.0) p.eta = std::polar(base.pump.magnitude * kappa_gamma / chi_nl, base.pump.theta);
    return p;
  }

  double equivalent_pump() const { return std::abs(eta) * chi_nl / kappa_gamma; }
  cplx steady_pump() const { return eta / kappa_gamma; }

  /// Copy of base with the pump replaced by the one implied by eta.
  SystemConfig linear_config() const {
    SystemConfig c = base;
    c.pump.magnitude = equivalent_pump();
    c.pump.theta = std::arg(eta);
    return c;
  }
};

inline void validate(const SemiclassicalParams& p) {
  require_valid(p.base);
  if (!(p.kappa_gamma > 0.0)) throw ValidationError("kappa_gamma: must be > 0");
  if (!std::isfinite(p.chi_nl)) throw ValidationError("chi_nl: not a finite number");
  const double eps = p.base.pump.magnitude;
  if (eps > 0.0 && std::abs(p.equivalent_pump() - eps) > 1e-10 * std::max(1.0, eps))
    throw ValidationError("eta: inconsistent with pump.magnitude (eps = |eta| chi / kappa_gamma)");
}

struct MeanFieldState {
  cplx alpha, beta, gamma;
};

/// Right-hand side of the mean-field delay equations, given the delayed
/// amplitudes alpha(t - tau_a) and beta(t - tau_b).
inline MeanFieldState mean_field_drift(const SemiclassicalParams& p, const MeanFieldState& s, cplx alpha_delayed,
                                       cplx beta_delayed) {
  const ModeParams& a = p.base.mode_a;
  const ModeParams& b = p.base.mode_b;
  const cplx i(0.0, 1.0);
  const double D = p.base.delta;
  return {
      -(derived_kappa(a) + i * D) * s.alpha + p.chi_nl * std::conj(s.beta) * s.gamma -
          derived_feedback_strength(a) * std::polar(1.0, a.phi) * alpha_delayed,
      -(derived_kappa(b) - i * D) * s.beta + p.chi_nl * std::conj(s.alpha) * s.gamma -
          derived_feedback_strength(b) * std::polar(1.0, b.phi) * beta_delayed,
      -p.kappa_gamma * s.gamma - p.chi_nl * s.alpha * s.beta + p.eta,
  };
}

struct Trajectory {
  std::vector<double> t;
  std::vector<cplx> alpha, beta, gamma;
  double tau_a = 0.0, tau_b = 0.0;
  int interpolation_order = 3;
  std::optional<double> diverged_at;

  std::size_t size() const { return t.size(); }
};

/// History for t <= 0. Returns the state at a non-positive time.
using HistoryFunction = std::function<MeanFieldState(double)>;

struct IntegrationOptions {
  double t_end = 100.0;
  double dt = 0.01;
  /// |alpha| or |beta| above this stops the run. <= 0 selects 1e6 (1 + |eta / kappa_gamma|).
  double divergence_bound = 0.0;
  /// Keep every n-th step in the returned trajectory.
  int record_every = 1;
};

/// Default constant history: tiny down-converted seeds, pump at its steady value.
inline MeanFieldState default_history(const SemiclassicalParams& p) {
  const cplx g = p.steady_pump();
  const double seed = 1e-6 * std::max(std::abs(g), 1e-300);
  return {seed, seed, g};
}

/// Method of steps: classical RK4 with delayed terms taken from a cubic
/// Hermite interpolant of the stored solution and its derivative.
inline Trajectory dde_integrate(const SemiclassicalParams& p, const HistoryFunction& history,
                                const IntegrationOptions& o) {
  validate(p);
  const double tau_a = p.base.mode_a.tau, tau_b = p.base.mode_b.tau;
  const double dt = o.dt;
  if (!(dt > 0.0) || !(o.t_end > 0.0)) throw ValidationError("dde_integrate: dt and t_end must be positive");
  for (double tau : {tau_a, tau_b})
    if (tau > 0.0 && dt > tau / 20.0 * (1.0 + 1e-12))
      throw ValidationError("dde_integrate: dt must be <= min(tau_a, tau_b) / 20");
  const double bound =
      o.divergence_bound > 0.0 ? o.divergence_bound : 1e6 * (1.0 + std::abs(p.steady_pump()));
  const int every = std::max(1, o.record_every);
  const auto n_steps = static_cast<std::size_t>(std::ceil(o.t_end / dt - 1e-9));

  // node values and derivatives on the step grid, node j at t = j dt
  std::vector<cplx> ya, yb, fa, fb;
  ya.reserve(n_steps + 1);
  yb.reserve(n_steps + 1);
  fa.reserve(n_steps + 1);
  fb.reserve(n_steps + 1);

  auto delayed = [&](double s, bool mode_a) -> cplx {
    if (s <= 0.0) {
      const auto h = history(s);
      return mode_a ? h.alpha : h.beta;
    }
    const auto& y = mode_a ? ya : yb;
    const auto& f = mode_a ? fa : fb;
    auto j = static_cast<std::size_t>(s / dt);
    if (j + 1 >= f.size()) j = f.size() - 2;
    const double h = dt, u = (s - j * dt) / h;
    const double u2 = u * u, u3 = u2 * u;
    return (2 * u3 - 3 * u2 + 1) * y[j] + (u3 - 2 * u2 + u) * h * f[j] + (-2 * u3 + 3 * u2) * y[j + 1] +
           (u3 - u2) * h * f[j + 1];
  };
  auto drift_at = [&](double t, const MeanFieldState& s) {
    const cplx ad = tau_a > 0.0 ? delayed(t - tau_a, true) : s.alpha;
    const cplx bd = tau_b > 0.0 ? delayed(t - tau_b, false) : s.beta;
    return mean_field_drift(p, s, ad, bd);
  };
  auto axpy = [](const MeanFieldState& s, double h, const MeanFieldState& k) {
    return MeanFieldState{s.alpha + h * k.alpha, s.beta + h * k.beta, s.gamma + h * k.gamma};
  };

  Trajectory tr;
  tr.tau_a = tau_a;
  tr.tau_b = tau_b;
  MeanFieldState s = history(0.0);
  auto record = [&](double t, const MeanFieldState& x) {
    tr.t.push_back(t);
    tr.alpha.push_back(x.alpha);
    tr.beta.push_back(x.beta);
    tr.gamma.push_back(x.gamma);
  };
  record(0.0, s);

  for (std::size_t n = 0; n < n_steps; ++n) {
    const double t = n * dt;
    const MeanFieldState k1 = drift_at(t, s);
    ya.push_back(s.alpha);
    yb.push_back(s.beta);
    fa.push_back(k1.alpha);
    fb.push_back(k1.beta);
    const MeanFieldState k2 = drift_at(t + 0.5 * dt, axpy(s, 0.5 * dt, k1));
    const MeanFieldState k3 = drift_at(t + 0.5 * dt, axpy(s, 0.5 * dt, k2));
    const MeanFieldState k4 = drift_at(t + dt, axpy(s, dt, k3));
    s.alpha += dt / 6.0 * (k1.alpha + 2.0 * k2.alpha + 2.0 * k3.alpha + k4.alpha);
    s.beta += dt / 6.0 * (k1.beta + 2.0 * k2.beta + 2.0 * k3.beta + k4.beta);
    s.gamma += dt / 6.0 * (k1.gamma + 2.0 * k2.gamma + 2.0 * k3.gamma + k4.gamma);

    const double t1 = (n + 1) * dt;
    const bool finite = std::isfinite(std::abs(s.alpha)) && std::isfinite(std::abs(s.beta)) &&
                        std::isfinite(std::abs(s.gamma));
    if (!finite || std::abs(s.alpha) > bound || std::abs(s.beta) > bound) {
      tr.diverged_at = t1;
      break;
    }
    if ((n + 1) % every == 0 || n + 1 == n_steps) record(t1, s);
  }
  return tr;
}

inline Trajectory dde_integrate(const SemiclassicalParams& p, const IntegrationOptions& o) {
  const MeanFieldState h = default_history(p);
  return dde_integrate(p, [h](double) { return h; }, o);
}

struct FrequencyEstimate {
  double omega = 0.0;
  double peak_to_background = 0.0;
};

/// Dominant angular frequency of alpha(t), after dropping the first 20 %.
/// Throws NumericalError("no oscillation") for decaying or featureless data.
inline FrequencyEstimate trajectory_frequency(const Trajectory& tr) {
  if (tr.size() < 16) throw NumericalError("no oscillation: trajectory too short");
  const std::size_t start = tr.size() / 5;
  const std::size_t n = tr.size() - start;
  const double dt = (tr.t.back() - tr.t[start]) / static_cast<double>(n - 1);

  auto rms = [&](std::size_t b, std::size_t e) {
    double acc = 0.0;
    for (std::size_t i = b; i < e; ++i) acc += std::norm(tr.alpha[i]);
    return std::sqrt(acc / static_cast<double>(e - b));
  };
  const std::size_t q = n / 4;
  if (rms(tr.size() - q, tr.size()) < 0.5 * rms(start, start + q))
    throw NumericalError("no oscillation: amplitude decays");

  cplx mean = 0.0;
  for (std::size_t i = start; i < tr.size(); ++i) mean += tr.alpha[i];
  mean /= static_cast<double>(n);

  detail::ForwardFft fft(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / (n - 1));
    fft.input()[i] = w * (tr.alpha[start + i] - mean);
  }
  fft.execute();
  std::vector<double> mag(n);
  for (std::size_t k = 0; k < n; ++k) mag[k] = std::abs(fft.output()[k]);

  const auto peak = static_cast<std::size_t>(std::max_element(mag.begin(), mag.end()) - mag.begin());
  std::vector<double> sorted = mag;
  std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
  const double background = sorted[n / 2];
  FrequencyEstimate est;
  est.peak_to_background = background > 0.0 ? mag[peak] / background : INFINITY;
  if (!(mag[peak] > 3.0 * background)) throw NumericalError("no oscillation: no spectral peak above background");

  const double l = mag[(peak + n - 1) % n], c = mag[peak], r = mag[(peak + 1) % n];
  const double den = l - 2.0 * c + r;
  const double shift = den != 0.0 ? 0.5 * (l - r) / den : 0.0;
  double k = static_cast<double>(peak) + shift;
  if (k > 0.5 * n) k -= static_cast<double>(n);
  est.omega = std::abs(2.0 * std::numbers::pi * k / (n * dt));
  return est;
}

struct HopfPoint {
  double x = 0.0;         ///< eta / kappa_a
  double ka_tau_a = 0.0;
  double omega = 0.0;     ///< |Im lambda| of the leading root at the crossing
  double re_leading = 0.0;
  double bracket_width = 0.0;
};

struct HopfFailure {
  double ka_tau_a = 0.0;
  std::string message;
};

struct HopfCurve {
  std::vector<HopfPoint> points;
  std::vector<HopfFailure> failures;
};

struct HopfOptions {
  /// Upper end of the global x bracket. <= 0 selects 1.05 times the
  /// zero-delay, zero-phase threshold sqrt((kappa_a + k_a)(kappa_b + k_b)).
  double x_max = 0.0;
  double x_tol = 1e-12;  ///< relative bisection tolerance
  double warm_width = 0.05;  ///< relative half-width of the warm-start bracket
  StabilityOptions stability;
};

/// Configuration of the linearized problem at drive ratio x and delays.
inline SystemConfig hopf_config(const SemiclassicalParams& p, double x, double ka_tau_a, double kb_tau_b) {
  SystemConfig c = p.base;
  const double ka = derived_kappa(c.mode_a), kb = derived_kappa(c.mode_b);
  c.mode_a.tau = ka_tau_a / ka;
  c.mode_b.tau = kb_tau_b / kb;
  c.pump.magnitude = x * ka * p.chi_nl / p.kappa_gamma;
  c.pump.theta = 0.0;
  return c;
}

/// Critical drive ratio at one delay pair, by bisection on the stability
/// verdict inside [lo, hi] (stable at lo, unstable at hi).
inline std::optional<HopfPoint> hopf_point(const SemiclassicalParams& p, double ka_tau_a, double kb_tau_b,
                                           double lo, double hi, const HopfOptions& o) {
  auto unstable = [&](double x) {
    const auto v = is_stable(hopf_config(p, x, ka_tau_a, kb_tau_b), o.stability);
    return v.leading.lambda.real() >= 0.0;
  };
  if (unstable(lo) || !unstable(hi)) return std::nullopt;
  while (hi - lo > o.x_tol * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (unstable(mid) ? hi : lo) = mid;
  }
  const double x = 0.5 * (lo + hi);
  const auto v = is_stable(hopf_config(p, x, ka_tau_a, kb_tau_b), o.stability);
  HopfPoint hp;
  hp.x = x;
  hp.ka_tau_a = ka_tau_a;
  hp.omega = std::abs(v.leading.lambda.imag());
  hp.re_leading = v.leading.lambda.real();
  hp.bracket_width = hi - lo;
  return hp;
}

/// Parameter-marching continuation of the stability boundary in (x, kappa_a tau_a)
/// at fixed kappa_b tau_b. Each point is warm-started from the previous one;
/// a failed warm bracket falls back to the global one.
inline HopfCurve hopf_continuation(const SemiclassicalParams& p, double kb_tau_b, const std::vector<double>& ka_tau_a,
                                   const HopfOptions& o = {}) {
  validate(p);
  const ModeParams& a = p.base.mode_a;
  const ModeParams& b = p.base.mode_b;
  const double ka = derived_kappa(a);
  const double threshold = std::sqrt((derived_kappa(a) + derived_feedback_strength(a)) *
                                     (derived_kappa(b) + derived_feedback_strength(b)));
  const double x_max = o.x_max > 0.0 ? o.x_max : 1.05 * threshold * p.kappa_gamma / (p.chi_nl * ka);
  HopfCurve curve;
  std::optional<double> previous;
  for (double kt : ka_tau_a) {
    std::optional<HopfPoint> hp;
    if (previous) {
      const double w = o.warm_width * *previous;
      hp = hopf_point(p, kt, kb_tau_b, std::max(0.0, *previous - w), *previous + w, o);
    }
    if (!hp) hp = hopf_point(p, kt, kb_tau_b, 0.0, x_max, o);
    if (!hp) {
      curve.failures.push_back({kt, "no crossing in bracket"});
      continue;
    }
    previous = hp->x;
    curve.points.push_back(*hp);
  }
  return curve;
}

}  // namespace tdcf
