#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "tdcf/error.hpp"
#include "tdcf/params.hpp"

namespace tdcf {

using cplx = std::complex<double>;

/// One root of the characteristic equations. `branch` is 1 for the
/// (R + iI)(R + iI) equation and 2 for its (R - iI)(R - iI) partner.
struct StabilityRoot {
  cplx lambda;
  double residual = 0.0;
  int branch = 1;
  int multiplicity_hint = 1;
};

struct CharResiduals {
  cplx first;
  cplx second;
};

namespace detail {

// Bracket factors of one equation and their lambda-derivatives.
struct Bracket {
  cplx value, derivative;
};

inline Bracket factor(double kappa, double k, double phase, double tau, double detuning, cplx lambda) {
  const cplx delayed = k * std::polar(1.0, phase) * std::exp(-lambda * tau);
  return {lambda + kappa + cplx(0.0, detuning) + delayed, 1.0 - tau * delayed};
}

inline std::pair<Bracket, Bracket> brackets(const SystemConfig& c, cplx lambda, int branch) {
  const double s = branch == 1 ? 1.0 : -1.0;
  const ModeParams& a = c.mode_a;
  const ModeParams& b = c.mode_b;
  return {factor(derived_kappa(a), derived_feedback_strength(a), s * a.phi, a.tau, s * c.delta, lambda),
          factor(derived_kappa(b), derived_feedback_strength(b), -s * b.phi, b.tau, s * c.delta, lambda)};
}

}  // namespace detail

/// Left-hand side of characteristic equation `branch` (1 or 2) at lambda.
inline cplx char_function(const SystemConfig& c, cplx lambda, int branch) {
  const auto [A, B] = detail::brackets(c, lambda, branch);
  return A.value * B.value - c.pump.magnitude * c.pump.magnitude;
}

inline std::pair<cplx, cplx> char_function_and_derivative(const SystemConfig& c, cplx lambda, int branch) {
  const auto [A, B] = detail::brackets(c, lambda, branch);
  return {A.value * B.value - c.pump.magnitude * c.pump.magnitude,
          A.derivative * B.value + A.value * B.derivative};
}

inline CharResiduals char_residuals(const SystemConfig& c, cplx lambda) {
  return {char_function(c, lambda, 1), char_function(c, lambda, 2)};
}

struct RootSearchOptions {
  /// Search rectangle in units of kappa_a. im_half < 0 selects |delta| + 20.
  double re_min = -5.0;
  double re_max = 2.0;
  double im_half = -1.0;
  /// Seeds per kappa_a along each axis. <= 0 selects max(2, tau_max * kappa_a).
  double grid_density = 0.0;
  int max_iterations = 100;
  double tolerance = 1e-12;   ///< Newton stop, times kappa_a^2
  double accept = 1e-8;       ///< residual bound for accepted roots, times kappa_a^2
  double dedupe = 1e-6;       ///< times kappa_a
  bool allow_empty = false;
};

struct RootList {
  std::vector<StabilityRoot> roots;  ///< descending real part
  int seeds = 0;
  int nonconverged = 0;
};

namespace detail {

inline std::optional<cplx> newton(const SystemConfig& c, cplx z, int branch, const RootSearchOptions& o,
                                  double ka, double re_lo, double re_hi, double im_hi) {
  const double tol = o.tolerance * ka * ka;
  for (int it = 0; it < o.max_iterations; ++it) {
    const auto [f, df] = char_function_and_derivative(c, z, branch);
    if (std::abs(f) <= tol) {
      // converged; two more steps take a simple root to full precision
      for (int p = 0; p < 2; ++p) {
        const auto [g, dg] = char_function_and_derivative(c, z, branch);
        if (g == cplx(0.0) || dg == cplx(0.0)) break;
        z -= g / dg;
      }
      return z;
    }
    if (df == cplx(0.0)) return std::nullopt;
    cplx step = f / df;
    const double mag = std::abs(step);
    if (mag > ka) step *= ka / mag;  // damp wild first steps
    z -= step;
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
    if (z.real() < re_lo || z.real() > re_hi || std::abs(z.imag()) > im_hi) return std::nullopt;
    if (mag <= 1e-15 * (1.0 + std::abs(z))) break;
  }
  if (std::abs(char_function(c, z, branch)) <= o.accept * ka * ka) return z;
  return std::nullopt;
}

}  // namespace detail

/// All roots of both characteristic equations inside the search rectangle,
/// by Newton iteration from a uniform seed grid.
inline RootList find_roots(const SystemConfig& c, const RootSearchOptions& o = {}) {
  require_valid(c);
  const double ka = derived_kappa(c.mode_a);
  const double re_min = o.re_min * ka, re_max = o.re_max * ka;
  const double im_half = (o.im_half < 0.0 ? std::abs(c.delta) / ka + 20.0 : o.im_half) * ka;
  double density = o.grid_density;
  if (density <= 0.0) density = std::max(2.0, std::max(c.mode_a.tau, c.mode_b.tau) * ka);

  const int n_re = std::max(2, static_cast<int>(std::ceil((re_max - re_min) / ka * density)) + 1);
  const int n_im = std::max(2, static_cast<int>(std::ceil(2.0 * im_half / ka * density)) + 1);
  const double margin = 2.0 * ka;

  RootList out;
  const double dedupe = o.dedupe * ka;
  for (int branch : {1, 2}) {
    std::vector<StabilityRoot> found;
    for (int i = 0; i < n_re; ++i) {
      const double re = re_min + (re_max - re_min) * i / (n_re - 1);
      for (int j = 0; j < n_im; ++j) {
        const double im = -im_half + 2.0 * im_half * j / (n_im - 1);
        ++out.seeds;
        const auto z = detail::newton(c, {re, im}, branch, o, ka, re_min - margin, re_max + margin,
                                      im_half + margin);
        if (!z) {
          ++out.nonconverged;
          continue;
        }
        if (z->real() < re_min || z->real() > re_max || std::abs(z->imag()) > im_half) continue;
        const bool dup = std::any_of(found.begin(), found.end(),
                                     [&](const StabilityRoot& r) { return std::abs(r.lambda - *z) < dedupe; });
        if (!dup) found.push_back({*z, std::abs(char_function(c, *z, branch)), branch, 1});
      }
    }
    out.roots.insert(out.roots.end(), found.begin(), found.end());
  }
  if (out.roots.empty() && !o.allow_empty) throw NumericalError("no roots found in the search window");

  for (auto& r : out.roots) {
    r.multiplicity_hint = 0;
    for (const auto& s : out.roots)
      if (std::abs(r.lambda - s.lambda) < dedupe) ++r.multiplicity_hint;
  }
  std::stable_sort(out.roots.begin(), out.roots.end(), [](const StabilityRoot& x, const StabilityRoot& y) {
    if (x.lambda.real() != y.lambda.real()) return x.lambda.real() > y.lambda.real();
    return x.lambda.imag() > y.lambda.imag();
  });
  return out;
}

enum class Stability { stable, critical, unstable };

inline const char* to_string(Stability s) {
  switch (s) {
    case Stability::stable: return "stable";
    case Stability::critical: return "critical";
    default: return "unstable";
  }
}

struct StabilityVerdict {
  Stability status = Stability::stable;
  StabilityRoot leading;
  /// Every root whose real part is within 1e-9 kappa_a of the leading one.
  std::vector<StabilityRoot> leading_set;

  bool stable() const { return status == Stability::stable; }
};

struct StabilityOptions {
  RootSearchOptions search;
  double stability_eps = 1e-9;  ///< times kappa_a
};

inline StabilityVerdict classify(const RootList& roots, double ka, double stability_eps = 1e-9) {
  StabilityVerdict v;
  v.leading = roots.roots.front();
  for (const auto& r : roots.roots)
    if (v.leading.lambda.real() - r.lambda.real() <= 1e-9 * ka) v.leading_set.push_back(r);
  const double re = v.leading.lambda.real();
  const double eps = stability_eps * ka;
  v.status = re < -eps ? Stability::stable : (re > eps ? Stability::unstable : Stability::critical);
  return v;
}

inline StabilityVerdict is_stable(const SystemConfig& c, const StabilityOptions& o = {}) {
  return classify(find_roots(c, o.search), derived_kappa(c.mode_a), o.stability_eps);
}

/// Same verdict as is_stable, searching only the strip Re lambda >= -margin.
/// |A||B| = eps^2 confines any root there to Re lambda <= eps and
/// |Im lambda| <= |delta| + eps + max(k e^{margin tau}); no root in the strip
/// means stable.
inline StabilityVerdict is_stable_strip(const SystemConfig& c, double margin = 0.5, const StabilityOptions& o = {}) {
  const double ka = derived_kappa(c.mode_a);
  const double eps = c.pump.magnitude;
  const double reach = std::max(derived_feedback_strength(c.mode_a) * std::exp(margin * c.mode_a.tau),
                                derived_feedback_strength(c.mode_b) * std::exp(margin * c.mode_b.tau));
  RootSearchOptions s = o.search;
  s.re_min = -margin / ka;
  s.re_max = (eps + 0.1 * ka) / ka;
  s.im_half = (std::abs(c.delta) + eps + reach + 0.5 * ka) / ka;
  s.allow_empty = true;
  const RootList roots = find_roots(c, s);
  if (roots.roots.empty()) {
    StabilityVerdict v;
    v.status = Stability::stable;
    v.leading.lambda = {-margin, 0.0};
    return v;
  }
  return classify(roots, ka, o.stability_eps);
}

/// Which critical root to target: `equation` 1 or 2, `sign` picks the
/// +- in nu_c = -+delta + sign * s, `n` counts delay solutions from the
/// shortest (n = 0).
struct CriticalBranch {
  int n = 0;
  int equation = 1;
  int sign = +1;
};

struct CriticalPoint {
  double nu_c = 0.0;
  double tau_c = 0.0;
  int branch_index = 0;
  double residual = 0.0;
};

namespace detail {

struct CriticalGeometry {
  double c;  ///< (|eps| - kappa) / k
  double s;  ///< sqrt(k^2 - (|eps| - kappa)^2)
  double k;
};

inline CriticalGeometry critical_geometry(const SystemConfig& cfg) {
  const double ka = derived_kappa(cfg.mode_a);
  const double k = derived_feedback_strength(cfg.mode_a);
  const double d = cfg.pump.magnitude - ka;
  if (k <= 0.0 || k * k <= d * d) throw NumericalError("no critical point: k_a^2 <= (|eps| - kappa_a)^2");
  return {d / k, std::sqrt(k * k - d * d), k};
}

}  // namespace detail

/// Residual of cos(Delta tau) cos(s tau) -+ sin(Delta tau) sin(s tau) = (|eps| - kappa_a) / k_a.
inline double critical_condition_residual(const SystemConfig& cfg, double tau, int equation, int sign) {
  const auto g = detail::critical_geometry(cfg);
  const double nu = (equation == 1 ? -cfg.delta : cfg.delta) + sign * g.s;
  return std::cos(nu * tau) - g.c;
}

/// Critical frequency and delay of mode a's parameters.
///
/// Delta = 0 uses the closed form with the principal arccos branch plus
/// 2 pi n / nu_c. Otherwise the delay is the n-th positive solution of the
/// critical condition on which sin(nu_c tau) has the sign of the target root,
/// located by bracketing and refined with TOMS 748.
inline CriticalPoint critical_nu_tau(const SystemConfig& cfg, const CriticalBranch& br = {}) {
  require_valid(cfg);
  if (br.n < 0) throw ValidationError("critical_nu_tau: branch index must be >= 0");
  const auto g = detail::critical_geometry(cfg);
  const double nu = (br.equation == 1 ? -cfg.delta : cfg.delta) + br.sign * g.s;

  CriticalPoint cp;
  cp.branch_index = br.n;
  cp.nu_c = nu;
  if (cfg.delta == 0.0) {
    cp.tau_c = (std::acos(g.c) + 2.0 * std::numbers::pi * br.n) / g.s;
    cp.residual = std::abs(critical_condition_residual(cfg, cp.tau_c, br.equation, br.sign));
    return cp;
  }
  if (std::abs(nu) < 1e-14 * g.k) throw NumericalError("no critical point: nu_c = 0 with detuning");

  // Zeros of cos(w t) - c lie one per half period of w; walk them in order.
  const double w = std::abs(nu);
  const double period = 2.0 * std::numbers::pi / w;
  const double want = br.sign * (nu > 0 ? 1.0 : -1.0);  // required sign of sin(w tau)
  auto f = [&](double t) { return std::cos(w * t) - g.c; };
  int found = 0;
  for (int half = 0; half < 2 * br.n + 4; ++half) {
    // on [half * period/2, (half+1) * period/2] cos(w t) is monotone
    const double lo = 0.5 * period * half, hi = 0.5 * period * (half + 1);
    const double flo = f(lo), fhi = f(hi);
    if (flo * fhi > 0.0) continue;
    const bool rising = half % 2 == 1;  // sin(w t) < 0 on odd half-periods
    if ((rising ? -1.0 : 1.0) != want) continue;
    if (found++ < br.n) continue;
    boost::uintmax_t iters = 200;
    const auto tol = boost::math::tools::eps_tolerance<double>(52);
    double tau;
    if (flo == 0.0) {
      tau = lo;
    } else if (fhi == 0.0) {
      tau = hi;
    } else {
      const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
      tau = 0.5 * (r.first + r.second);
    }
    if (tau <= 0.0) {
      --found;
      continue;
    }
    cp.tau_c = tau;
    cp.residual = std::abs(critical_condition_residual(cfg, tau, br.equation, br.sign));
    return cp;
  }
  throw NumericalError("no critical point: delay search failed");
}

/// Pump magnitude at which a symmetric Delta = 0 configuration with delay
/// mode_a.tau sits on the principal critical branch.
inline double critical_pump_for_delay(const SystemConfig& cfg) {
  require_valid(cfg);
  const double ka = derived_kappa(cfg.mode_a);
  const double k = derived_feedback_strength(cfg.mode_a);
  const double tau = cfg.mode_a.tau;
  if (k <= 0.0 || tau * k <= 1.0) throw NumericalError("no critical point: delay shorter than 1 / k_a");
  auto tau_c = [&](double eps) {
    const double d = eps - ka;
    const double s = std::sqrt(std::max(k * k - d * d, 0.0));
    return std::acos(std::clamp(d / k, -1.0, 1.0)) / s;
  };
  double lo = std::max(ka - k, 0.0), hi = ka + k;
  const double span = hi - lo;
  lo += 1e-12 * span;
  hi -= 1e-12 * span;
  auto f = [&](double eps) { return tau_c(eps) - tau; };
  if (f(lo) < 0.0 || f(hi) > 0.0) throw NumericalError("no critical point: delay outside reachable range");
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return 0.5 * (r.first + r.second);
}

struct PhaseMatch {
  double residual = 0.0;
  int n = 0;
};

/// Distance of (Delta tau_a, Delta tau_b, phi_a + phi_b) from multiples of 2 pi.
inline PhaseMatch phase_matching_residual(const SystemConfig& c) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  auto dist = [&](double x) { return std::abs(std::remainder(x, two_pi)); };
  const double ta = c.delta * c.mode_a.tau, tb = c.delta * c.mode_b.tau;
  PhaseMatch pm;
  pm.residual = std::max({dist(ta), dist(tb), dist(c.mode_a.phi + c.mode_b.phi)});
  pm.n = static_cast<int>(std::lround(ta / two_pi));
  return pm;
}

struct ResidualSample {
  cplx lambda;
  cplx value;
};

/// Values of one characteristic function on a rectangle, for drawing the
/// zero contours of its real and imaginary parts.
inline std::vector<ResidualSample> residual_grid(const SystemConfig& c, int branch, double re_min, double re_max,
                                                 double im_min, double im_max, int n_re, int n_im) {
  std::vector<ResidualSample> out;
  out.reserve(static_cast<std::size_t>(n_re) * n_im);
  for (int i = 0; i < n_re; ++i)
    for (int j = 0; j < n_im; ++j) {
      const cplx z(re_min + (re_max - re_min) * i / std::max(1, n_re - 1),
                   im_min + (im_max - im_min) * j / std::max(1, n_im - 1));
      out.push_back({z, char_function(c, z, branch)});
    }
  return out;
}

}  // namespace tdcf
