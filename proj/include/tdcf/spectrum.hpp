#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include "tdcf/error.hpp"
#include "tdcf/params.hpp"

namespace tdcf {

using cplx = std::complex<double>;

/// Every frequency-domain coefficient entering the output spectrum, at one nu.
struct CoefficientSet {
  double nu = 0.0;
  cplx d_plus_a, d_minus_a, d_plus_b, d_minus_b;
  cplx f1a, f2a, f1b, f2b;
  cplx lambda_ab, lambda_ba;
  cplx D_a, D_b, E_a, E_b;
  cplx M_ab, M_ba;
  double N_ab = 0.0, N_ba = 0.0;
};

/// A chi sample. Samples on a pole of the response carry `at_pole` and an
/// infinite value; they are not data.
struct ChiValue {
  double value = 1.0;
  bool at_pole = false;
  double imag_residue = 0.0;
};

struct SpectrumOptions {
  /// |Lambda|^2 below pole_eps * kappa_a^4 marks a pole sample.
  double pole_eps = 1e-12;
  /// Relative tolerance on the imaginary residue of the assembled expression.
  double reality_tol = 1e-10;
};

namespace detail {

struct ModeTerms {
  double kappa1, kappa2, kappa, k, loss, phi, tau;

  explicit ModeTerms(const ModeParams& m)
      : kappa1(m.kappa1), kappa2(m.kappa2), kappa(derived_kappa(m)),
        k(derived_feedback_strength(m)), loss(m.loss), phi(m.phi), tau(m.tau) {}

  /// e^{i(nu tau + phi)}
  cplx loop_phase(double nu) const { return std::polar(1.0, nu * tau + phi); }

  // f_j = [2 kappa_j + k e^{i(nu tau + phi)}] / sqrt(2 kappa_j), written without
  // the division: k / sqrt(2 kappa_j) = sqrt(2 kappa_other (1 - L)).
  cplx f1(double nu) const {
    return std::sqrt(2.0 * kappa1) + std::sqrt(2.0 * kappa2 * (1.0 - loss)) * loop_phase(nu);
  }
  cplx f2(double nu) const {
    return std::sqrt(2.0 * kappa2) + std::sqrt(2.0 * kappa1 * (1.0 - loss)) * loop_phase(nu);
  }
  /// 2 L kappa2, the loss-port weight.
  double loss_weight() const { return 2.0 * loss * kappa2; }
};

}  // namespace detail

inline CoefficientSet coefficients(const SystemConfig& c, double nu) {
  using namespace std::complex_literals;
  const detail::ModeTerms a(c.mode_a), b(c.mode_b);
  const double D = c.delta;
  const double e2 = c.pump.magnitude * c.pump.magnitude;

  CoefficientSet s;
  s.nu = nu;
  s.d_plus_a = a.kappa - 1i * (nu + D) + a.k * std::polar(1.0, nu * a.tau - a.phi);
  s.d_minus_a = a.kappa - 1i * (nu - D) + a.k * std::polar(1.0, nu * a.tau + a.phi);
  s.d_plus_b = b.kappa - 1i * (nu - D) + b.k * std::polar(1.0, nu * b.tau - b.phi);
  s.d_minus_b = b.kappa - 1i * (nu + D) + b.k * std::polar(1.0, nu * b.tau + b.phi);

  s.f1a = a.f1(nu);
  s.f2a = a.f2(nu);
  s.f1b = b.f1(nu);
  s.f2b = b.f2(nu);

  s.lambda_ab = e2 - s.d_plus_a * s.d_minus_b;
  s.lambda_ba = e2 - s.d_plus_b * s.d_minus_a;

  s.D_a = std::sqrt(1.0 - a.loss) * a.loop_phase(nu) * (e2 + (a.kappa + 1i * (nu - D)) * s.d_plus_b) +
          2.0 * std::sqrt(a.kappa1 * a.kappa2) * s.d_plus_b;
  s.D_b = std::sqrt(1.0 - b.loss) * b.loop_phase(nu) * (e2 + (b.kappa + 1i * (nu + D)) * s.d_plus_a) +
          2.0 * std::sqrt(b.kappa1 * b.kappa2) * s.d_plus_a;
  s.E_a = std::sqrt(a.loss) * (e2 + (a.kappa2 - a.kappa1 + 1i * (nu - D)) * s.d_plus_b);
  s.E_b = std::sqrt(b.loss) * (e2 + (b.kappa2 - b.kappa1 + 1i * (nu + D)) * s.d_plus_a);

  const cplx rot = std::polar(1.0, c.theta_prime);
  s.M_ab = rot * b.f2(-nu) * (s.D_a * std::conj(s.f1a) + std::sqrt(a.loss_weight()) * s.E_a);
  s.M_ba = rot * a.f2(-nu) * (s.D_b * std::conj(s.f1b) + std::sqrt(b.loss_weight()) * s.E_b);

  const double eps = c.pump.magnitude;
  s.N_ab = eps * (std::norm(b.f2(-nu)) * (std::norm(s.f1a) + a.loss_weight()) +
                  std::norm(s.f2a) * (std::norm(b.f1(-nu)) + b.loss_weight()));
  s.N_ba = eps * (std::norm(a.f2(-nu)) * (std::norm(s.f1b) + b.loss_weight()) +
                  std::norm(s.f2b) * (std::norm(a.f1(-nu)) + a.loss_weight()));
  return s;
}

/// Two-mode squeezing spectrum of the monitored outputs, shot noise = 1.
inline ChiValue chi_out(const SystemConfig& c, double nu, const SpectrumOptions& opt = {}) {
  const CoefficientSet s = coefficients(c, nu);
  const double ka = derived_kappa(c.mode_a);
  const double lab2 = std::norm(s.lambda_ab);
  const double lba2 = std::norm(s.lambda_ba);
  const double pole_floor = opt.pole_eps * ka * ka * ka * ka;

  ChiValue out;
  if (lab2 < pole_floor || lba2 < pole_floor) {
    out.value = std::numeric_limits<double>::infinity();
    out.at_pole = true;
    return out;
  }
  // Assembled in complex arithmetic so the imaginary residue can be checked.
  const double half_eps = 0.5 * c.pump.magnitude;
  const cplx chi = 1.0 + half_eps * ((s.M_ba + std::conj(s.M_ba) + s.N_ba) / lab2 +
                                     (s.M_ab + std::conj(s.M_ab) + s.N_ab) / lba2);
  out.value = chi.real();
  out.imag_residue = std::abs(chi.imag());
  if (out.imag_residue > opt.reality_tol * (1.0 + std::abs(out.value)))
    throw NumericalError("chi_out: assembled spectrum has a non-negligible imaginary part");
  return out;
}

/// No-feedback degenerate-frequency spectrum at the phase quadrature
/// (theta' = pi): 1 - 4 eps kappa / [(kappa + eps)^2 + nu^2].
inline double chi_nofb_phase_quadrature(double kappa, double eps, double nu) {
  return 1.0 - 4.0 * eps * kappa / ((kappa + eps) * (kappa + eps) + nu * nu);
}

/// One-sided cavity without feedback, orthogonally polarized degenerate
/// modes, general quadrature angle.
inline double chi_nofb_degenerate(double kappa, double eps, double theta_prime, double nu) {
  const double wrapped = std::remainder(theta_prime - std::numbers::pi, 2.0 * std::numbers::pi);
  if (std::abs(wrapped) < 1e-12) return chi_nofb_phase_quadrature(kappa, eps, nu);
  const double c = std::cos(0.5 * theta_prime);
  const double s = std::sin(0.5 * theta_prime);
  return 1.0 + 4.0 * eps * kappa *
                   (c * c / ((kappa - eps) * (kappa - eps) + nu * nu) -
                    s * s / ((kappa + eps) * (kappa + eps) + nu * nu));
}

/// Frequency-split no-feedback spectrum: two Lorentzian dips at nu = -+delta.
///
/// Each lobe is referenced to its own single-lobe shot noise, so for
/// overlapping lobes (delta ~ kappa) the value can drop below zero. The
/// monitored-port spectrum of the same cavity is 1 + (chi_split - 1) / 2.
inline double chi_nofb_split(double kappa, double eps, double delta, double nu) {
  const double w = (kappa + eps) * (kappa + eps);
  return 1.0 - 4.0 * eps * kappa / (w + (nu + delta) * (nu + delta)) -
         4.0 * eps * kappa / (w + (nu - delta) * (nu - delta));
}

/// Spectral density of the delayed feedback reservoir seen by one mode.
inline double feedback_spectral_density(const ModeParams& m, double omega) {
  const double k = derived_feedback_strength(m);
  return (m.kappa1 + m.kappa2 * (1.0 - m.loss)) / std::numbers::pi +
         k / std::numbers::pi * std::cos(omega * m.tau + m.phi);
}

inline double to_db(double chi, double db_floor = 1e-20) {
  if (std::isinf(chi)) return chi;
  return 10.0 * std::log10(std::max(chi, db_floor));
}

struct SpectrumCurve {
  SystemConfig config;
  std::vector<double> nu;
  std::vector<double> chi;
  std::vector<double> s_db;
  std::vector<bool> at_pole;

  std::size_t size() const { return nu.size(); }
};

struct CurveOptions {
  SpectrumOptions spectrum;
  /// Refinement stops once an interval is narrower than this.
  double dnu_min = 1e-6;
  int max_depth = 12;
  double db_floor = 1e-20;
};

/// Uniform grid over [nu_min, nu_max] plus local bisection around jumps and
/// extrema, so that narrow resonances are resolved.
inline SpectrumCurve spectrum_curve(const SystemConfig& c, double nu_min, double nu_max,
                                    std::size_t n_points, const CurveOptions& opt = {}) {
  require_valid(c);
  if (n_points < 2) throw ValidationError("spectrum_curve: n_points must be >= 2");
  if (!(nu_max > nu_min)) throw ValidationError("spectrum_curve: empty frequency window");

  struct Sample {
    double nu;
    ChiValue chi;
  };
  std::vector<Sample> pts;
  pts.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double nu = nu_min + (nu_max - nu_min) * static_cast<double>(i) / (n_points - 1);
    pts.push_back({nu, chi_out(c, nu, opt.spectrum)});
  }

  auto finite_val = [](const Sample& s) { return s.chi.at_pole ? 0.0 : s.chi.value; };
  for (int depth = 0; depth < opt.max_depth; ++depth) {
    std::vector<char> split(pts.size(), 0);  // split[i]: refine (pts[i], pts[i+1])
    bool any = false;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      if (pts[i + 1].nu - pts[i].nu < 2.0 * opt.dnu_min) continue;
      const double y0 = finite_val(pts[i]), y1 = finite_val(pts[i + 1]);
      const bool jump = pts[i].chi.at_pole != pts[i + 1].chi.at_pole ||
                        std::abs(y1 - y0) > 0.5 * std::max(y0, 1.0);
      if (jump) split[i] = any = true;
    }
    for (std::size_t i = 1; i + 1 < pts.size(); ++i) {
      const double y = finite_val(pts[i]);
      const double l = finite_val(pts[i - 1]), r = finite_val(pts[i + 1]);
      const bool extremum = (y < l && y < r) || (y > l && y > r);
      if (!extremum) continue;
      if (pts[i].nu - pts[i - 1].nu >= 2.0 * opt.dnu_min) split[i - 1] = any = true;
      if (pts[i + 1].nu - pts[i].nu >= 2.0 * opt.dnu_min) split[i] = any = true;
    }
    if (!any) break;
    std::vector<Sample> next;
    next.reserve(pts.size() * 2);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      next.push_back(pts[i]);
      if (i + 1 < pts.size() && split[i]) {
        const double mid = 0.5 * (pts[i].nu + pts[i + 1].nu);
        next.push_back({mid, chi_out(c, mid, opt.spectrum)});
      }
    }
    pts = std::move(next);
  }

  SpectrumCurve curve;
  curve.config = c;
  for (const auto& p : pts) {
    curve.nu.push_back(p.nu);
    curve.chi.push_back(p.chi.value);
    curve.s_db.push_back(to_db(p.chi.value, opt.db_floor));
    curve.at_pole.push_back(p.chi.at_pole);
  }
  return curve;
}

}  // namespace tdcf
