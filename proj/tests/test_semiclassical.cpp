#include <gtest/gtest.h>

#include <array>

#include "tdcf/semiclassical.hpp"

using namespace tdcf;
using std::numbers::pi;

namespace {

SemiclassicalParams mean_field(double x, double ka_tau_a, double kb_tau_b = 2.0) {
  SystemConfig base = symmetric_config({0.5, 0.5, 0.0, 0.0, 0.0}, x);
  base.mode_a.tau = ka_tau_a;
  base.mode_b.tau = kb_tau_b;
  return SemiclassicalParams::from_config(base);
}

// Real 6x6 linearization of the drift about (0, 0, eta / kappa_gamma) by
// central differences: d(state)/dt = J0 state + Ja state(t - tau_a) + Jb state(t - tau_b).
using Mat6 = std::array<std::array<double, 6>, 6>;

std::array<double, 6> pack(const MeanFieldState& s) {
  return {s.alpha.real(), s.alpha.imag(), s.beta.real(), s.beta.imag(), s.gamma.real(), s.gamma.imag()};
}

MeanFieldState unpack(const std::array<double, 6>& v) {
  return {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}};
}

void linearize(const SemiclassicalParams& p, Mat6& J0, Mat6& Ja, Mat6& Jb) {
  const auto fixed = pack({0.0, 0.0, p.steady_pump()});
  const double h = 1e-6;
  for (int j = 0; j < 6; ++j) {
    auto up = fixed, dn = fixed;
    up[j] += h;
    dn[j] -= h;
    const auto s0 = unpack(fixed), su = unpack(up), sd = unpack(dn);
    const auto now_u = pack(mean_field_drift(p, su, 0.0, 0.0)), now_d = pack(mean_field_drift(p, sd, 0.0, 0.0));
    const auto a_u = pack(mean_field_drift(p, s0, su.alpha, 0.0)), a_d = pack(mean_field_drift(p, s0, sd.alpha, 0.0));
    const auto b_u = pack(mean_field_drift(p, s0, 0.0, su.beta)), b_d = pack(mean_field_drift(p, s0, 0.0, sd.beta));
    for (int i = 0; i < 6; ++i) {
      J0[i][j] = (now_u[i] - now_d[i]) / (2 * h);
      Ja[i][j] = (a_u[i] - a_d[i]) / (2 * h);
      Jb[i][j] = (b_u[i] - b_d[i]) / (2 * h);
    }
  }
}

cplx det6(std::array<std::array<cplx, 6>, 6> m) {
  cplx det = 1.0;
  for (int c = 0; c < 6; ++c) {
    int piv = c;
    for (int r = c + 1; r < 6; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    if (m[piv][c] == cplx(0.0)) return 0.0;
    if (piv != c) {
      std::swap(m[piv], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (int r = c + 1; r < 6; ++r) {
      const cplx f = m[r][c] / m[c][c];
      for (int k = c; k < 6; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

cplx char_det(const Mat6& J0, const Mat6& Ja, const Mat6& Jb, double ta, double tb, cplx z) {
  std::array<std::array<cplx, 6>, 6> m{};
  const cplx ea = std::exp(-z * ta), eb = std::exp(-z * tb);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) m[i][j] = (i == j ? z : 0.0) - J0[i][j] - Ja[i][j] * ea - Jb[i][j] * eb;
  return det6(m);
}

}  // namespace

TEST(Semiclassical, DecoupledLinearDecay) {
  SemiclassicalParams p;
  p.base = symmetric_config({0.3, 0.7, 0.1, 0.0, 0.0}, 0.0);
  p.chi_nl = 0.0;
  p.eta = 1.0;
  const double rate = derived_kappa(p.base.mode_a) + derived_feedback_strength(p.base.mode_a);
  IntegrationOptions o;
  o.t_end = 1.0;
  o.dt = 1e-3;
  const cplx a0(0.3, -0.2);
  const auto tr = dde_integrate(p, [&](double) { return MeanFieldState{a0, 0.1, 1.0}; }, o);
  EXPECT_NEAR(std::abs(tr.alpha.back()) / (std::abs(a0) * std::exp(-rate)), 1.0, 1e-6);
  EXPECT_NEAR(tr.t.back(), 1.0, 1e-12);
}

TEST(Semiclassical, BelowThresholdRelaxesToFixedPoint) {
  auto p = mean_field(0.4, 1.3);
  IntegrationOptions o;
  o.t_end = 200.0;
  o.dt = 0.02;
  const auto tr = dde_integrate(p, [&](double) { return MeanFieldState{0.2, 0.1, 0.3}; }, o);
  ASSERT_FALSE(tr.diverged_at);
  EXPECT_LT(std::abs(tr.alpha.back()), 1e-10);
  EXPECT_LT(std::abs(tr.beta.back()), 1e-10);
  EXPECT_NEAR(std::abs(tr.gamma.back() - p.steady_pump()), 0.0, 1e-10);
}

TEST(Semiclassical, FourthOrderUnderStepHalving) {
  auto p = mean_field(0.5, 1.0, 1.5);
  p.base.delta = 0.3;
  p.base.mode_a.phi = 0.4;
  const auto hist = [](double t) { return MeanFieldState{cplx(0.3, 0.1) * (1.0 + 0.2 * t), 0.2, 0.6}; };
  auto run = [&](double dt) {
    IntegrationOptions o;
    o.t_end = 8.0;
    o.dt = dt;
    const auto tr = dde_integrate(p, hist, o);
    return std::array<cplx, 3>{tr.alpha.back(), tr.beta.back(), tr.gamma.back()};
  };
  const auto y1 = run(0.05), y2 = run(0.025), y3 = run(0.0125);
  double e1 = 0, e2 = 0;
  for (int i = 0; i < 3; ++i) {
    e1 = std::max(e1, std::abs(y1[i] - y2[i]));
    e2 = std::max(e2, std::abs(y2[i] - y3[i]));
  }
  EXPECT_GE(std::log2(e1 / e2), 3.5) << e1 << " " << e2;
}

TEST(Semiclassical, StepGuardAndDivergenceMarker) {
  auto p = mean_field(0.4, 1.0);
  IntegrationOptions o;
  o.dt = 0.06;
  EXPECT_THROW(dde_integrate(p, o), ValidationError);
  o.dt = 0.05;
  EXPECT_NO_THROW(dde_integrate(p, o));

  auto hot = mean_field(1.5, 2.0);
  o.t_end = 500.0;
  o.divergence_bound = 1e-3;
  const auto tr = dde_integrate(hot, o);
  ASSERT_TRUE(tr.diverged_at.has_value());
  EXPECT_LT(*tr.diverged_at, 500.0);
  for (const auto& a : tr.alpha) EXPECT_TRUE(std::isfinite(std::abs(a)));
}

TEST(Semiclassical, PumpConsistencyIsChecked) {
  auto p = SemiclassicalParams::from_config(symmetric_config({0.5, 0.5, 0, 0, 0}, 0.6), 2.0, 3.0);
  EXPECT_NEAR(std::abs(p.eta), 0.9, 1e-15);
  EXPECT_NO_THROW(validate(p));
  p.eta *= 1.01;
  EXPECT_THROW(validate(p), ValidationError);
}

TEST(Semiclassical, LinearizationMatchesStabilityRoots) {
  auto p = mean_field(0.55, 1.4, 2.3);
  p.base.delta = 0.4;
  p.base.mode_a.phi = 0.3;
  p.base.mode_b.phi = -0.2;
  p.base.mode_b.loss = 0.1;
  p = SemiclassicalParams::from_config(p.base, 1.7, 2.5);
  Mat6 J0, Ja, Jb;
  linearize(p, J0, Ja, Jb);
  const auto roots = find_roots(p.linear_config());
  int checked = 0;
  for (const auto& r : roots.roots) {
    if (r.lambda.real() < -2.0) continue;
    // Newton on the 6x6 determinant, seeded at the stability root
    cplx z = r.lambda;
    for (int it = 0; it < 30; ++it) {
      const double h = 1e-7;
      const cplx f = char_det(J0, Ja, Jb, p.base.mode_a.tau, p.base.mode_b.tau, z);
      const cplx df = (char_det(J0, Ja, Jb, p.base.mode_a.tau, p.base.mode_b.tau, z + h) -
                       char_det(J0, Ja, Jb, p.base.mode_a.tau, p.base.mode_b.tau, z - h)) /
                      (2 * h);
      const cplx step = f / df;
      z -= step;
      if (std::abs(step) < 1e-14) break;
    }
    EXPECT_LT(std::abs(z - r.lambda), 1e-8) << r.lambda;
    ++checked;
  }
  EXPECT_GE(checked, 4);
}

TEST(TrajectoryFrequency, SyntheticTone) {
  Trajectory tr;
  const double w0 = 0.8137, dt = 0.05;
  for (int i = 0; i < 8000; ++i) {
    tr.t.push_back(i * dt);
    tr.alpha.push_back(std::polar(1.0, w0 * i * dt));
  }
  const double bin = 2 * pi / (0.8 * 8000 * dt);
  EXPECT_NEAR(trajectory_frequency(tr).omega, w0, bin);
}

TEST(TrajectoryFrequency, DecayingTrajectoryHasNoOscillation) {
  auto p = mean_field(0.4, 1.3);
  IntegrationOptions o;
  o.t_end = 100.0;
  o.dt = 0.02;
  const auto tr = dde_integrate(p, [](double) { return MeanFieldState{0.2, 0.1, 0.4}; }, o);
  EXPECT_THROW(trajectory_frequency(tr), NumericalError);
}

TEST(Hopf, MatchedDelayAnchor) {
  const auto p = mean_field(0.0, 0.0);
  const auto curve = hopf_continuation(p, 2.0, {2.0});
  ASSERT_EQ(curve.points.size(), 1u);
  const auto& hp = curve.points.front();
  SystemConfig c = symmetric_config({0.5, 0.5, 0.0, 0.0, 2.0}, 0.0);
  const double eps_c = critical_pump_for_delay(c);
  c.pump.magnitude = eps_c;
  const auto cp = critical_nu_tau(c);
  EXPECT_NEAR(hp.x, eps_c, 1e-9);
  EXPECT_NEAR(hp.omega, cp.nu_c, 1e-6);
  EXPECT_LT(std::abs(hp.re_leading), 1e-6);
}

TEST(Hopf, CurveTrendAndBracketing) {
  const auto p = mean_field(0.0, 0.0);
  const auto curve = hopf_continuation(p, 2.0, {0.5, 1.0, 1.5, 2.0, 3.0, 4.0});
  ASSERT_EQ(curve.points.size(), 6u);
  EXPECT_TRUE(curve.failures.empty());
  for (std::size_t i = 1; i < curve.points.size(); ++i) EXPECT_LT(curve.points[i].x, curve.points[i - 1].x);
  for (const auto& hp : curve.points) {
    EXPECT_GT(hp.omega, 0.0);
    const double d = 1e-4 * hp.x;
    EXPECT_TRUE(is_stable(hopf_config(p, hp.x - d, hp.ka_tau_a, 2.0)).stable());
    EXPECT_EQ(is_stable(hopf_config(p, hp.x + d, hp.ka_tau_a, 2.0)).status, Stability::unstable);
  }
}

TEST(Hopf, NoCrossingWithoutPump) {
  const auto p = mean_field(0.0, 0.0);
  EXPECT_FALSE(hopf_point(p, 1.0, 2.0, 0.0, 1e-6, HopfOptions{}).has_value());
}

TEST(Hopf, OscillationAboveCurveMatchesHopfFrequency) {
  const auto p0 = mean_field(0.0, 0.0);
  const auto hp = hopf_continuation(p0, 2.0, {3.0}).points.at(0);
  const auto p = mean_field(1.05 * hp.x, 3.0);
  IntegrationOptions o;
  o.t_end = 3000.0;
  o.dt = 0.02;
  o.record_every = 5;
  const auto f = trajectory_frequency(dde_integrate(p, o));
  EXPECT_NEAR(f.omega / hp.omega, 1.0, 0.05);
}
