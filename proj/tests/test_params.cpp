#include <gtest/gtest.h>

#include <random>

#include "tdcf/params.hpp"

using namespace tdcf;

namespace {

ModeParams mode(double k1, double k2, double loss = 0.0, double phi = 0.0, double tau = 0.0) {
  return {k1, k2, loss, phi, tau};
}

bool has_error(const ValidationReport& r, const std::string& text) {
  for (const auto& e : r.errors)
    if (e.message.find(text) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST(DerivedKappa, SumsMirrorRates) {
  EXPECT_DOUBLE_EQ(derived_kappa(mode(0.5, 0.5)), 1.0);
  EXPECT_NEAR(derived_kappa(mode(0.933, 0.067)), 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(derived_kappa(mode(0.0, 1.0)), 1.0);
}

TEST(FeedbackStrength, Examples) {
  EXPECT_DOUBLE_EQ(derived_feedback_strength(mode(0.5, 0.5)), 1.0);
  EXPECT_NEAR(derived_feedback_strength(mode(0.933, 0.067)), 0.50004, 1e-5);
  EXPECT_EQ(derived_feedback_strength(mode(0.3, 0.7, 1.0)), 0.0);
  EXPECT_EQ(derived_feedback_strength(mode(0.0, 1.0)), 0.0);
}

TEST(FeedbackStrength, NeverExceedsTotalDecay) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> rate(0.0, 5.0), frac(0.0, 1.0);
  for (int i = 0; i < 10000; ++i) {
    const ModeParams m = mode(rate(rng), rate(rng), frac(rng));
    EXPECT_LE(derived_feedback_strength(m), derived_kappa(m) * (1 + 1e-15));
    EXPECT_GE(derived_feedback_strength(m), 0.0);
  }
}

TEST(Validate, LossOutOfRange) {
  SystemConfig c;
  c.mode_a.loss = 1.2;
  const auto r = validate(c);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(has_error(r, "loss out of range"));
  EXPECT_EQ(r.errors.front().field, "mode_a.loss");
  EXPECT_THROW(require_valid(c), ValidationError);
}

TEST(Validate, ZeroTotalDecay) {
  SystemConfig c;
  c.mode_b.kappa1 = 0.0;
  c.mode_b.kappa2 = 0.0;
  const auto r = validate(c);
  ASSERT_FALSE(r.ok());
  EXPECT_TRUE(has_error(r, "zero total decay"));
}

TEST(Validate, ReportsEveryViolation) {
  SystemConfig c;
  c.mode_a.kappa1 = -0.1;
  c.mode_b.tau = -2.0;
  c.pump.magnitude = -0.1;
  const auto r = validate(c);
  EXPECT_EQ(r.errors.size(), 3u);
  EXPECT_NE(r.summary().find("mode_b.tau"), std::string::npos);
}

TEST(Normalize, Fig3StyleConfigInPhysicalUnits) {
  const double kappa = 10.0 * 2.0 * std::numbers::pi;  // rad/us
  ModeParams m = mode(kappa / 2, kappa / 2, 0.0, 0.0, 1.8833 / kappa);
  const SystemConfig c = symmetric_config(m, 2.0 * kappa / 3.0);
  const Normalized n = normalize(c);
  EXPECT_NEAR(derived_kappa(n.config.mode_a), 1.0, 1e-15);
  EXPECT_NEAR(n.config.pump.magnitude, 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(n.config.mode_a.tau, 1.8833, 1e-13);
  EXPECT_DOUBLE_EQ(n.kappa_a, kappa);
}

TEST(Normalize, RoundTripProperty) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rate(0.01, 100.0), frac(0.0, 1.0), ang(-7.0, 7.0);
  auto rel = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(a), 1e-300); };
  for (int i = 0; i < 2000; ++i) {
    SystemConfig c;
    c.mode_a = mode(rate(rng), rate(rng), frac(rng), ang(rng), rate(rng));
    c.mode_b = mode(rate(rng), rate(rng), frac(rng), ang(rng), rate(rng));
    c.pump = {rate(rng), ang(rng)};
    c.delta = ang(rng) * rate(rng);
    c.theta_prime = ang(rng);
    const SystemConfig back = normalize(c).restore();
    for (auto [x, y] : {std::pair{c.mode_a.kappa1, back.mode_a.kappa1}, {c.mode_a.kappa2, back.mode_a.kappa2},
                        {c.mode_b.kappa1, back.mode_b.kappa1}, {c.mode_b.kappa2, back.mode_b.kappa2},
                        {c.mode_a.tau, back.mode_a.tau}, {c.mode_b.tau, back.mode_b.tau},
                        {c.pump.magnitude, back.pump.magnitude}, {c.delta, back.delta}})
      EXPECT_TRUE(rel(x, y)) << x << " vs " << y;
    EXPECT_EQ(c.mode_a.loss, back.mode_a.loss);
    EXPECT_EQ(c.mode_a.phi, back.mode_a.phi);
    EXPECT_EQ(c.theta_prime, back.theta_prime);
  }
}

TEST(ModeSeparation, AdvisoryRatio) {
  SystemConfig c;  // kappa = 1
  c.delta = 5.0;
  EXPECT_TRUE(check_mode_separation(c));
  c.delta = 4.9;
  EXPECT_FALSE(check_mode_separation(c));
  EXPECT_TRUE(check_mode_separation(c, 9.0));
  c.delta = 0.0;
  EXPECT_TRUE(validate(c).ok());
}
