#include <gtest/gtest.h>

#include "tdcf/config_io.hpp"

using namespace tdcf;

TEST(ConfigIo, ParsesFlatKeyValue) {
  const auto c = parse_config_string(
      "# fig 6b\n"
      "mode_a.tau = 1.8833\n"
      "mode_b.tau = 1.8833   # matched\n"
      "\n"
      "pump.magnitude = 0.75\n"
      "delta = 6.6726\n");
  EXPECT_DOUBLE_EQ(c.system.mode_a.tau, 1.8833);
  EXPECT_DOUBLE_EQ(c.system.mode_b.tau, 1.8833);
  EXPECT_DOUBLE_EQ(c.system.pump.magnitude, 0.75);
  EXPECT_DOUBLE_EQ(c.system.delta, 6.6726);
  EXPECT_DOUBLE_EQ(c.system.mode_a.kappa1, 0.5);
  EXPECT_DOUBLE_EQ(c.system.theta_prime, std::numbers::pi);
}

TEST(ConfigIo, RejectsUnknownKeysAndBadNumbers) {
  EXPECT_THROW(parse_config_string("mode_c.tau = 1\n"), ValidationError);
  EXPECT_THROW(parse_config_string("delta = fast\n"), ValidationError);
  EXPECT_THROW(parse_config_string("delta 3\n"), ValidationError);
  try {
    parse_config_string("delta = 1\nmode_a.los = 0.1\n");
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos);
  }
}

TEST(ConfigIo, DerivedPaths) {
  ConfigFile c;
  set_field(c, "both.tau", 2.0);
  EXPECT_EQ(c.system.mode_a.tau, 2.0);
  EXPECT_EQ(c.system.mode_b.tau, 2.0);
  set_field(c, "mode_a.kappa1_fraction", 0.933);
  EXPECT_NEAR(c.system.mode_a.kappa1, 0.933, 1e-15);
  EXPECT_NEAR(c.system.mode_a.kappa2, 0.067, 1e-15);
  EXPECT_NEAR(get_field(c, "mode_a.kappa1_fraction"), 0.933, 1e-15);
  EXPECT_THROW(get_field(c, "nope"), ValidationError);
}

TEST(ConfigIo, WriteParseRoundTrip) {
  ConfigFile c;
  c.system.mode_a = {0.1 + 0.2, 1.0 / 3.0, 0.05, 0.3, 1.8832785157};
  c.system.mode_b = {0.7, 0.3, 0.0, -1.0, 2.0};
  c.system.pump = {2.0 / 3.0, 0.0};
  c.system.delta = 6.6726;
  c.kappa_gamma = 3.0;
  const auto back = parse_config_string(write_config(c));
  EXPECT_EQ(back.system, c.system);
  EXPECT_EQ(back.kappa_gamma, 3.0);
}
