#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "tdcf/error.hpp"

namespace tdcf {

/// Cavity and feedback-loop parameters for one down-converted mode.
///
/// Rates are angular frequencies, the delay is a time, both in whatever unit
/// system the caller chose (the library is homogeneous in the rate scale).
struct ModeParams {
  double kappa1 = 0.5;  ///< decay through mirror 1 (feeds the loop)
  double kappa2 = 0.5;  ///< decay through mirror 2 (monitored port)
  double loss = 0.0;    ///< loop loss fraction L
  double phi = 0.0;     ///< loop phase shift
  double tau = 0.0;     ///< loop delay

  friend bool operator==(const ModeParams&, const ModeParams&) = default;
};

struct PumpParams {
  double magnitude = 0.0;  ///< |epsilon|
  double theta = 0.0;      ///< pump phase

  friend bool operator==(const PumpParams&, const PumpParams&) = default;
};

/// Full parameter set of the parametric oscillator with two feedback loops.
///
/// `theta_prime` is the combined quadrature angle used by every spectrum
/// routine; a nonzero pump phase is expected to be folded into it already.
struct SystemConfig {
  ModeParams mode_a;
  ModeParams mode_b;
  PumpParams pump;
  double delta = 0.0;  ///< half the mode-frequency difference
  double theta_prime = std::numbers::pi;

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

inline double derived_kappa(const ModeParams& m) { return m.kappa1 + m.kappa2; }

/// Feedback strength k = 2 sqrt(kappa1 kappa2 (1 - L)).
inline double derived_feedback_strength(const ModeParams& m) {
  const double prod = m.kappa1 * m.kappa2 * (1.0 - m.loss);
  return prod > 0.0 ? 2.0 * std::sqrt(prod) : 0.0;
}

struct FieldError {
  std::string field;
  std::string message;
};

struct ValidationReport {
  std::vector<FieldError> errors;

  bool ok() const { return errors.empty(); }

  std::string summary() const {
    std::string out;
    for (const auto& e : errors) {
      if (!out.empty()) out += "; ";
      out += e.field + ": " + e.message;
    }
    return out;
  }
};

namespace detail {

inline void check_mode(const ModeParams& m, const std::string& prefix,
                       std::vector<FieldError>& errors) {
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) {
      errors.push_back({prefix + name, "not a finite number"});
      return false;
    }
    return true;
  };
  const bool k1 = finite(m.kappa1, "kappa1");
  const bool k2 = finite(m.kappa2, "kappa2");
  finite(m.phi, "phi");
  if (k1 && m.kappa1 < 0.0) errors.push_back({prefix + "kappa1", "negative decay rate"});
  if (k2 && m.kappa2 < 0.0) errors.push_back({prefix + "kappa2", "negative decay rate"});
  if (k1 && k2 && m.kappa1 + m.kappa2 <= 0.0)
    errors.push_back({prefix + "kappa", "zero total decay"});
  if (finite(m.loss, "loss") && (m.loss < 0.0 || m.loss > 1.0))
    errors.push_back({prefix + "loss", "loss out of range [0, 1]"});
  if (finite(m.tau, "tau") && m.tau < 0.0)
    errors.push_back({prefix + "tau", "negative delay"});
}

}  // namespace detail

inline ValidationReport validate(const SystemConfig& c) {
  ValidationReport r;
  detail::check_mode(c.mode_a, "mode_a.", r.errors);
  detail::check_mode(c.mode_b, "mode_b.", r.errors);
  if (!std::isfinite(c.pump.magnitude) || c.pump.magnitude < 0.0)
    r.errors.push_back({"pump.magnitude", "must be finite and >= 0"});
  if (!std::isfinite(c.pump.theta)) r.errors.push_back({"pump.theta", "not a finite number"});
  if (!std::isfinite(c.delta)) r.errors.push_back({"delta", "not a finite number"});
  if (!std::isfinite(c.theta_prime))
    r.errors.push_back({"theta_prime", "not a finite number"});
  return r;
}

/// Throws ValidationError listing every violated field.
inline const SystemConfig& require_valid(const SystemConfig& c) {
  if (auto r = validate(c); !r.ok()) throw ValidationError(r.summary());
  return c;
}

/// Rescales all rates by 1/scale and all delays by scale.
inline SystemConfig rescale(SystemConfig c, double scale) {
  for (ModeParams* m : {&c.mode_a, &c.mode_b}) {
    m->kappa1 /= scale;
    m->kappa2 /= scale;
    m->tau *= scale;
  }
  c.pump.magnitude /= scale;
  c.delta /= scale;
  return c;
}

/// Result of normalizing to kappa_a = 1 units; `kappa_a` undoes it.
struct Normalized {
  SystemConfig config;
  double kappa_a = 1.0;

  SystemConfig restore() const { return rescale(config, 1.0 / kappa_a); }
};

inline Normalized normalize(const SystemConfig& c) {
  require_valid(c);
  const double ka = derived_kappa(c.mode_a);
  return {rescale(c, ka), ka};
}

/// Advisory check that the split modes are resolvable: 2*delta >= factor*kappa
/// for both modes. Never an error, many useful configurations have delta = 0.
inline bool check_mode_separation(const SystemConfig& c, double factor = 10.0) {
  const double kmax = std::max(derived_kappa(c.mode_a), derived_kappa(c.mode_b));
  return 2.0 * std::abs(c.delta) >= factor * kmax;
}

/// Symmetric configuration helper: both modes share `mode`.
inline SystemConfig symmetric_config(const ModeParams& mode, double eps, double delta = 0.0,
                                     double theta_prime = std::numbers::pi) {
  SystemConfig c;
  c.mode_a = mode;
  c.mode_b = mode;
  c.pump.magnitude = eps;
  c.delta = delta;
  c.theta_prime = theta_prime;
  return c;
}

}  // namespace tdcf
