#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tdcf/config_io.hpp"
#include "tdcf/oracle.hpp"
#include "tdcf/semiclassical.hpp"
#include "tdcf/spectrum.hpp"
#include "tdcf/stability.hpp"
#include "tdcf/sweep.hpp"

// CSV emitters. Every table starts with a versioned `#` line naming its
// columns; numbers use shortest round-trip formatting and missing values are
// empty fields.

namespace tdcf::csv {

inline std::string num(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return format_double(v);
}

inline std::string flag(bool b) { return b ? "1" : "0"; }

inline std::string escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

inline std::string spectrum(const SpectrumCurve& c) {
  std::string out = "# tdcf spectrum v1\nnu,chi,s_db,at_pole\n";
  for (std::size_t i = 0; i < c.nu.size(); ++i)
    out += num(c.nu[i]) + "," + (c.at_pole[i] ? "" : num(c.chi[i])) + "," + (c.at_pole[i] ? "" : num(c.s_db[i])) +
           "," + flag(c.at_pole[i]) + "\n";
  return out;
}

inline std::string sweep(const SweepResult& r) {
  const auto& s = r.spec;
  std::string out = "# tdcf sweep v1 x=" + s.axis_x.path + " y=" + (s.axis_y ? s.axis_y->path : std::string("-")) +
                    " objective=" + to_string(s.objective) + "\n";
  out += "x,y,min_chi,s_db_min,nu_star,stable,at_pole,status,objective,error\n";
  for (const auto& c : r.records) {
    const bool has = c.stable && c.error.empty();
    out += num(c.x) + "," + (s.axis_y ? num(c.y) : "") + "," + (has ? num(c.min_chi) : "") + "," +
           (has ? num(c.s_db_min) : "") + "," + (has ? num(c.nu_star) : "") + "," + flag(c.stable) + "," +
           flag(c.at_pole) + "," + (c.error.empty() ? to_string(c.status) : "error") + "," +
           (c.error.empty() && (has || s.objective == Objective::stability_flag) ? num(objective_value(c, s.objective))
                                                                                  : "") +
           "," + escape(c.error) + "\n";
  }
  return out;
}

inline std::string oracle(const SimResult& r) {
  std::string out = "# tdcf oracle v1 dt=" + num(r.run.dt) + " t_total=" + num(r.run.t_total) +
                    " n_traj=" + std::to_string(r.run.n_traj) + " seed=" + std::to_string(r.run.seed) +
                    (r.insufficient_data ? " insufficient_data" : "") + "\n";
  out += "nu,chi_hat,stderr,chi_analytic,z\n";
  for (std::size_t i = 0; i < r.nu.size(); ++i)
    out += num(r.nu[i]) + "," + num(r.chi_hat[i]) + "," + num(r.std_error[i]) + "," +
           (r.at_pole[i] ? "" : num(r.chi_analytic[i])) + "," + (r.at_pole[i] ? "" : num(r.z[i])) + "\n";
  return out;
}

inline std::string hopf(const HopfCurve& c) {
  std::string out = "# tdcf hopf v1\nka_tau_a,x,omega,re_leading,bracket_width\n";
  for (const auto& p : c.points)
    out += num(p.ka_tau_a) + "," + num(p.x) + "," + num(p.omega) + "," + num(p.re_leading) + "," +
           num(p.bracket_width) + "\n";
  return out;
}

inline std::string residuals(const std::vector<ResidualSample>& g, int branch) {
  std::string out = "# tdcf residual-grid v1 branch=" + std::to_string(branch) + "\nre,im,f_re,f_im\n";
  for (const auto& s : g)
    out += num(s.lambda.real()) + "," + num(s.lambda.imag()) + "," + num(s.value.real()) + "," +
           num(s.value.imag()) + "\n";
  return out;
}

}  // namespace tdcf::csv
