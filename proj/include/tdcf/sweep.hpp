#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "tdcf/config_io.hpp"
#include "tdcf/error.hpp"
#include "tdcf/params.hpp"
#include "tdcf/spectrum.hpp"
#include "tdcf/stability.hpp"

namespace tdcf {

struct BestOptions {
  /// Half-width of the frequency window. <= 0 selects |delta| + 6 kappa_a.
  double half_window = 0.0;
  int grid_points = 2001;
  int candidates = 3;
  bool check_stability = true;
  /// > 0: decide stability from the roots with Re lambda >= -strip_margin only.
  double strip_margin = 0.5;
  StabilityOptions stability;
  SpectrumOptions spectrum;
};

struct BestResult {
  double min_chi = std::numeric_limits<double>::quiet_NaN();
  double nu_star = std::numeric_limits<double>::quiet_NaN();
  double s_db_min = std::numeric_limits<double>::quiet_NaN();
  Stability status = Stability::stable;
  /// True when every grid point was at a pole.
  bool at_pole = false;
  double coarse_min = std::numeric_limits<double>::quiet_NaN();

  bool evaluated() const { return std::isfinite(min_chi); }
};

inline double default_half_window(const SystemConfig& c) { return std::abs(c.delta) + 6.0 * derived_kappa(c.mode_a); }

/// Global minimum of chi over [-w, w]: coarse grid, then bounded Brent
/// minimization around the best candidates. chi is even in nu, so nu_star is
/// reported as the non-negative representative.
inline BestResult best_entanglement(const SystemConfig& c, const BestOptions& o = {}) {
  require_valid(c);
  BestResult out;
  if (o.check_stability) {
    const auto verdict =
        o.strip_margin > 0.0 ? is_stable_strip(c, o.strip_margin, o.stability) : is_stable(c, o.stability);
    out.status = verdict.status;
    if (out.status == Stability::unstable) return out;
  }
  const double w = o.half_window > 0.0 ? o.half_window : default_half_window(c);
  const int n = std::max(3, o.grid_points);
  const double h = 2.0 * w / (n - 1);

  std::vector<double> nu(n), chi(n);
  bool any = false;
  for (int i = 0; i < n; ++i) {
    nu[i] = -w + h * i;
    const auto v = chi_out(c, nu[i], o.spectrum);
    chi[i] = v.at_pole ? std::numeric_limits<double>::infinity() : v.value;
    any = any || !v.at_pole;
  }
  if (!any) {
    out.at_pole = true;
    out.status = Stability::critical;
    return out;
  }

  // local minima of the grid, best first, ties toward smaller |nu|
  std::vector<int> idx;
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(chi[i])) continue;
    const bool left = i == 0 || chi[i] <= chi[i - 1];
    const bool right = i == n - 1 || chi[i] <= chi[i + 1];
    if (left && right) idx.push_back(i);
  }
  auto better = [&](double va, double na, double vb, double nb) {
    if (va != vb) return va < vb;
    return std::abs(na) < std::abs(nb);
  };
  std::sort(idx.begin(), idx.end(), [&](int a, int b) { return better(chi[a], nu[a], chi[b], nu[b]); });

  double best_v = chi[idx.front()], best_nu = nu[idx.front()];
  out.coarse_min = best_v;
  auto f = [&](double x) {
    const auto v = chi_out(c, x, o.spectrum);
    return v.at_pole ? std::numeric_limits<double>::infinity() : v.value;
  };
  const int m = std::min<int>(o.candidates, static_cast<int>(idx.size()));
  for (int j = 0; j < m; ++j) {
    const int i = idx[j];
    const double lo = nu[std::max(0, i - 1)], hi = nu[std::min(n - 1, i + 1)];
    boost::uintmax_t iters = 200;
    const auto [x, v] = boost::math::tools::brent_find_minima(f, lo, hi, 52, iters);
    if (std::isfinite(v) && better(v, x, best_v, best_nu)) {
      best_v = v;
      best_nu = x;
    }
  }
  out.min_chi = best_v;
  out.nu_star = std::abs(best_nu);
  out.s_db_min = to_db(best_v);
  return out;
}

enum class Objective { min_chi, min_s_db, argmin_nu, stability_flag };

inline const char* to_string(Objective o) {
  switch (o) {
    case Objective::min_chi: return "min_chi";
    case Objective::min_s_db: return "min_s_db";
    case Objective::argmin_nu: return "argmin_nu";
    default: return "stability_flag";
  }
}

inline Objective parse_objective(const std::string& s) {
  for (auto o : {Objective::min_chi, Objective::min_s_db, Objective::argmin_nu, Objective::stability_flag})
    if (s == to_string(o)) return o;
  throw ValidationError("unknown objective '" + s + "'");
}

struct Axis {
  std::string path;
  double min = 0.0, max = 1.0;
  int n = 2;

  double at(int i) const { return n == 1 ? min : min + (max - min) * i / (n - 1); }
};

struct SweepSpec {
  Axis axis_x;
  /// Absent for a one-dimensional sweep.
  std::optional<Axis> axis_y;
  Objective objective = Objective::min_chi;
  BestOptions best;
  int threads = 1;
};

struct SweepRecord {
  double x = 0.0, y = 0.0;
  double min_chi = std::numeric_limits<double>::quiet_NaN();
  double s_db_min = std::numeric_limits<double>::quiet_NaN();
  double nu_star = std::numeric_limits<double>::quiet_NaN();
  bool stable = false;
  bool at_pole = false;
  Stability status = Stability::unstable;
  std::string error;
};

struct SweepResult {
  SweepSpec spec;
  int nx = 0, ny = 1;
  /// Row-major: x varies fastest.
  std::vector<SweepRecord> records;

  const SweepRecord& at(int ix, int iy) const { return records[static_cast<std::size_t>(iy) * nx + ix]; }
};

inline void validate(const SweepSpec& s) {
  auto check = [](const Axis& a, const char* name) {
    if (a.n < 2) throw ValidationError(std::string(name) + ": need n >= 2");
    if (!is_field_path(a.path)) throw ValidationError(std::string(name) + ": unknown parameter path '" + a.path + "'");
    if (!std::isfinite(a.min) || !std::isfinite(a.max)) throw ValidationError(std::string(name) + ": non-finite range");
  };
  check(s.axis_x, "axis_x");
  if (s.axis_y) check(*s.axis_y, "axis_y");
}

inline double objective_value(const SweepRecord& r, Objective o) {
  switch (o) {
    case Objective::min_chi: return r.min_chi;
    case Objective::min_s_db: return r.s_db_min;
    case Objective::argmin_nu: return r.nu_star;
    default: return r.stable ? 1.0 : 0.0;
  }
}

inline SweepRecord evaluate_cell(const ConfigFile& base, const SweepSpec& s, double x, double y) {
  SweepRecord r;
  r.x = x;
  r.y = y;
  try {
    ConfigFile cfg = base;
    set_field(cfg, s.axis_x.path, x);
    if (s.axis_y) set_field(cfg, s.axis_y->path, y);
    const auto best = best_entanglement(cfg.system, s.best);
    r.status = best.status;
    r.stable = best.status == Stability::stable && !best.at_pole;
    r.at_pole = best.at_pole;
    if (best.evaluated()) {
      r.min_chi = best.min_chi;
      r.s_db_min = best.s_db_min;
      r.nu_star = best.nu_star;
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

inline SweepResult run_sweep(const SweepSpec& spec, const ConfigFile& base) {
  validate(spec);
  SweepResult res;
  res.spec = spec;
  res.nx = spec.axis_x.n;
  res.ny = spec.axis_y ? spec.axis_y->n : 1;
  const std::size_t total = static_cast<std::size_t>(res.nx) * res.ny;
  res.records.resize(total);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < total; i = next++) {
      const int ix = static_cast<int>(i % res.nx), iy = static_cast<int>(i / res.nx);
      const double y = spec.axis_y ? spec.axis_y->at(iy) : 0.0;
      res.records[i] = evaluate_cell(base, spec, spec.axis_x.at(ix), y);
    }
  };
  const int threads = std::max(1, std::min<int>(spec.threads, static_cast<int>(total)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return res;
}

inline SweepResult run_sweep(const SweepSpec& spec, const SystemConfig& base) {
  ConfigFile c;
  c.system = base;
  return run_sweep(spec, c);
}

}  // namespace tdcf
