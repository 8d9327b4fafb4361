#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tdcf/config_io.hpp"
#include "tdcf/oracle.hpp"
#include "tdcf/output.hpp"
#include "tdcf/semiclassical.hpp"
#include "tdcf/spectrum.hpp"
#include "tdcf/stability.hpp"
#include "tdcf/sweep.hpp"

using namespace tdcf;
using json = nlohmann::json;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

enum class Units { kappa, khz_mhz };

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string out = "-";
  std::uint64_t seed = 1;
  int threads = 1;
  Units units = Units::kappa;

  // frequency scale between the user's units and the internal ones
  double freq() const { return units == Units::khz_mhz ? two_pi : 1.0; }
};

// In khz-mhz mode every rate and frequency is an ordinary frequency in MHz
// and every delay is in microseconds; internally rates are angular (rad/us).
ConfigFile to_internal(ConfigFile c, const Common& g) {
  const double s = g.freq();
  if (s == 1.0) return c;
  c.system = rescale(c.system, 1.0 / s);
  c.chi_nl *= s;
  c.kappa_gamma *= s;
  return c;
}

ConfigFile load(const Common& g) {
  ConfigFile c = g.config.empty() ? ConfigFile{} : load_config(g.config);
  for (const auto& s : g.sets) apply_assignment(c, s, "--set");
  return to_internal(c, g);
}

void emit(const Common& g, const std::string& text) {
  if (g.out.empty() || g.out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(g.out);
  if (!f) throw ValidationError("cannot write '" + g.out + "'");
  f << text;
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json root_json(const StabilityRoot& r, double s) {
  return {{"re", r.lambda.real() / s}, {"im", r.lambda.imag() / s}, {"residual", r.residual},
          {"branch", r.branch}, {"multiplicity_hint", r.multiplicity_hint}};
}

Axis parse_axis(const std::string& text) {
  // path:min:max:n
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i)
    if (i == text.size() || text[i] == ':') {
      parts.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  if (parts.size() != 4) throw ValidationError("axis '" + text + "': expected path:min:max:n");
  Axis a;
  a.path = parts[0];
  try {
    a.min = std::stod(parts[1]);
    a.max = std::stod(parts[2]);
    a.n = std::stoi(parts[3]);
  } catch (const std::exception&) {
    throw ValidationError("axis '" + text + "': bad number");
  }
  return a;
}

// Axis values are given in the user's units.
double axis_scale(const std::string& path, const Common& g) {
  const bool rate = path.ends_with("kappa1") || path.ends_with("kappa2") || path == "delta" ||
                    path == "pump.magnitude" || path.starts_with("semiclassical.");
  const bool delay = path.ends_with(".tau");
  if (rate) return g.freq();
  if (delay) return 1.0 / g.freq();
  return 1.0;
}

void require_not_unstable(const SystemConfig& c) {
  const auto v = is_stable(c);
  if (v.status == Stability::unstable)
    throw UnstableConfiguration("configuration is unstable (leading root Re = " +
                                format_double(v.leading.lambda.real()) + ")");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Squeezing spectra, stability and sweeps for a delayed coherent-feedback NDPO"};
  app.require_subcommand(1);
  app.fallthrough();
  Common g;
  std::map<std::string, Units> unit_map{{"kappa", Units::kappa}, {"khz-mhz", Units::khz_mhz}};
  app.add_option("--seed", g.seed, "RNG seed (oracle)");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--units", g.units, "kappa: rates in units of kappa; khz-mhz: rates in MHz, delays in us")
      ->transform(CLI::CheckedTransformer(unit_map, CLI::ignore_case));

  auto common = [&](CLI::App* sub) {
    sub->add_option("config", g.config, "config file (name = value lines)");
    sub->add_option("--set", g.sets, "override, e.g. --set both.tau=1.5")->allow_extra_args(false);
    sub->add_option("-o,--out", g.out, "output path, - for stdout");
  };

  // spectrum
  auto* spec = app.add_subcommand("spectrum", "chi(nu) as CSV");
  common(spec);
  std::optional<double> nu_min, nu_max;
  std::size_t points = 2001;
  bool allow_unstable = false;
  spec->add_option("--nu-min", nu_min);
  spec->add_option("--nu-max", nu_max);
  spec->add_option("--points", points)->check(CLI::Range(2, 10000000));
  spec->add_flag("--allow-unstable", allow_unstable, "evaluate even when the steady state is unstable");

  // stability
  auto* stab = app.add_subcommand("stability", "roots of the characteristic equations as JSON");
  common(stab);
  std::string contour;
  int contour_n = 201;
  stab->add_option("--contour", contour, "also write the residual grid of both branches to this CSV prefix");
  stab->add_option("--contour-points", contour_n)->check(CLI::Range(2, 5000));

  // critical
  auto* crit = app.add_subcommand("critical", "closed-form critical frequency and delay as JSON");
  common(crit);
  CriticalBranch branch;
  bool pump_for_delay = false;
  crit->add_option("--equation", branch.equation)->check(CLI::IsMember({1, 2}));
  crit->add_option("--sign", branch.sign)->check(CLI::IsMember({-1, 1}));
  crit->add_option("--n", branch.n)->check(CLI::NonNegativeNumber);
  crit->add_flag("--pump-for-delay", pump_for_delay, "solve for the critical |eps| at the configured delay");

  // hopf
  auto* hopf = app.add_subcommand("hopf", "stability boundary of the mean-field model as CSV");
  common(hopf);
  double kb_tau_b = 2.0, kt_min = 0.5, kt_max = 4.0;
  int kt_n = 15;
  hopf->add_option("--kb-tau-b", kb_tau_b);
  hopf->add_option("--ka-tau-a-min", kt_min);
  hopf->add_option("--ka-tau-a-max", kt_max);
  hopf->add_option("--points", kt_n)->check(CLI::Range(1, 100000));

  // sweep
  auto* sweep = app.add_subcommand("sweep", "best entanglement over a 1-D or 2-D grid");
  common(sweep);
  std::string ax, ay, objective = "min_chi", format = "csv";
  double half_window = 0.0;
  int grid_points = 2001;
  sweep->add_option("--x", ax, "path:min:max:n")->required();
  sweep->add_option("--y", ay, "path:min:max:n");
  sweep->add_option("--objective", objective)
      ->check(CLI::IsMember({"min_chi", "min_s_db", "argmin_nu", "stability_flag"}));
  sweep->add_option("--window", half_window, "half-width of the frequency window");
  sweep->add_option("--grid-points", grid_points)->check(CLI::Range(3, 10000000));
  sweep->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}));

  // oracle
  auto* orc = app.add_subcommand("oracle", "Monte-Carlo estimate of chi(nu) as CSV");
  common(orc);
  SimRun run;
  std::string scheme = "heun";
  orc->add_option("--dt", run.dt);
  orc->add_option("--t-total", run.t_total);
  orc->add_option("--n-traj", run.n_traj);
  orc->add_option("--nu-max", run.nu_max);
  orc->add_option("--scheme", scheme)->check(CLI::IsMember({"heun", "euler"}));

  // validate
  auto* val = app.add_subcommand("validate", "check a config file");
  common(val);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    const double s = g.freq();
    if (*val) {
      const ConfigFile c = load(g);
      const auto report = validate(c.system);
      for (const auto& e : report.errors) std::cerr << e.field << ": " << e.message << "\n";
      if (!report.ok()) return 1;
      emit(g, write_config(c));
      return 0;
    }

    const ConfigFile cfg = load(g);
    const SystemConfig& c = require_valid(cfg.system);

    if (*spec) {
      if (!allow_unstable) require_not_unstable(c);
      const double w = default_half_window(c) / s;
      auto curve = spectrum_curve(c, nu_min.value_or(-w) * s, nu_max.value_or(w) * s, points);
      for (double& v : curve.nu) v /= s;
      emit(g, csv::spectrum(curve));
    } else if (*stab) {
      const auto roots = find_roots(c);
      const auto verdict = classify(roots, derived_kappa(c.mode_a));
      json j;
      j["status"] = to_string(verdict.status);
      j["leading"] = root_json(verdict.leading, s);
      j["seeds"] = roots.seeds;
      j["nonconverged"] = roots.nonconverged;
      j["roots"] = json::array();
      for (const auto& r : roots.roots) j["roots"].push_back(root_json(r, s));
      emit(g, j.dump(2) + "\n");
      if (!contour.empty()) {
        const double ka = derived_kappa(c.mode_a);
        const double im = std::abs(c.delta) + 5.0 * ka;
        for (int b : {1, 2}) {
          auto grid = residual_grid(c, b, -3.0 * ka, 1.0 * ka, -im, im, contour_n, contour_n);
          for (auto& p : grid) p.lambda /= s;
          std::ofstream f(contour + "_branch" + std::to_string(b) + ".csv");
          if (!f) throw ValidationError("cannot write contour file");
          f << csv::residuals(grid, b);
        }
      }
    } else if (*crit) {
      json j;
      if (pump_for_delay) {
        j["eps_c"] = critical_pump_for_delay(c) / s;
      } else {
        const auto cp = critical_nu_tau(c, branch);
        j = {{"nu_c", cp.nu_c / s}, {"tau_c", cp.tau_c * s}, {"branch_index", cp.branch_index},
             {"residual", cp.residual}, {"equation", branch.equation}, {"sign", branch.sign}};
      }
      emit(g, j.dump(2) + "\n");
    } else if (*hopf) {
      const auto p = SemiclassicalParams::from_config(c, cfg.chi_nl, cfg.kappa_gamma);
      std::vector<double> kts;
      for (int i = 0; i < kt_n; ++i) kts.push_back(kt_n == 1 ? kt_min : kt_min + (kt_max - kt_min) * i / (kt_n - 1));
      auto curve = hopf_continuation(p, kb_tau_b, kts);
      for (auto& pt : curve.points) {
        pt.omega /= s;
        pt.re_leading /= s;
      }
      for (const auto& f : curve.failures) std::cerr << "ka_tau_a=" << f.ka_tau_a << ": " << f.message << "\n";
      emit(g, csv::hopf(curve));
      if (curve.points.empty()) throw NumericalError("no Hopf point found");
    } else if (*sweep) {
      SweepSpec sp;
      sp.axis_x = parse_axis(ax);
      if (!ay.empty()) sp.axis_y = parse_axis(ay);
      sp.objective = parse_objective(objective);
      sp.best.grid_points = grid_points;
      sp.best.half_window = half_window * s;
      sp.threads = g.threads;
      auto scale_axis = [&](Axis& a) {
        const double k = axis_scale(a.path, g);
        a.min *= k;
        a.max *= k;
      };
      scale_axis(sp.axis_x);
      if (sp.axis_y) scale_axis(*sp.axis_y);
      auto res = run_sweep(sp, cfg);
      for (auto& r : res.records) {
        r.x /= axis_scale(sp.axis_x.path, g);
        if (sp.axis_y) r.y /= axis_scale(sp.axis_y->path, g);
        r.nu_star /= s;
      }
      res.spec.axis_x = parse_axis(ax);
      if (sp.axis_y) res.spec.axis_y = parse_axis(ay);
      if (format == "csv") {
        emit(g, csv::sweep(res));
      } else {
        json j;
        j["x"] = res.spec.axis_x.path;
        j["y"] = res.spec.axis_y ? json(res.spec.axis_y->path) : json(nullptr);
        j["objective"] = objective;
        j["cells"] = json::array();
        for (const auto& r : res.records) {
          const bool has = r.stable && r.error.empty();
          j["cells"].push_back({{"x", r.x},
                                {"y", res.spec.axis_y ? json(r.y) : json(nullptr)},
                                {"min_chi", has ? num(r.min_chi) : json(nullptr)},
                                {"s_db_min", has ? num(r.s_db_min) : json(nullptr)},
                                {"nu_star", has ? num(r.nu_star) : json(nullptr)},
                                {"stable", r.stable},
                                {"at_pole", r.at_pole},
                                {"status", r.error.empty() ? to_string(r.status) : "error"},
                                {"error", r.error.empty() ? json(nullptr) : json(r.error)}});
        }
        emit(g, j.dump(2) + "\n");
      }
    } else if (*orc) {
      run.config = c;
      run.seed = g.seed;
      run.threads = g.threads;
      run.dt /= s;
      run.t_total /= s;
      run.nu_max *= s;
      run.scheme = scheme == "euler" ? Integrator::euler_maruyama : Integrator::heun;
      auto res = simulate(run);
      for (double& v : res.nu) v /= s;
      res.run.dt *= s;
      res.run.t_total *= s;
      emit(g, csv::oracle(res));
    }
    return 0;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const UnstableConfiguration& e) {
    std::cerr << "unstable: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }
}
