#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tdcf/error.hpp"
#include "tdcf/params.hpp"

namespace tdcf {

/// Everything a config file can carry: the linear model plus the two extra
/// constants of the mean-field model.
struct ConfigFile {
  SystemConfig system;
  double chi_nl = 1.0;
  double kappa_gamma = 1.0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view text, const std::string& where) {
  text = trim(text);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || text.empty())
    throw ValidationError(where + ": not a number: '" + std::string(text) + "'");
  return v;
}

struct FieldAccess {
  std::function<double(const ConfigFile&)> get;
  std::function<void(ConfigFile&, double)> set;
};

inline void add_mode_fields(std::map<std::string, FieldAccess>& t, const std::string& prefix,
                            ModeParams SystemConfig::*mode) {
  auto field = [&](const char* name, double ModeParams::*f) {
    t[prefix + name] = {[=](const ConfigFile& c) { return (c.system.*mode).*f; },
                        [=](ConfigFile& c, double v) { (c.system.*mode).*f = v; }};
  };
  field("kappa1", &ModeParams::kappa1);
  field("kappa2", &ModeParams::kappa2);
  field("loss", &ModeParams::loss);
  field("phi", &ModeParams::phi);
  field("tau", &ModeParams::tau);
  // kappa1 / kappa at fixed kappa
  t[prefix + "kappa1_fraction"] = {
      [=](const ConfigFile& c) {
        const auto& m = c.system.*mode;
        return m.kappa1 / derived_kappa(m);
      },
      [=](ConfigFile& c, double v) {
        auto& m = c.system.*mode;
        const double k = derived_kappa(m);
        m.kappa1 = v * k;
        m.kappa2 = (1.0 - v) * k;
      }};
}

inline const std::map<std::string, FieldAccess>& field_table() {
  static const std::map<std::string, FieldAccess> table = [] {
    std::map<std::string, FieldAccess> t;
    add_mode_fields(t, "mode_a.", &SystemConfig::mode_a);
    add_mode_fields(t, "mode_b.", &SystemConfig::mode_b);
    for (const char* f : {"kappa1", "kappa2", "loss", "phi", "tau", "kappa1_fraction"}) {
      const std::string a = std::string("mode_a.") + f, b = std::string("mode_b.") + f;
      t[std::string("both.") + f] = {[a](const ConfigFile& c) { return field_table().at(a).get(c); },
                                     [a, b](ConfigFile& c, double v) {
                                       field_table().at(a).set(c, v);
                                       field_table().at(b).set(c, v);
                                     }};
    }
    t["pump.magnitude"] = {[](const ConfigFile& c) { return c.system.pump.magnitude; },
                           [](ConfigFile& c, double v) { c.system.pump.magnitude = v; }};
    t["pump.theta"] = {[](const ConfigFile& c) { return c.system.pump.theta; },
                       [](ConfigFile& c, double v) { c.system.pump.theta = v; }};
    t["delta"] = {[](const ConfigFile& c) { return c.system.delta; },
                  [](ConfigFile& c, double v) { c.system.delta = v; }};
    t["theta_prime"] = {[](const ConfigFile& c) { return c.system.theta_prime; },
                        [](ConfigFile& c, double v) { c.system.theta_prime = v; }};
    t["semiclassical.chi_nl"] = {[](const ConfigFile& c) { return c.chi_nl; },
                                 [](ConfigFile& c, double v) { c.chi_nl = v; }};
    t["semiclassical.kappa_gamma"] = {[](const ConfigFile& c) { return c.kappa_gamma; },
                                      [](ConfigFile& c, double v) { c.kappa_gamma = v; }};
    return t;
  }();
  return table;
}

}  // namespace detail

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

/// All settable paths, including the derived `both.*` and `*.kappa1_fraction`.
inline std::vector<std::string> field_paths() {
  std::vector<std::string> out;
  for (const auto& [k, _] : detail::field_table()) out.push_back(k);
  return out;
}

inline bool is_field_path(const std::string& path) { return detail::field_table().count(path) > 0; }

inline double get_field(const ConfigFile& c, const std::string& path) {
  auto it = detail::field_table().find(path);
  if (it == detail::field_table().end()) throw ValidationError("unknown parameter path '" + path + "'");
  return it->second.get(c);
}

inline void set_field(ConfigFile& c, const std::string& path, double value) {
  auto it = detail::field_table().find(path);
  if (it == detail::field_table().end()) throw ValidationError("unknown parameter path '" + path + "'");
  it->second.set(c, value);
}

inline double get_field(const SystemConfig& s, const std::string& path) {
  ConfigFile c;
  c.system = s;
  return get_field(c, path);
}

inline void set_field(SystemConfig& s, const std::string& path, double value) {
  ConfigFile c;
  c.system = s;
  set_field(c, path, value);
  s = c.system;
}

/// Applies one `key = value` assignment (also used for --set overrides).
inline void apply_assignment(ConfigFile& c, std::string_view line, const std::string& where) {
  const auto eq = line.find('=');
  if (eq == std::string_view::npos) throw ValidationError(where + ": expected 'name = value'");
  const std::string key(detail::trim(line.substr(0, eq)));
  if (!is_field_path(key)) throw ValidationError(where + ": unknown field '" + key + "'");
  set_field(c, key, detail::parse_double(line.substr(eq + 1), where + " (" + key + ")"));
}

/// Parses the flat `name = value` format. Does not validate physics.
inline ConfigFile parse_config(std::istream& in, const std::string& source = "<config>") {
  ConfigFile c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view v = line;
    if (auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
    v = detail::trim(v);
    if (v.empty()) continue;
    apply_assignment(c, v, source + ":" + std::to_string(lineno));
  }
  return c;
}

inline ConfigFile parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return parse_config(in, path);
}

/// Writes every primary field, one per line, in parse_config's format.
inline std::string write_config(const ConfigFile& c) {
  std::string out;
  for (const auto& [key, access] : detail::field_table()) {
    if (key.starts_with("both.") || key.ends_with("kappa1_fraction")) continue;
    out += key + " = " + format_double(access.get(c)) + "\n";
  }
  return out;
}

}  // namespace tdcf
