#pragma once

// INI-style run configuration: [section] headers, key = value lines, # comments.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rmhd/equilibrium.hpp"
#include "rmhd/time_integrator.hpp"

namespace rmhd {

struct OutputParams {
  std::string csv_path = "diagnostics.csv";
  std::string summary_path = "summary.txt";
  long restart_every = 0;  // 0: only the final restart file
  std::uint64_t seed = 20240611;
};

struct RunConfig {
  Grid grid;
  PhysParams physics;
  ModelFlags model;
  RunParams run;
  EquilibriumSpec equilibrium;
  OutputParams output;
  std::string restart_from;  // empty: start from the equilibrium
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::string show(double x) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

template <class T>
T parse_number(const std::string& v, const char* what) {
  T x{};
  const char* b = v.data();
  const char* e = b + v.size();
  if (!v.empty() && *b == '+') ++b;
  auto r = std::from_chars(b, e, x);
  if (r.ec != std::errc() || r.ptr != e) throw ConfigError("expected " + std::string(what) + ", got '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected boolean, got '" + v + "'");
}

inline int parse_var(const std::string& v) {
  for (int k = 0; k < kNumVars; ++k)
    if (v == var_name(k)) return k;
  throw ConfigError("unknown field '" + v + "'");
}

struct Key {
  std::string section, name;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

inline std::vector<Key> config_keys(RunConfig& c) {
  std::vector<Key> k;
  auto real = [&](const char* s, const char* n, double& x) {
    k.push_back({s, n, [&x](const std::string& v) { x = parse_number<double>(v, "number"); },
                 [&x] { return show(x); }});
  };
  auto integer = [&](const char* s, const char* n, int& x) {
    k.push_back({s, n, [&x](const std::string& v) { x = parse_number<int>(v, "integer"); },
                 [&x] { return std::to_string(x); }});
  };
  auto longint = [&](const char* s, const char* n, long& x) {
    k.push_back({s, n, [&x](const std::string& v) { x = parse_number<long>(v, "integer"); },
                 [&x] { return std::to_string(x); }});
  };
  auto boolean = [&](const char* s, const char* n, bool& x) {
    k.push_back({s, n, [&x](const std::string& v) { x = parse_bool(v); },
                 [&x] { return std::string(x ? "true" : "false"); }});
  };
  auto text = [&](const char* s, const char* n, std::string& x) {
    k.push_back({s, n, [&x](const std::string& v) { x = v; }, [&x] { return x; }});
  };

  Grid& g = c.grid;
  real("grid", "R_min", g.R_min);
  real("grid", "R_max", g.R_max);
  real("grid", "Z_min", g.Z_min);
  real("grid", "Z_max", g.Z_max);
  integer("grid", "NR", g.NR);
  integer("grid", "NZ", g.NZ);
  integer("grid", "n_p", g.n_p);
  integer("grid", "N_phi", g.N_phi);

  PhysParams& p = c.physics;
  real("physics", "F0", p.F0);
  real("physics", "gamma", p.gamma);
  real("physics", "eta0", p.eta0);
  real("physics", "eta_exp", p.eta_exp);
  real("physics", "nu0", p.nu0);
  real("physics", "nu_exp", p.nu_exp);
  real("physics", "k_par", p.k_par);
  real("physics", "k_perp", p.k_perp);
  real("physics", "hyper_psi", p.hyper_psi);
  real("physics", "hyper_w", p.hyper_w);
  real("physics", "hyper_rho", p.hyper_rho);
  real("physics", "hyper_p", p.hyper_p);
  real("physics", "hyper_vpar", p.hyper_vpar);
  real("physics", "rho_floor", p.rho_floor);
  real("physics", "T_floor", p.T_floor);

  ModelFlags& f = c.model;
  boolean("model", "with_vpar", f.with_vpar);
  boolean("model", "neglected_terms", f.neglected_terms);
  k.push_back({"model", "bc_variant", [&f](const std::string& v) { f.bc_variant = parse_bc_variant(v); },
               [&f] { return std::string(f.bc_variant == BcVariant::bc ? "bc" : "bc2"); }});
  boolean("model", "resistive_phi_term", f.resistive_phi_term);

  SchemeParams& sc = c.run.scheme;
  real("scheme", "theta", sc.theta);
  real("scheme", "zeta", sc.zeta);

  NewtonParams& n = c.run.newton;
  LinearSolverParams& ls = c.run.linear;
  k.push_back({"newton", "mode", [&n](const std::string& v) { n.mode = parse_newton_mode(v); },
               [&n] { return std::string(to_string(n.mode)); }});
  real("newton", "eps_a", n.eps_a);
  real("newton", "eps_r", n.eps_r);
  integer("newton", "max_iter", n.max_iter);
  real("newton", "gamma_f", n.gamma_f);
  real("newton", "alpha_f", n.alpha_f);
  real("newton", "eps0", n.eps0);
  real("newton", "forcing_floor", n.forcing_floor);
  real("newton", "forcing_ceiling", n.forcing_ceiling);
  real("newton", "gmres_tol", ls.gmres_tol);
  integer("newton", "gmres_restart", ls.restart);
  integer("newton", "gmres_maxit", ls.maxit);
  k.push_back({"newton", "refactor_policy", [&ls](const std::string& v) { ls.refactor = parse_refactor_mode(v); },
               [&ls] { return std::string(ls.refactor == RefactorMode::every_step ? "every_step" : "adaptive"); }});
  integer("newton", "refactor_threshold", ls.refactor_threshold);

  AdaptiveParams& a = c.run.adaptive;
  real("adaptive", "dt0", a.dt0);
  real("adaptive", "dt_min", a.dt_min);
  real("adaptive", "dt_max", a.dt_max);
  real("adaptive", "grow", a.grow);
  real("adaptive", "shrink", a.shrink);
  real("adaptive", "fail_factor", a.fail_factor);
  integer("adaptive", "fast_iters", a.fast_iters);
  integer("adaptive", "slow_iters", a.slow_iters);
  real("adaptive", "max_rise_per_step", a.max_rise_per_step);
  integer("adaptive", "divergence_window", a.divergence_window);

  longint("run", "max_steps", c.run.max_steps);
  real("run", "t_end", c.run.t_end);
  text("run", "restart_from", c.restart_from);

  EquilibriumSpec& e = c.equilibrium;
  k.push_back({"equilibrium", "rhs", [&e](const std::string& v) { e.rhs = parse_gs_rhs(v); },
               [&e] {
                 return std::string(e.rhs == GsRhsKind::manufactured ? "manufactured"
                                    : e.rhs == GsRhsKind::pedestal   ? "pedestal"
                                                                     : "linear_profiles");
               }});
  real("equilibrium", "psi_amp", e.psi_amp);
  real("equilibrium", "c1", e.c1);
  real("equilibrium", "c2", e.c2);
  real("equilibrium", "rho_center", e.rho.center);
  real("equilibrium", "rho_width", e.rho.width);
  real("equilibrium", "rho_floor", e.rho.floor);
  real("equilibrium", "rho_amp", e.rho.amp);
  real("equilibrium", "T_center", e.T.center);
  real("equilibrium", "T_width", e.T.width);
  real("equilibrium", "T_floor", e.T.floor);
  real("equilibrium", "T_amp", e.T.amp);
  k.push_back({"equilibrium", "pressure", [&e](const std::string& v) { e.pressure = parse_pressure_kind(v); },
               [&e] {
                 return std::string(e.pressure == PressureKind::linear     ? "linear"
                                    : e.pressure == PressureKind::pedestal ? "pedestal"
                                                                           : "tanh");
               }});
  real("equilibrium", "ped_center", e.ped_center);
  real("equilibrium", "ped_width", e.ped_width);
  real("equilibrium", "perturbation", e.perturbation);
  k.push_back({"equilibrium", "target", [&e](const std::string& v) { e.target = parse_var(v); },
               [&e] { return std::string(var_name(e.target)); }});

  OutputParams& o = c.output;
  text("output", "csv_path", o.csv_path);
  text("output", "summary_path", o.summary_path);
  longint("output", "restart_every", o.restart_every);
  k.push_back({"output", "seed", [&o](const std::string& v) { o.seed = parse_number<std::uint64_t>(v, "unsigned integer"); },
               [&o] { return std::to_string(o.seed); }});
  return k;
}

}  // namespace detail

/// Re-checks every module invariant. `lines` maps a section to the line of its
/// last assignment so errors point into the file.
inline void validate(const RunConfig& c, const std::map<std::string, int>& lines = {}) {
  auto at = [&](const char* sec, const std::function<void()>& f) {
    const auto it = lines.find(sec);
    const int line = it == lines.end() ? 0 : it->second;
    try {
      f();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), line);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what(), line);
    }
  };
  at("grid", [&] { c.grid.validate(); });
  at("physics", [&] { c.physics.validate(); });
  at("model", [&] { c.model.validate(); });
  at("scheme", [&] { c.run.scheme.validate(); });
  at("newton", [&] {
    c.run.newton.validate();
    c.run.linear.validate();
    if (c.run.linear.refactor_threshold < 0) throw ConfigError("newton: refactor_threshold must be >= 0");
  });
  at("adaptive", [&] { c.run.adaptive.validate(); });
  at("run", [&] {
    if (c.run.max_steps < 0) throw ConfigError("run: max_steps must be >= 0");
    if (!(c.run.t_end > 0)) throw ConfigError("run: t_end must be > 0");
  });
  at("equilibrium", [&] {
    c.equilibrium.validate();
    if (c.equilibrium.target == kVpar && !c.model.with_vpar)
      throw ConfigError("equilibrium: target vpar requires with_vpar");
  });
  at("output", [&] {
    if (c.output.restart_every < 0) throw ConfigError("output: restart_every must be >= 0");
    if (c.output.csv_path.empty() || c.output.summary_path.empty())
      throw ConfigError("output: csv_path and summary_path must be non-empty");
  });
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig c;
  auto keys = detail::config_keys(c);
  std::string preset;
  keys.push_back({"scheme", "preset", [&preset](const std::string& v) {
                    SchemeParams::preset(v);
                    preset = v;
                  }, nullptr});
  std::map<std::string, int> last_line;
  std::map<std::string, int> seen;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string s = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("malformed section header '" + s + "'", line);
      section = detail::trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const auto& k : keys) known = known || k.section == section;
      if (!known) throw ConfigError("unknown section [" + section + "]", line);
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + s + "'", line);
    const std::string name = detail::trim(s.substr(0, eq));
    const std::string value = detail::trim(s.substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + name + "' outside any section", line);
    auto it = std::find_if(keys.begin(), keys.end(),
                           [&](const detail::Key& k) { return k.section == section && k.name == name; });
    if (it == keys.end()) throw ConfigError("unknown key '" + name + "' in [" + section + "]", line);
    const std::string full = section + "." + name;
    if (seen.count(full)) throw ConfigError("duplicate key '" + name + "' (first on line " + std::to_string(seen[full]) + ")", line);
    seen[full] = line;
    if (value.empty()) throw ConfigError("empty value for '" + name + "'", line);
    try {
      it->set(value);
    } catch (const ConfigError& e) {
      throw ConfigError(name + ": " + e.what(), line);
    }
    last_line[section] = line;
  }
  // explicit theta / zeta win over the preset, in any order
  if (!preset.empty()) {
    const SchemeParams pre = SchemeParams::preset(preset);
    if (!seen.count("scheme.theta")) c.run.scheme.theta = pre.theta;
    if (!seen.count("scheme.zeta")) c.run.scheme.zeta = pre.zeta;
  }
  validate(c, last_line);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

/// Every key with its value; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& c0) {
  RunConfig c = c0;
  std::string out, section;
  for (const auto& k : detail::config_keys(c)) {
    if (!k.get) continue;
    if (k.section != section) {
      if (!section.empty()) out += '\n';
      section = k.section;
      out += "[" + section + "]\n";
    }
    const std::string v = k.get();
    out += (v.empty() ? "# " + k.name + " =" : k.name + " = " + v) + "\n";
  }
  return out;
}

inline Model make_model(const RunConfig& c) {
  return Model(c.grid, c.physics, c.model, equilibrium_boundary(c.grid, c.equilibrium));
}

}  // namespace rmhd
