#include "rmhd/driver.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rmhd/config.hpp"
#include "rmhd/restart.hpp"

namespace rmhd {

namespace {

RunConfig resolve_config(const CliOptions& o) {
  RunConfig c = o.config_path.empty() ? parse_config("") : load_config(o.config_path);
  if (o.seed) c.output.seed = *o.seed;
  return c;
}

std::filesystem::path out_path(const CliOptions& o, const std::string& name) {
  std::filesystem::create_directories(o.output_dir);
  return std::filesystem::path(o.output_dir) / name;
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
  return f;
}

std::string restart_name(long step) {
  std::ostringstream s;
  s << "restart_" << std::setw(6) << std::setfill('0') << step << ".txt";
  return s.str();
}

}  // namespace

int cmd_print_config(const CliOptions& o, std::ostream& out) {
  out << to_text(resolve_config(o));
  return kExitOk;
}

int cmd_run(const CliOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const Model m = make_model(cfg);
  const Grid& g = cfg.grid;

  State state;
  RunStart start;
  if (cfg.restart_from.empty()) {
    state = initial_state(m, cfg.equilibrium);
  } else {
    RestartData r = read_restart(cfg.restart_from, g, cfg.model.with_vpar);
    state = std::move(r.state);
    start.time = r.time;
    start.step = r.step;
    start.dt = r.dt;
  }

  std::ofstream csv_file = open_out(out_path(o, cfg.output.csv_path));
  CsvWriter csv(csv_file);

  long remaining = cfg.run.max_steps;
  long accepted = 0, rejected = 0, newton = 0, gmres = 0, refac = 0;
  double wall = 0;
  std::optional<State> previous;
  double dt_next = start.dt > 0 ? start.dt : cfg.run.adaptive.dt0;
  while (true) {
    RunParams rp = cfg.run;
    rp.max_steps = cfg.output.restart_every > 0 ? std::min(remaining, cfg.output.restart_every) : remaining;
    start.previous = previous ? &*previous : nullptr;
    RunResult res = run(m, state, rp, &csv, start);
    accepted += res.accepted;
    rejected += res.rejected;
    newton += res.newton_iters;
    gmres += res.gmres_iters;
    refac += res.refactorizations;
    wall += res.wall_seconds;
    remaining -= res.accepted;
    state = std::move(res.state);
    previous = std::move(res.previous);
    start.time = res.time;
    start.step = res.step;
    start.dt = dt_next = res.dt_next;
    const bool done = remaining <= 0 || res.accepted < rp.max_steps;
    if (cfg.output.restart_every > 0 && res.accepted > 0 && !done)
      write_restart(out_path(o, restart_name(start.step)).string(), state, g,
                    cfg.model.with_vpar, start.time, start.step, dt_next);
    if (done) break;
  }
  csv_file.close();
  const std::string restart_file = out_path(o, "restart.txt").string();
  write_restart(restart_file, state, g, cfg.model.with_vpar, start.time, start.step, dt_next);

  const EnergyReport e = compute_energies(m, state);
  std::string s;
  auto kv = [&s](const char* k, const std::string& v) { s += std::string(k) + ": " + v + "\n"; };
  kv("final_time", format_double(start.time));
  kv("final_step", std::to_string(start.step));
  kv("steps_accepted", std::to_string(accepted));
  kv("steps_rejected", std::to_string(rejected));
  kv("newton_iters", std::to_string(newton));
  kv("gmres_iters", std::to_string(gmres));
  kv("refactorizations", std::to_string(refac));
  kv("dt_next", format_double(dt_next));
  kv("E_total", format_double(e.e_total()));
  kv("E_kin_n", format_double(e.e_kin_n));
  kv("E_mag_n", format_double(e.e_mag_n));
  kv("mass", format_double(e.mass));
  kv("helicity", format_double(e.helicity));
  std::ofstream sf = open_out(out_path(o, cfg.output.summary_path));
  sf.write(s.data(), std::streamsize(s.size()));
  if (!sf) throw IoError("summary write failed");
  out << s << "wall_seconds: " << wall << "\n";
  return kExitOk;
}

std::vector<RefinementReport> run_identity_studies(bool energy_groups, const StudyOptions& opt) {
  std::vector<RefinementReport> reps;
  for (const auto& rec : identity_catalog())
    if ((rec.id.front() == 'E') == energy_groups) reps.push_back(refinement_study(rec, opt));
  return reps;
}

int cmd_verify(const CliOptions& o, std::ostream& out, bool energy_groups) {
  const RunConfig cfg = resolve_config(o);
  StudyOptions opt;
  opt.levels = o.levels;
  opt.seed = cfg.output.seed;
  const auto reps = run_identity_studies(energy_groups, opt);
  write_report_text(out, reps);
  bool ok = true;
  for (const auto& r : reps) ok = ok && r.pass;

  std::ofstream f = open_out(out_path(o, energy_groups ? "energy_groups.csv" : "identities.csv"));
  write_report_csv(f, reps);

  if (energy_groups) {
    const int N = opt.base * (1 << (opt.levels - 1)) + 1;
    const Bundle b = manufactured_bundle(study_grid(N, opt.N_phi), opt.seed, opt.par, opt.amp, opt.modes);
    const Dissipation d = verify_dissipation(b);
    const double ratio = d.lhs / d.rhs;
    const bool pass = ratio >= 0.95 && ratio <= 1.05;
    out << "dissipation N=" << N << " model " << d.lhs << " closed form " << d.rhs << " ratio " << ratio
        << (pass ? " PASS" : " FAIL") << "\n";
    f << "dissipation," << N << ",," << std::setprecision(17) << ratio << ",," << (pass ? 1 : 0) << "\n";
    ok = ok && pass;
  }
  out << (ok ? "all passed" : "FAILURES") << "\n";
  return ok ? kExitOk : kExitVerification;
}

int cmd_gs_test(const CliOptions& o, std::ostream& out) {
  const RunConfig cfg = resolve_config(o);
  const auto rows = gs_convergence_study(cfg.grid, o.levels);
  std::ofstream f = open_out(out_path(o, "gs_test.csv"));
  f << "N,h,linf_error,order\n" << std::setprecision(17);
  out << "N      h             Linf error    order\n";
  bool ok = true;
  for (const auto& r : rows) {
    out << std::left << std::setw(7) << r.N << std::scientific << std::setprecision(4) << std::setw(14) << r.h
        << std::setw(14) << r.error << std::defaultfloat;
    f << r.N << ',' << r.h << ',' << r.error << ',';
    if (std::isnan(r.order)) {
      out << "-\n";
    } else {
      out << std::fixed << std::setprecision(3) << r.order << std::defaultfloat << "\n";
      f << r.order;
      ok = ok && std::abs(r.order - 2.0) <= 0.2;
    }
    f << '\n';
  }
  out << (ok ? "PASS" : "FAIL") << ": order 2 +- 0.2\n";
  return ok ? kExitOk : kExitVerification;
}

int dispatch(const CliOptions& o, std::ostream& out, std::ostream& err) {
  try {
    if (o.levels < 2) throw ConfigError("--levels must be >= 2");
    if (o.command == "run") return cmd_run(o, out);
    if (o.command == "verify-identities") return cmd_verify(o, out, false);
    if (o.command == "verify-energy") return cmd_verify(o, out, true);
    if (o.command == "gs-test") return cmd_gs_test(o, out);
    if (o.command == "print-config") return cmd_print_config(o, out);
    err << "unknown subcommand '" << o.command << "'\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const FormatError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ModelVariantError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace rmhd
