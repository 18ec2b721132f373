#include <iostream>

#include <CLI11.hpp>

#include "rmhd/driver.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Reduced MHD solver: run, verification suites, Grad-Shafranov test"};
  app.require_subcommand(1, 1);

  rmhd::CliOptions o;
  std::uint64_t seed = 0;
  auto add = [&](const char* name, const char* what, bool levels) {
    CLI::App* s = app.add_subcommand(name, what);
    s->add_option("--config", o.config_path, "configuration file");
    s->add_option("--output-dir", o.output_dir, "directory for CSV, summary and restart files");
    s->add_option("--seed", seed, "seed for manufactured fields");
    if (levels) s->add_option("--levels", o.levels, "refinement levels")->check(CLI::PositiveNumber);
    return s;
  };
  add("run", "advance the model in time", false);
  add("verify-identities", "refinement study of the discrete identities", true);
  add("verify-energy", "refinement study of the energy groups and the dissipation term", true);
  add("gs-test", "Grad-Shafranov manufactured-solution convergence", true);
  add("print-config", "print the resolved configuration", false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return rmhd::kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();
  if (app.get_subcommands().front()->count("--seed")) o.seed = seed;
  return rmhd::dispatch(o, std::cout, std::cerr);
}
