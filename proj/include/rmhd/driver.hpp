#pragma once

// Subcommands of the command-line driver. Each returns the process exit code.

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "rmhd/verify.hpp"

namespace rmhd {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumerical = 2, kExitVerification = 3 };

struct CliOptions {
  std::string command;
  std::string config_path;
  std::string output_dir = ".";
  int levels = 3;
  std::optional<std::uint64_t> seed;
};

int cmd_print_config(const CliOptions& o, std::ostream& out);
int cmd_run(const CliOptions& o, std::ostream& out);
int cmd_verify(const CliOptions& o, std::ostream& out, bool energy_groups);
int cmd_gs_test(const CliOptions& o, std::ostream& out);

std::vector<RefinementReport> run_identity_studies(bool energy_groups, const StudyOptions& opt);

/// Maps exceptions to exit codes; messages go to `err`.
int dispatch(const CliOptions& o, std::ostream& out, std::ostream& err);

}  // namespace rmhd
