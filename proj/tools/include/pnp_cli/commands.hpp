#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace pnp::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kNumericalFailure = 3, kCertificateFailure = 4 };

struct Invocation {
  std::string command;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "pnp_out";
};

// Runs one command; diagnostics go to `err`, a one-line summary to `out`.
int execute(const Invocation& inv, std::ostream& out, std::ostream& err);

// Full command line including the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pnp::cli
