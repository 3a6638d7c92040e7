#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mft/scenario.hpp"

namespace mft {

inline constexpr const char* kToolVersion = "mftsim 1.0.0";

enum ExitCode : int { kExitOk = 0, kExitGateFailure = 1, kExitIoError = 2 };

struct RunOptions {
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  bool plots = false;
  std::size_t threads = 0;
  std::string command_line;
};

/// simulate, equivariance, collapse, sensitivity, epr-scan, newton-check,
/// residuals, validate.
const std::vector<std::string>& commands();

/// Runs one command. Summary lines go to `out` (and summary.txt), diagnostics
/// to `err`.
int run(const std::string& command, Scenario scenario, const RunOptions& options,
        std::ostream& out, std::ostream& err);

}  // namespace mft
