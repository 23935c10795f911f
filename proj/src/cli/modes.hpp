#pragma once

#include <ostream>
#include <string>

#include "config.hpp"

namespace heatid::cli {

/// Exit codes: 0 every check passed, 1 a check failed, 2 the run could not complete.
constexpr int kExitPass = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitError = 2;

/// Output directory: `out_dir`, else $HEATID_OUT, else ./heatid_out.
std::string resolve_out_dir(const RunConfig& rc);

/// Executes the configured mode, writes its outputs and manifest.json, and
/// prints a short summary to `log`.
int run(const RunConfig& rc, std::ostream& log);

}  // namespace heatid::cli
