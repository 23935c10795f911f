#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace heatid::cli {

/// Raised for any configuration problem; the message names the key.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One recognised configuration key.
struct KeySpec {
  const char* name;
  const char* kind;  // "int", "real", "string", "reals", "ints"
  const char* help;
};

const std::vector<KeySpec>& known_keys();

/// Closest known key by edit distance, if any is reasonably close.
std::optional<std::string> suggest_key(const std::string& unknown);

std::size_t edit_distance(const std::string& a, const std::string& b);

/// Flat `key = value` text with `#` comments. Later assignments win.
std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin);

/// Resolved run configuration. Optional members are unset unless given.
struct RunConfig {
  std::string mode;
  std::string out_dir;
  std::uint64_t seed = 1;

  // grid
  int dim = 1;
  std::optional<int> nx, ny, steps;
  double extent_x = 1, extent_y = 1;
  std::optional<double> final_time;

  // forward fields: constants or files
  std::optional<double> a, c, f;
  std::string a_file, c_file, f_file, phi_file;
  std::string phi_shape = "sine";
  std::optional<double> phi_amplitude;
  std::string f_shape = "constant";
  std::string dump_levels;
  std::optional<double> steady_tol;

  // scenarios
  std::string scenario = "benchmark";
  double noise = 0.01;
  std::vector<double> noise_list{0.04, 0.02, 0.01};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string g_file;
  std::optional<double> delta;
  std::optional<double> c_init, f_init;

  // inversion
  std::optional<double> gamma, alpha, tau;
  double eta_assumed = 0.2;
  std::optional<double> rho;
  int k_max = 500;
  double inner_cg_tol = 1e-6;
  int inner_cg_maxit = 100;
  double backtrack_factor = 4;
  int max_backtracks = 10;
  std::optional<double> c_lower, c_upper, f_lower, f_upper;

  // thermography
  std::optional<double> tumor_x, tumor_y, tumor_radius, perfusion_contrast, metabolic_contrast,
      smoothing_width;
  std::optional<double> perfusion, metabolic, q0;

  // diagnostics
  double kappa = 0.3;
  int trials = 10;
  double fd_eps = 1e-5;

  /// Every key that was set, with its text value, for the manifest echo.
  std::map<std::string, std::string> given;
};

/// Builds a RunConfig from the config file (may be empty) and `--key value`
/// overrides. Validates types, ranges and cross-key rules.
RunConfig resolve_config(const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& overrides);

/// Reads `<mode> --config <file> [--key value ...]`.
RunConfig parse_command_line(int argc, const char* const* argv);

}  // namespace heatid::cli
