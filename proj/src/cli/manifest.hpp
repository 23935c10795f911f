#pragma once

#include <string>
#include <vector>

#include <json.hpp>

namespace heatid::cli {

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_atomic(const std::string& path, const std::string& content);

/// One pass/fail diagnostic: `value relation bound`.
struct Check {
  std::string name;
  double value;
  std::string relation;  // "<=", ">=", "==" or "in"
  double bound;
  double upper = 0;      // upper end when relation is "in"
  bool passed;
};

Check check_le(std::string name, double value, double bound);
Check check_ge(std::string name, double value, double bound);
Check check_in(std::string name, double value, double lo, double hi);
Check check_true(std::string name, bool ok);

/// Run report. Output files are registered as they are written; the
/// manifest itself is written last and atomically.
class Manifest {
 public:
  Manifest(std::string out_dir, std::string mode, nlohmann::ordered_json config_echo);

  const std::string& out_dir() const { return out_dir_; }
  std::string path_of(const std::string& name) const;

  /// Writes a text output file and records it in the inventory.
  void write_file(const std::string& name, const std::string& content);
  void add_check(Check c) { checks_.push_back(std::move(c)); }
  const std::vector<Check>& checks() const { return checks_; }
  nlohmann::ordered_json& results() { return results_; }
  void fail(const std::string& message);
  bool passed() const;

  /// Serializes everything; `wall_seconds` is the run time.
  std::string finish(double wall_seconds);

 private:
  std::string out_dir_;
  std::string mode_;
  nlohmann::ordered_json config_;
  nlohmann::ordered_json results_ = nlohmann::ordered_json::object();
  std::vector<Check> checks_;
  std::vector<std::string> files_;
  std::vector<std::string> errors_;
};

}  // namespace heatid::cli
