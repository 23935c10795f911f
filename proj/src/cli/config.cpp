#include "config.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "heatid/regularizer.hpp"

namespace heatid::cli {

namespace {

const std::set<std::string> kModes{"forward", "phantom", "invert", "adjoint-test", "convergence-test", "sweep",
                                   "witness"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_real(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(x))
    throw ConfigError(key + ": expected a real number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  errno = 0;
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE)
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return x;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key + ": " + what);
}

}  // namespace

const std::vector<KeySpec>& known_keys() {
  static const std::vector<KeySpec> keys{
      {"mode", "string", "forward | phantom | invert | adjoint-test | convergence-test | sweep | witness"},
      {"out_dir", "string", "output directory (default: $HEATID_OUT, else ./heatid_out)"},
      {"seed", "int", "noise and random-direction seed"},
      {"dim", "int", "spatial dimension, 1 or 2"},
      {"nx", "int", "nodes along x"},
      {"ny", "int", "nodes along y"},
      {"extent_x", "real", "domain length along x"},
      {"extent_y", "real", "domain length along y"},
      {"T", "real", "final time"},
      {"M", "int", "number of time steps"},
      {"a", "real", "constant diffusivity"},
      {"c", "real", "constant reaction coefficient"},
      {"f", "real", "constant source, or amplitude when f_shape = sine"},
      {"a_file", "string", "diffusivity field CSV"},
      {"c_file", "string", "reaction field CSV"},
      {"f_file", "string", "source field CSV"},
      {"phi_file", "string", "initial-state field CSV"},
      {"phi_shape", "string", "zero | sine"},
      {"phi_amplitude", "real", "amplitude of the sine initial state (heating amplitude for thermography)"},
      {"f_shape", "string", "constant | sine"},
      {"dump_levels", "string", "forward: 'all' or comma list of time levels to write as u_<m>.csv"},
      {"steady_tol", "real", "forward: fail unless max|u(T) - phi| is at most this"},
      {"scenario", "string", "benchmark | thermography | file"},
      {"noise", "real", "relative noise level |g - g_delta| / |g|"},
      {"noise_list", "reals", "sweep: relative noise levels"},
      {"seeds", "ints", "sweep: noise seeds"},
      {"g_file", "string", "invert with scenario = file: measured final state"},
      {"delta", "real", "invert with scenario = file: absolute noise level"},
      {"c_init", "real", "scenario = file: constant initial reaction"},
      {"f_init", "real", "scenario = file: constant initial source"},
      {"gamma", "real", "Landweber step (default: 0.9 / |F'|^2 by power iteration)"},
      {"alpha", "real", "Tikhonov weight (default: scenario value or 6.6 (delta/rho)^2)"},
      {"tau", "real", "discrepancy factor (default: 1.05 * 2(1+eta)/(1-eta))"},
      {"eta_assumed", "real", "tangential-cone constant used for tau"},
      {"rho", "real", "radius in the alpha rule"},
      {"k_max", "int", "maximum number of cycles"},
      {"inner_cg_tol", "real", "relative tolerance of the Gauss-Newton CG"},
      {"inner_cg_maxit", "int", "iteration cap of the Gauss-Newton CG"},
      {"backtrack_factor", "real", "alpha inflation factor on residual increase"},
      {"max_backtracks", "int", "maximum alpha inflations per cycle"},
      {"c_lower", "real", "reaction lower bound"},
      {"c_upper", "real", "reaction upper bound"},
      {"f_lower", "real", "source lower bound"},
      {"f_upper", "real", "source upper bound"},
      {"tumor_x", "real", "tumor center x"},
      {"tumor_y", "real", "tumor center y"},
      {"tumor_radius", "real", "tumor radius"},
      {"perfusion_contrast", "real", "tumor perfusion factor"},
      {"metabolic_contrast", "real", "tumor metabolic factor"},
      {"smoothing_width", "real", "tumor edge ramp width"},
      {"perfusion", "real", "background perfusion"},
      {"metabolic", "real", "background metabolic heat"},
      {"q0", "real", "arterial temperature"},
      {"kappa", "real", "witness: reaction shift"},
      {"trials", "int", "adjoint-test: random trials"},
      {"fd_eps", "real", "adjoint-test: finite-difference step"},
  };
  return keys;
}

std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::optional<std::string> suggest_key(const std::string& unknown) {
  std::optional<std::string> best;
  std::size_t best_d = std::max<std::size_t>(2, unknown.size() / 3) + 1;
  for (const auto& k : known_keys()) {
    const std::size_t d = edit_distance(unknown, k.name);
    if (d < best_d) {
      best_d = d;
      best = k.name;
    }
  }
  return best;
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

RunConfig resolve_config(const std::map<std::string, std::string>& file_values,
                         const std::map<std::string, std::string>& overrides) {
  std::map<std::string, std::string> kv = file_values;
  for (const auto& [k, v] : overrides) kv[k] = v;

  for (const auto& [k, v] : kv) {
    const bool known = std::any_of(known_keys().begin(), known_keys().end(),
                                   [&](const KeySpec& s) { return k == s.name; });
    if (!known) {
      std::string msg = "unknown key '" + k + "'";
      if (auto s = suggest_key(k)) msg += "; did you mean '" + *s + "'?";
      throw ConfigError(msg);
    }
  }

  RunConfig rc;
  rc.given = kv;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto real = [&](const char* key, auto& dst) {
    if (const auto* v = get(key)) dst = to_real(key, *v);
  };
  auto integer = [&](const char* key, auto& dst) {
    if (const auto* v = get(key)) {
      const long long x = to_int(key, *v);
      require(x >= std::numeric_limits<int>::min() && x <= std::numeric_limits<int>::max(), key, "out of range");
      dst = static_cast<int>(x);
    }
  };
  auto text = [&](const char* key, std::string& dst) {
    if (const auto* v = get(key)) dst = *v;
  };

  text("mode", rc.mode);
  require(!rc.mode.empty(), "mode", "missing required key");
  require(kModes.count(rc.mode) == 1, "mode", "unknown mode '" + rc.mode + "'");
  text("out_dir", rc.out_dir);
  if (const auto* v = get("seed")) {
    const long long s = to_int("seed", *v);
    require(s >= 0, "seed", "must be >= 0");
    rc.seed = static_cast<std::uint64_t>(s);
  }

  integer("dim", rc.dim);
  require(rc.dim == 1 || rc.dim == 2, "dim", "must be 1 or 2");
  integer("nx", rc.nx);
  integer("ny", rc.ny);
  integer("M", rc.steps);
  real("extent_x", rc.extent_x);
  real("extent_y", rc.extent_y);
  real("T", rc.final_time);
  if (rc.nx) require(*rc.nx >= 3, "nx", "need at least 3 nodes");
  if (rc.ny) require(*rc.ny >= 3, "ny", "need at least 3 nodes");
  if (rc.steps) require(*rc.steps >= 1, "M", "need at least one time step");
  require(rc.extent_x > 0, "extent_x", "must be positive");
  require(rc.extent_y > 0, "extent_y", "must be positive");
  if (rc.final_time) require(*rc.final_time > 0, "T", "must be positive");

  real("a", rc.a);
  real("c", rc.c);
  real("f", rc.f);
  if (rc.a) require(*rc.a > 0, "a", "must be positive");
  if (rc.c) require(*rc.c >= 0, "c", "must be >= 0");
  for (auto [key, dst] : {std::pair{"a_file", &rc.a_file}, std::pair{"c_file", &rc.c_file},
                          std::pair{"f_file", &rc.f_file}, std::pair{"phi_file", &rc.phi_file},
                          std::pair{"g_file", &rc.g_file}}) {
    text(key, *dst);
    if (!dst->empty()) require(std::filesystem::is_regular_file(*dst), key, "file not found: " + *dst);
  }
  text("phi_shape", rc.phi_shape);
  require(rc.phi_shape == "zero" || rc.phi_shape == "sine", "phi_shape", "must be zero or sine");
  real("phi_amplitude", rc.phi_amplitude);
  text("f_shape", rc.f_shape);
  require(rc.f_shape == "constant" || rc.f_shape == "sine", "f_shape", "must be constant or sine");
  text("dump_levels", rc.dump_levels);
  real("steady_tol", rc.steady_tol);
  if (rc.steady_tol) require(*rc.steady_tol > 0, "steady_tol", "must be positive");

  text("scenario", rc.scenario);
  require(rc.scenario == "benchmark" || rc.scenario == "thermography" || rc.scenario == "file", "scenario",
          "must be benchmark, thermography or file");
  real("noise", rc.noise);
  require(rc.noise >= 0, "noise", "must be >= 0");
  if (const auto* v = get("noise_list")) {
    rc.noise_list.clear();
    for (const auto& item : split_list(*v)) {
      rc.noise_list.push_back(to_real("noise_list", item));
      require(rc.noise_list.back() >= 0, "noise_list", "entries must be >= 0");
    }
    require(!rc.noise_list.empty(), "noise_list", "must not be empty");
  }
  if (const auto* v = get("seeds")) {
    rc.seeds.clear();
    for (const auto& item : split_list(*v)) {
      const long long s = to_int("seeds", item);
      require(s >= 0, "seeds", "entries must be >= 0");
      rc.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    require(!rc.seeds.empty(), "seeds", "must not be empty");
  }
  real("delta", rc.delta);
  if (rc.delta) require(*rc.delta >= 0, "delta", "must be >= 0");
  real("c_init", rc.c_init);
  real("f_init", rc.f_init);
  if (rc.scenario == "file" && (rc.mode == "invert" || rc.mode == "sweep")) {
    require(rc.mode == "invert", "scenario", "sweep needs a synthetic scenario");
    require(!rc.g_file.empty(), "g_file", "missing required key for scenario = file");
    require(rc.delta.has_value(), "delta", "missing required key for scenario = file");
  }

  real("gamma", rc.gamma);
  real("alpha", rc.alpha);
  real("tau", rc.tau);
  real("eta_assumed", rc.eta_assumed);
  real("rho", rc.rho);
  integer("k_max", rc.k_max);
  real("inner_cg_tol", rc.inner_cg_tol);
  integer("inner_cg_maxit", rc.inner_cg_maxit);
  real("backtrack_factor", rc.backtrack_factor);
  integer("max_backtracks", rc.max_backtracks);
  if (rc.gamma) require(*rc.gamma > 0, "gamma", "must be positive");
  if (rc.alpha) require(*rc.alpha > 0, "alpha", "must be positive");
  require(rc.eta_assumed >= 0 && rc.eta_assumed < 1, "eta_assumed", "must lie in [0, 1)");
  if (rc.tau) {
    const double bound = tau_bound(rc.eta_assumed);
    std::ostringstream os;
    os << "must exceed 2(1+eta)/(1-eta) = " << bound << " for eta_assumed = " << rc.eta_assumed;
    require(*rc.tau > bound, "tau", os.str());
  }
  if (rc.rho) require(*rc.rho > 0, "rho", "must be positive");
  require(rc.k_max >= 0, "k_max", "must be >= 0");
  require(rc.inner_cg_tol > 0, "inner_cg_tol", "must be positive");
  require(rc.inner_cg_maxit >= 1, "inner_cg_maxit", "must be >= 1");
  require(rc.backtrack_factor > 1, "backtrack_factor", "must exceed 1");
  require(rc.max_backtracks >= 0, "max_backtracks", "must be >= 0");
  real("c_lower", rc.c_lower);
  real("c_upper", rc.c_upper);
  real("f_lower", rc.f_lower);
  real("f_upper", rc.f_upper);
  if (rc.c_lower) require(*rc.c_lower > 0, "c_lower", "must be positive");
  if (rc.c_lower && rc.c_upper) require(*rc.c_upper >= *rc.c_lower, "c_upper", "must be >= c_lower");
  if (rc.f_lower && rc.f_upper) require(*rc.f_upper >= *rc.f_lower, "f_upper", "must be >= f_lower");

  real("tumor_x", rc.tumor_x);
  real("tumor_y", rc.tumor_y);
  real("tumor_radius", rc.tumor_radius);
  real("perfusion_contrast", rc.perfusion_contrast);
  real("metabolic_contrast", rc.metabolic_contrast);
  real("smoothing_width", rc.smoothing_width);
  real("perfusion", rc.perfusion);
  real("metabolic", rc.metabolic);
  real("q0", rc.q0);
  if (rc.tumor_radius) require(*rc.tumor_radius > 0, "tumor_radius", "must be positive");
  if (rc.perfusion_contrast) require(*rc.perfusion_contrast >= 1, "perfusion_contrast", "must be >= 1");
  if (rc.metabolic_contrast) require(*rc.metabolic_contrast >= 1, "metabolic_contrast", "must be >= 1");
  if (rc.smoothing_width) require(*rc.smoothing_width >= 0, "smoothing_width", "must be >= 0");
  if (rc.perfusion) require(*rc.perfusion > 0, "perfusion", "must be positive");
  if (rc.metabolic) require(*rc.metabolic > 0, "metabolic", "must be positive");

  real("kappa", rc.kappa);
  integer("trials", rc.trials);
  real("fd_eps", rc.fd_eps);
  require(rc.trials >= 1, "trials", "must be >= 1");
  require(rc.fd_eps > 0, "fd_eps", "must be positive");
  return rc;
}

RunConfig parse_command_line(int argc, const char* const* argv) {
  std::map<std::string, std::string> overrides;
  std::string config_path;
  int i = 1;
  if (i < argc && std::string(argv[i]).rfind("--", 0) != 0) overrides["mode"] = argv[i++];
  for (; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    std::string value;
    if (const auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key.erase(eq);
    } else {
      if (i + 1 >= argc) throw ConfigError(key + ": missing value");
      value = argv[++i];
    }
    if (key == "config") config_path = value;
    else overrides[key] = value;
  }
  std::map<std::string, std::string> file_values;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config: cannot read '" + config_path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    file_values = parse_config_text(ss.str(), config_path);
  }
  return resolve_config(file_values, overrides);
}

}  // namespace heatid::cli
