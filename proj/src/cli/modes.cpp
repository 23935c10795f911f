#include "modes.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <sstream>

#include "heatid/diagnostics.hpp"
#include "heatid/field_io.hpp"
#include "heatid/scenarios.hpp"
#include "manifest.hpp"

namespace heatid::cli {

namespace {

using json = nlohmann::ordered_json;
using Pair = ParamPair<double>;
using Setup = ProblemSetup<double>;

struct GridDefaults {
  int dim = 1;
  int nodes = 101;
  double final_time = 1;
  int steps = 100;
};

GridPtr<double> grid_from(const RunConfig& rc, const GridDefaults& d) {
  const int dim = rc.given.count("dim") ? rc.dim : d.dim;
  const int nx = rc.nx.value_or(d.nodes);
  std::vector<double> ext{rc.extent_x};
  std::vector<int> nodes{nx};
  if (dim == 2) {
    ext.push_back(rc.extent_y);
    nodes.push_back(rc.ny.value_or(nx));
  }
  return build_grid<double>(dim, ext, nodes, rc.final_time.value_or(d.final_time), rc.steps.value_or(d.steps));
}

/// Constant from `value`, else the field file, else `fallback`.
Field field_from(const GridPtr<double>& g, const std::optional<double>& value, const std::string& file,
                 double fallback, const char* key) {
  if (value && !file.empty()) throw ConfigError(std::string(key) + ": give either a value or a file, not both");
  if (!file.empty()) return read_field(file, g);
  return Field::constant(g, value.value_or(fallback));
}

Field initial_state(const RunConfig& rc, const GridPtr<double>& g) {
  if (!rc.phi_file.empty()) return read_field(rc.phi_file, g);
  if (rc.phi_shape == "zero") return Field::zeros(g);
  return rc.phi_amplitude.value_or(1.0) * sine_mode(g);
}

Field source_field(const RunConfig& rc, const GridPtr<double>& g, double fallback) {
  if (rc.f_shape == "sine") {
    if (!rc.f_file.empty()) throw ConfigError("f_shape: sine cannot be combined with f_file");
    return rc.f.value_or(1.0) * sine_mode(g);
  }
  return field_from(g, rc.f, rc.f_file, fallback, "f");
}

void reject_dim(const RunConfig& rc, int dim, const char* scenario) {
  if (rc.given.count("dim") && rc.dim != dim)
    throw ConfigError(std::string("dim: scenario ") + scenario + " is " + std::to_string(dim) + "D");
}

AdmissibleBox<double> override_box(AdmissibleBox<double> box, const RunConfig& rc) {
  if (rc.c_lower) box.c_lower = *rc.c_lower;
  if (rc.c_upper) box.c_upper = *rc.c_upper;
  if (rc.f_lower) box.f_lower = *rc.f_lower;
  if (rc.f_upper) box.f_upper = *rc.f_upper;
  box.validate();
  return box;
}

ThermographySpec<double> thermography_spec(const RunConfig& rc) {
  ThermographySpec<double> s;
  if (rc.nx) s.nodes = *rc.nx;
  if (rc.ny && *rc.ny != s.nodes) throw ConfigError("ny: the thermography grid is square; set nx only");
  if (rc.steps) s.steps = *rc.steps;
  if (rc.final_time) s.final_time = *rc.final_time;
  if (rc.a) s.conductivity = *rc.a;
  if (rc.phi_amplitude) s.heating_amplitude = *rc.phi_amplitude;
  if (rc.q0) s.q0 = *rc.q0;
  if (rc.perfusion) s.perfusion = *rc.perfusion;
  if (rc.metabolic) s.metabolic = *rc.metabolic;
  if (rc.rho) s.rho = *rc.rho;
  if (rc.c_lower) s.c_lower = *rc.c_lower;
  if (rc.c_upper) s.c_upper = *rc.c_upper;
  if (rc.tumor_x) s.tumor.center_x = *rc.tumor_x;
  if (rc.tumor_y) s.tumor.center_y = *rc.tumor_y;
  if (rc.tumor_radius) s.tumor.radius = *rc.tumor_radius;
  if (rc.perfusion_contrast) s.tumor.perfusion_contrast = *rc.perfusion_contrast;
  if (rc.metabolic_contrast) s.tumor.metabolic_contrast = *rc.metabolic_contrast;
  if (rc.smoothing_width) s.tumor.smoothing_width = *rc.smoothing_width;
  return s;
}

/// Scenario with the configured noise level and seed.
Scenario<double> build_scenario(const RunConfig& rc, double noise, std::uint64_t seed) {
  if (rc.scenario == "benchmark") {
    reject_dim(rc, 1, "benchmark");
    BenchmarkSpec<double> s;
    if (rc.nx) s.nodes = *rc.nx;
    if (rc.steps) s.steps = *rc.steps;
    if (rc.final_time) s.final_time = *rc.final_time;
    if (rc.a) s.diffusivity = *rc.a;
    if (rc.phi_amplitude) s.phi_amplitude = *rc.phi_amplitude;
    s.box = override_box(s.box, rc);
    return make_benchmark(s, noise, seed);
  }
  if (rc.scenario == "thermography") {
    reject_dim(rc, 2, "thermography");
    const auto spec = thermography_spec(rc);
    auto sc = make_thermography(spec, noise, seed);
    if (rc.f_lower || rc.f_upper) {
      const auto box = override_box(sc.init.box, rc);
      sc.truth = Pair(sc.truth.c, sc.truth.f, box);
      sc.init = Pair(sc.init.c, sc.init.f, box);
    }
    return sc;
  }
  throw ConfigError("scenario: '" + rc.scenario + "' does not synthesize data");
}

double default_rho(const RunConfig& rc) {
  if (rc.rho) return *rc.rho;
  return rc.scenario == "thermography" ? ThermographySpec<double>{}.rho : 1.0;
}

InversionConfig<double> inversion_config(const RunConfig& rc, const Setup& setup, const Pair& init,
                                         std::optional<double> scenario_alpha, json& res) {
  InversionConfig<double> cfg;
  cfg.eta_assumed = rc.eta_assumed;
  cfg.tau = rc.tau.value_or(choose_tau(rc.eta_assumed));
  cfg.rho = default_rho(rc);
  cfg.alpha = rc.alpha ? *rc.alpha : scenario_alpha.value_or(choose_alpha(setup.delta, cfg.rho));
  cfg.k_max = rc.k_max;
  cfg.inner_cg_tol = rc.inner_cg_tol;
  cfg.inner_cg_maxit = rc.inner_cg_maxit;
  cfg.backtrack_factor = rc.backtrack_factor;
  cfg.max_backtracks = rc.max_backtracks;
  if (rc.gamma) {
    cfg.gamma = *rc.gamma;
    res["gamma_source"] = "config";
  } else {
    const auto est = estimate_step_gamma(init, setup);
    cfg.gamma = est.gamma;
    res["gamma_source"] = est.converged ? "power_iteration" : "conservative";
    res["operator_norm_sq"] = est.norm_sq;
    res["gamma_conservative"] = est.conservative;
    res["power_iterations"] = est.iterations;
  }
  cfg.validate(setup.delta);
  res["gamma"] = cfg.gamma;
  res["alpha"] = cfg.alpha;
  res["tau"] = cfg.tau;
  res["eta_assumed"] = cfg.eta_assumed;
  res["rho"] = cfg.rho;
  res["delta"] = setup.delta;
  return cfg;
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string iterations_csv(const InversionResult<double>& r) {
  std::ostringstream os;
  os << "k,residual_unified,residual_landweber,tikhonov_value,f_error,c_error,alpha_used,backtracks,"
        "cg_iterations,tikhonov_stagnated\n";
  for (const auto& rec : r.records) {
    os << rec.k << ',' << format_real(rec.residual_unified) << ',' << format_real(rec.residual_landweber) << ','
       << format_real(rec.tikhonov_value) << ',' << opt_real(rec.f_error) << ',' << opt_real(rec.c_error) << ','
       << format_real(rec.alpha_used) << ',' << rec.backtracks << ',' << rec.cg_iterations << ','
       << (rec.tikhonov_stagnated ? 1 : 0) << '\n';
  }
  return os.str();
}

/// Checks the iteration log against the stopping-rule guarantees.
void inversion_checks(const InversionResult<double>& r, Manifest& m, const std::string& prefix = "") {
  m.add_check(check_true(prefix + "no_solver_failure", r.stop_reason != StopReason::solver_failure));
  if (r.stop_reason == StopReason::solver_failure) m.fail(prefix + "solver failure: " + r.failure_message);
  const double td = r.tau * r.delta;
  if (r.stop_reason == StopReason::discrepancy)
    m.add_check(check_le(prefix + "final_residual_within_tau_delta", r.final_residual(), td));
  bool chain = true, landweber_above = true;
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    chain = chain && rec.residual_unified <= rec.residual_landweber;
    const bool stopped_here = r.stop_reason == StopReason::discrepancy && i + 1 == r.records.size();
    if (!stopped_here && r.delta > 0) landweber_above = landweber_above && rec.residual_landweber > td;
  }
  m.add_check(check_true(prefix + "unified_not_above_landweber_every_cycle", chain));
  m.add_check(check_true(prefix + "landweber_residual_above_tau_delta_while_running", landweber_above));
  if (r.stop_reason == StopReason::discrepancy && r.delta > 0)
    m.add_check(check_le(prefix + "finite_stopping_bound", r.k_stop * td * td, r.landweber_sum_sq()));
}

json inversion_summary(const InversionResult<double>& r) {
  json j;
  j["stop_reason"] = to_string(r.stop_reason);
  j["k_stop"] = r.k_stop;
  j["initial_residual"] = r.initial_residual;
  j["final_residual"] = r.final_residual();
  j["tau_delta"] = r.tau * r.delta;
  j["landweber_residual_sum_sq"] = r.landweber_sum_sq();
  if (r.initial_f_error) j["initial_f_error"] = *r.initial_f_error;
  if (r.initial_c_error) j["initial_c_error"] = *r.initial_c_error;
  if (!r.records.empty() && r.records.back().f_error) {
    j["final_f_error"] = *r.records.back().f_error;
    j["final_c_error"] = *r.records.back().c_error;
  } else if (r.initial_f_error) {
    j["final_f_error"] = *r.initial_f_error;
    j["final_c_error"] = *r.initial_c_error;
  }
  int backtracks = 0, stagnated = 0;
  for (const auto& rec : r.records) {
    backtracks += rec.backtracks;
    stagnated += rec.tikhonov_stagnated ? 1 : 0;
  }
  j["total_backtracks"] = backtracks;
  j["stagnated_cycles"] = stagnated;
  if (!r.failure_message.empty()) j["failure"] = r.failure_message;
  return j;
}

// ---- modes --------------------------------------------------------------

void run_forward(const RunConfig& rc, Manifest& m, std::ostream& log) {
  const auto g = grid_from(rc, {});
  const Coefficients<double> k{field_from(g, rc.a, rc.a_file, 1.0, "a"), field_from(g, rc.c, rc.c_file, 1.0, "c"),
                               source_field(rc, g, 0.0), initial_state(rc, g)};
  k.validate();
  const auto traj = solve_forward(k);
  const auto u_final = traj.final_state();
  m.write_file("u_T.csv", field_to_csv(u_final));

  if (!rc.dump_levels.empty()) {
    std::vector<int> levels;
    if (rc.dump_levels == "all") {
      for (int lv = 0; lv <= g->steps(); ++lv) levels.push_back(lv);
    } else {
      std::stringstream ss(rc.dump_levels);
      std::string item;
      while (std::getline(ss, item, ',')) {
        char* end = nullptr;
        const long lv = std::strtol(item.c_str(), &end, 10);
        if (item.empty() || *end != '\0' || lv < 0 || lv > g->steps())
          throw ConfigError("dump_levels: bad level '" + item + "'");
        levels.push_back(static_cast<int>(lv));
      }
    }
    std::ostringstream index;
    index << "level,time,file\n";
    for (const int lv : levels) {
      const std::string name = "u_" + std::to_string(lv) + ".csv";
      m.write_file(name, field_to_csv(traj.at(lv)));
      index << lv << ',' << format_real(lv * g->dt()) << ',' << name << '\n';
    }
    m.write_file("levels.csv", index.str());
  }

  auto& res = m.results();
  res["u_final_l2"] = l2_norm(u_final);
  res["phi_l2"] = l2_norm(k.phi);
  res["u_final_min"] = u_final.min();
  res["max_abs_change"] = linf_norm(u_final - k.phi);
  if (rc.steady_tol) m.add_check(check_le("steady_state_max_change", res["max_abs_change"], *rc.steady_tol));
  log << "forward: |u(T)| = " << l2_norm(u_final) << ", max|u(T) - phi| = " << linf_norm(u_final - k.phi) << "\n";
}

void write_scenario_fields(const Scenario<double>& s, Manifest& m) {
  m.write_file("c_true.csv", field_to_csv(s.truth.c));
  m.write_file("f_true.csv", field_to_csv(s.truth.f));
  m.write_file("a.csv", field_to_csv(s.setup.a));
  m.write_file("phi.csv", field_to_csv(s.setup.phi));
  m.write_file("g_clean.csv", field_to_csv(s.clean_data));
  m.write_file("g_noisy.csv", field_to_csv(s.setup.g_data));
}

void run_phantom(const RunConfig& rc, Manifest& m, std::ostream& log) {
  const auto s = build_scenario(rc, rc.noise, rc.seed);
  write_scenario_fields(s, m);
  auto& res = m.results();
  res["scenario"] = rc.scenario;
  res["delta"] = s.setup.delta;
  res["clean_data_l2"] = l2_norm(s.clean_data);
  res["noise_l2"] = l2_distance(s.clean_data, s.setup.g_data);
  res["c_true_max"] = s.truth.c.max();
  res["f_true_max"] = s.truth.f.max();
  if (rc.scenario == "thermography") {
    const auto spec = thermography_spec(rc);
    const auto model = pennes_to_model(thermography_background(spec));
    m.write_file("perfusion_true.csv", field_to_csv(model.perfusion_from_reaction(s.truth.c)));
    m.write_file("metabolic_true.csv", field_to_csv(model.metabolic_from_source(s.truth.f)));
    m.write_file("temperature_T.csv", field_to_csv(model.to_tissue_temperature(s.setup.g_data)));
  }
  m.add_check(check_le("noise_level_exact",
                       std::abs(l2_distance(s.clean_data, s.setup.g_data) - s.setup.delta),
                       1e-12 * std::max(1.0, s.setup.delta)));
  log << "phantom: " << rc.scenario << ", delta = " << s.setup.delta << "\n";
}

void run_invert(const RunConfig& rc, Manifest& m, std::ostream& log) {
  auto& res = m.results();
  std::optional<Scenario<double>> sc;
  std::optional<Setup> file_setup;
  std::optional<Pair> file_init;
  if (rc.scenario == "file") {
    const auto g = grid_from(rc, {});
    Setup setup{g, field_from(g, rc.a, rc.a_file, 1.0, "a"), initial_state(rc, g), read_field(rc.g_file, g),
                *rc.delta};
    setup.validate();
    file_setup = setup;
    AdmissibleBox<double> box = override_box({}, rc);
    file_init = Pair(Field::constant(g, rc.c_init.value_or(1.0)), Field::constant(g, rc.f_init.value_or(0.0)), box);
  } else {
    sc = build_scenario(rc, rc.noise, rc.seed);
  }
  const Setup& setup = sc ? sc->setup : *file_setup;
  const Pair& init = sc ? sc->init : *file_init;
  const auto cfg = inversion_config(rc, setup, init, sc ? std::optional<double>(sc->alpha) : std::nullopt, res);
  const auto r = sc ? run_inversion(setup, cfg, init, sc->truth) : run_inversion(setup, cfg, init);

  m.write_file("c.csv", field_to_csv(r.final_pair.c));
  m.write_file("f.csv", field_to_csv(r.final_pair.f));
  m.write_file("iterations.csv", iterations_csv(r));
  res["scenario"] = rc.scenario;
  res["inversion"] = inversion_summary(r);
  inversion_checks(r, m);
  if (sc && rc.scenario == "thermography") {
    const auto est = locate_inclusion(r.final_pair.c, sc->c_background);
    const auto spec = thermography_spec(rc);
    res["inclusion"] = {{"centroid_x", est.centroid_x}, {"centroid_y", est.centroid_y},
                        {"true_x", spec.tumor.center_x}, {"true_y", spec.tumor.center_y},
                        {"excess_mass", est.excess_mass}, {"peak", est.peak},
                        {"contrast", est.contrast}};
  }
  log << "invert: stop = " << to_string(r.stop_reason) << ", k* = " << r.k_stop
      << ", residual = " << r.final_residual() << " (tau*delta = " << r.tau * r.delta << ")\n";
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

void run_sweep(const RunConfig& rc, Manifest& m, std::ostream& log) {
  std::vector<double> levels = rc.noise_list;
  std::sort(levels.begin(), levels.end(), std::greater<>());
  std::ostringstream table;
  table << "noise,delta,seed,k_stop,stop_reason,c_error,f_error\n";
  json per_level = json::array();
  std::vector<double> med_k, med_c, med_f;
  bool all_ok = true;
  for (const double noise : levels) {
    std::vector<double> ks, ce, fe;
    std::optional<InversionConfig<double>> cfg;
    json res;
    for (const auto seed : rc.seeds) {
      const auto sc = build_scenario(rc, noise, seed);
      if (!cfg) cfg = inversion_config(rc, sc.setup, sc.init, sc.alpha, res);
      auto local = *cfg;
      if (!rc.alpha) local.alpha = sc.alpha;
      const auto r = run_inversion(sc.setup, local, sc.init, sc.truth);
      const double c_err = r.records.empty() ? *r.initial_c_error : *r.records.back().c_error;
      const double f_err = r.records.empty() ? *r.initial_f_error : *r.records.back().f_error;
      all_ok = all_ok && r.stop_reason != StopReason::solver_failure;
      table << format_real(noise) << ',' << format_real(sc.setup.delta) << ',' << seed << ',' << r.k_stop << ','
            << to_string(r.stop_reason) << ',' << format_real(c_err) << ',' << format_real(f_err) << '\n';
      ks.push_back(r.k_stop);
      ce.push_back(c_err);
      fe.push_back(f_err);
    }
    med_k.push_back(median(ks));
    med_c.push_back(median(ce));
    med_f.push_back(median(fe));
    per_level.push_back({{"noise", noise},
                         {"gamma", res["gamma"]},
                         {"median_k_stop", med_k.back()},
                         {"median_c_error", med_c.back()},
                         {"median_f_error", med_f.back()}});
    log << "sweep: noise " << noise << " median k* " << med_k.back() << " c_err " << med_c.back() << " f_err "
        << med_f.back() << "\n";
  }
  m.write_file("sweep.csv", table.str());
  m.results()["levels"] = per_level;
  m.results()["seeds"] = rc.seeds;
  m.add_check(check_true("no_solver_failure", all_ok));
  for (std::size_t i = 1; i < levels.size(); ++i) {
    const std::string tag = "noise_" + format_real(levels[i - 1]) + "_to_" + format_real(levels[i]);
    m.add_check(check_ge("median_k_stop_nondecreasing_" + tag, med_k[i] - med_k[i - 1], 0));
    m.add_check(check_le("median_c_error_nonincreasing_" + tag, med_c[i] - med_c[i - 1], 0));
    m.add_check(check_le("median_f_error_nonincreasing_" + tag, med_f[i] - med_f[i - 1], 0));
  }
}

void run_adjoint_test(const RunConfig& rc, Manifest& m, std::ostream& log) {
  const auto g = grid_from(rc, {1, 101, 1.0, 50});
  const auto c = field_from(g, rc.c, rc.c_file, 1.0, "c");
  const Pair p(c, source_field(rc, g, 1.0), override_box(AdmissibleBox<double>{std::min(0.01, c.min()), 100, std::nullopt, std::nullopt}, rc));
  Setup setup{g, field_from(g, rc.a, rc.a_file, 1.0, "a"), initial_state(rc, g), Field::zeros(g), 0};
  setup.g_data = 0.5 * apply_F(p, setup);

  const auto adj = adjoint_mismatch(p, setup, rc.trials, rc.seed);
  const auto grad = gradient_check(p, setup, rc.fd_eps, rc.seed + 1000);
  const auto lin = sensitivity_linearity(p, setup, rc.seed + 2000);
  const auto est = estimate_step_gamma(p, setup);
  auto& res = m.results();
  res["trials"] = adj.trials;
  res["fd_eps"] = rc.fd_eps;
  res["gamma"] = est.gamma;
  res["operator_norm_sq"] = est.norm_sq;
  m.add_check(check_le("adjoint_identity_f", adj.worst_f, 1e-11));
  m.add_check(check_le("adjoint_identity_c", adj.worst_c, 1e-11));
  m.add_check(check_le("gradient_fd_f", grad.relative_error_f, 1e-4));
  m.add_check(check_le("gradient_fd_c", grad.relative_error_c, 1e-4));
  m.add_check(check_le("linearity_sensitivity_f", lin.relative_error_f, 1e-12));
  m.add_check(check_le("linearity_sensitivity_c", lin.relative_error_c, 1e-12));
  m.add_check(check_le("gamma_times_norm_sq", est.gamma * est.norm_sq, 0.9 + 1e-6));
  log << "adjoint-test: identity f " << adj.worst_f << ", c " << adj.worst_c << "; gradient f "
      << grad.relative_error_f << ", c " << grad.relative_error_c << "\n";
}

void run_convergence_test(const RunConfig& rc, Manifest& m, std::ostream& log) {
  const double a = rc.a.value_or(1.0), c = rc.c.value_or(1.0), horizon = rc.final_time.value_or(0.1);
  const double accuracy = eigenmode_error(201, 400, horizon, a, c);
  std::vector<double> dts, et, hs, es;
  for (const int steps : {10, 20, 40, 80}) {
    dts.push_back(horizon / steps);
    et.push_back(eigenmode_error(801, steps, horizon, a, c));
  }
  for (const int nodes : {11, 21, 41, 81}) {
    hs.push_back(1.0 / (nodes - 1));
    es.push_back(eigenmode_error(nodes, 200000, horizon, a, c));
  }
  const double p_time = observed_order(dts, et), p_space = observed_order(hs, es);
  auto& res = m.results();
  res["eigenmode_error_n201_M400"] = accuracy;
  res["time_study"] = {{"nodes", 801}, {"dt", dts}, {"errors", et}};
  res["space_study"] = {{"steps", 200000}, {"h", hs}, {"errors", es}};
  m.add_check(check_le("eigenmode_l2_error", accuracy, 2e-3));
  m.add_check(check_in("time_order", p_time, 0.75, 1.25));
  m.add_check(check_in("space_order", p_space, 1.8, 2.2));
  log << "convergence-test: error " << accuracy << ", time order " << p_time << ", space order " << p_space << "\n";
}

void run_witness(const RunConfig& rc, Manifest& m, std::ostream& log) {
  const auto g = grid_from(rc, {1, 101, 0.5, 1000});
  const auto a = field_from(g, rc.a, rc.a_file, 0.1, "a");
  const auto c = field_from(g, rc.c, rc.c_file, 1.0, "c");
  const auto steady = sine_mode(g);
  const auto kappa = Field::constant(g, rc.kappa);
  const auto box = override_box(AdmissibleBox<double>{}, rc);
  const auto w = nonuniqueness_witness(a, c, kappa, steady, box);

  const auto perturbed = 1.01 * steady;
  const Setup moved{g, a, perturbed, Field::zeros(g), 0};
  const double restored = l2_distance(apply_F(w.first, moved), apply_F(w.second, moved));

  const auto phi = 10.0 * sine_mode(g);
  const auto f = Field::zeros(g);
  const auto u_c = uniqueness_witness(a, c, c + Field::constant(g, 0.5), f, f, phi);
  const auto u_f = uniqueness_witness(a, c, c, f, f + sine_mode(g), phi);

  auto& res = m.results();
  res["kappa_l2"] = l2_norm(kappa);
  res["stationary_gap"] = w.gap;
  res["perturbed_phi_gap"] = restored;
  res["reaction_shift"] = {{"gap", u_c.gap}, {"discretization_error", u_c.discretization_error},
                           {"floor", u_c.floor}};
  res["source_shift"] = {{"gap", u_f.gap}, {"discretization_error", u_f.discretization_error},
                         {"floor", u_f.floor}};
  m.add_check(check_le("stationary_pairs_indistinguishable", w.gap, 1e-10));
  m.add_check(check_ge("perturbed_phi_restores_gap", restored, 1e-4));
  m.add_check(check_ge("reaction_shift_above_floor", u_c.gap, u_c.floor));
  m.add_check(check_ge("source_shift_above_floor", u_f.gap, u_f.floor));
  log << "witness: stationary gap " << w.gap << ", perturbed gap " << restored << ", reaction gap " << u_c.gap
      << " (floor " << u_c.floor << "), source gap " << u_f.gap << " (floor " << u_f.floor << ")\n";
}

}  // namespace

std::string resolve_out_dir(const RunConfig& rc) {
  if (!rc.out_dir.empty()) return rc.out_dir;
  if (const char* env = std::getenv("HEATID_OUT"); env && *env) return env;
  return "heatid_out";
}

int run(const RunConfig& rc, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  json echo = json::object();
  for (const auto& [k, v] : rc.given) echo[k] = v;
  Manifest m(resolve_out_dir(rc), rc.mode, echo);
  try {
    if (rc.mode == "forward") run_forward(rc, m, log);
    else if (rc.mode == "phantom") run_phantom(rc, m, log);
    else if (rc.mode == "invert") run_invert(rc, m, log);
    else if (rc.mode == "sweep") run_sweep(rc, m, log);
    else if (rc.mode == "adjoint-test") run_adjoint_test(rc, m, log);
    else if (rc.mode == "convergence-test") run_convergence_test(rc, m, log);
    else if (rc.mode == "witness") run_witness(rc, m, log);
    else throw ConfigError("mode: unknown mode '" + rc.mode + "'");
  } catch (const std::exception& e) {
    m.fail(e.what());
    m.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    log << "error: " << e.what() << "\n";
    return kExitError;
  }
  m.finish(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  for (const auto& c : m.checks())
    log << (c.passed ? "  pass  " : "  FAIL  ") << c.name << " = " << c.value << "\n";
  log << "manifest: " << m.path_of("manifest.json") << (m.passed() ? " (pass)" : " (fail)") << "\n";
  return m.passed() ? kExitPass : kExitCheckFailed;
}

}  // namespace heatid::cli
