// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "heatid/phantom.hpp"
#include "heatid/regularizer.hpp"
#include "heatid/scenarios.hpp"
#include "modes.hpp"

using namespace heatid;

namespace {

constexpr double pi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Trapezoid-weighted L2 norm written out independently of the grid weights.
double l2_by_hand(const Field& u) {
  const auto& g = u.grid();
  double s = 0;
  for (Index k = 0; k < u.size(); ++k) {
    double w = 1;
    for (int d = 0; d < g.dim(); ++d) {
      const int i = d == 0 ? g.ix(k) : g.iy(k);
      w *= g.spacing(d) * ((i == 0 || i == g.nodes(d) - 1) ? 0.5 : 1.0);
    }
    s += w * u[k] * u[k];
  }
  return std::sqrt(s);
}

Field random_field(const GridPtr<double>& g, std::mt19937_64& rng, double lo, double hi, bool zero_boundary) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector<double> v(g->size());
  for (Index k = 0; k < v.size(); ++k) v[k] = u(rng);
  Field f(g, v);
  return zero_boundary ? f.with_zero_boundary() : f;
}

Field sine(const GridPtr<double>& g) {
  return Field::sample(g, [&](double x, double y) {
           return std::sin(pi * x) * (g->dim() == 2 ? std::sin(pi * y) : 1.0);
         })
      .with_zero_boundary();
}

double eigenmode_l2_error(int n, int M, double T) {
  const auto g = build_grid<double>(1, {1.0}, {n}, T, M);
  const auto phi = sine(g);
  const auto uT = solve_forward_final(Coefficients<double>{Field::constant(g, 1.0), Field::constant(g, 1.0),
                                                           Field::zeros(g), phi});
  return l2_by_hand(uT - std::exp(-(pi * pi + 1) * T) * phi);
}

InversionConfig<double> config_for(const Scenario<double>& sc, double rho = 1) {
  InversionConfig<double> cfg;
  cfg.rho = rho;
  cfg.gamma = estimate_step_gamma(sc.init, sc.setup).gamma;
  cfg.alpha = sc.alpha;
  cfg.validate(sc.setup.delta);
  return cfg;
}

// ---------------------------------------------------------------------------

Outcome forward_oracle() {
  const double err = eigenmode_l2_error(201, 400, 0.1);
  std::vector<double> dts, et;
  for (const int M : {10, 20, 40, 80}) {
    dts.push_back(0.1 / M);
    et.push_back(eigenmode_l2_error(801, M, 0.1));
  }
  std::vector<double> hs, es;
  for (const int n : {11, 21, 41, 81}) {
    hs.push_back(1.0 / (n - 1));
    es.push_back(eigenmode_l2_error(n, 200000, 0.1));
  }
  const double p_t = loglog_slope(dts, et), p_s = loglog_slope(hs, es);
  const bool ok = err <= 2e-3 && p_t >= 0.75 && p_t <= 1.25 && p_s >= 1.8 && p_s <= 2.2;
  return {ok, "L2 error " + fmt(err) + " (<= 2e-3), time order " + fmt(p_t) + " in [0.75, 1.25], space order " +
                  fmt(p_s) + " in [1.8, 2.2]"};
}

Outcome contraction_positivity() {
  std::mt19937_64 rng(2024);
  int draws = 0, failures = 0;
  double worst_ratio = 0, worst_min = 0;
  for (const int dim : {1, 2}) {
    const auto g = dim == 1 ? build_grid<double>(1, {1.0}, {101}, 0.5, 50)
                            : build_grid<double>(2, {1.0, 1.0}, {33, 33}, 0.5, 50);
    for (int t = 0; t < 20; ++t, ++draws) {
      const auto a = random_field(g, rng, 0.05, 2.0, false);
      const auto c = random_field(g, rng, 0.01, 5.0, false);
      const auto phi = random_field(g, rng, 0.0, 1.0, true);
      const auto f = random_field(g, rng, 0.0, 1.0, false);
      const auto cooled = solve_forward(Coefficients<double>{a, c, Field::zeros(g), phi});
      const double ratio = l2_by_hand(cooled.final_state()) / l2_by_hand(phi);
      const auto heated = solve_forward(Coefficients<double>{a, c, f, phi});
      double lowest = 0;
      for (int m = 0; m < heated.levels(); ++m)
        lowest = std::min({lowest, heated.raw(m).minCoeff(), cooled.raw(m).minCoeff()});
      worst_ratio = std::max(worst_ratio, ratio);
      worst_min = std::min(worst_min, lowest);
      if (ratio > 1 || lowest < 0) ++failures;
    }
  }
  return {failures == 0, std::to_string(draws) + " draws, max |u(T)|/|phi| " + fmt(worst_ratio) +
                             ", min u over all levels " + fmt(worst_min)};
}

Outcome adjoint_identities() {
  std::mt19937_64 rng(7);
  double worst_f = 0, worst_c = 0;
  for (const int dim : {1, 2}) {
    const auto g = dim == 1 ? build_grid<double>(1, {1.0}, {101}, 0.5, 50)
                            : build_grid<double>(2, {1.0, 1.0}, {21, 21}, 0.5, 30);
    const auto a = random_field(g, rng, 0.2, 2.0, false);
    const auto c = random_field(g, rng, 0.1, 3.0, false);
    const auto op = assemble(a, c);
    const auto traj = solve_forward(op, random_field(g, rng, -1, 1, false), random_field(g, rng, -1, 1, true));
    for (int t = 0; t < 10; ++t) {
      const auto h = random_field(g, rng, -1, 1, false);
      const auto kappa = random_field(g, rng, -1, 1, false);
      const auto r = random_field(g, rng, -1, 1, true);
      const auto adj = apply_adjoint_final(op, r, &traj);
      const double ef = std::abs(l2_inner(solve_sensitivity_f(op, h), r) - l2_inner(h, adj.grad_f)) /
                        (l2_norm(h) * l2_norm(r));
      const double ec = std::abs(l2_inner(solve_sensitivity_c(op, kappa, traj), r) - l2_inner(kappa, *adj.grad_c)) /
                        (l2_norm(kappa) * l2_norm(r));
      worst_f = std::max(worst_f, ef);
      worst_c = std::max(worst_c, ec);
    }
  }
  return {worst_f <= 1e-11 && worst_c <= 1e-11,
          "worst relative mismatch f " + fmt(worst_f) + ", c " + fmt(worst_c) + " (<= 1e-11, 10 trials per grid)"};
}

Outcome gradient_check_fd() {
  std::mt19937_64 rng(11);
  const auto g = build_grid<double>(1, {1.0}, {101}, 0.5, 50);
  const ProblemSetup<double> s{g, Field::constant(g, 1.0), 5.0 * sine(g), random_field(g, rng, 0, 1, true), 0.0};
  const auto c = random_field(g, rng, 0.5, 2.0, false), f = random_field(g, rng, -1, 1, false);
  auto misfit = [&](const Field& cc, const Field& ff) {
    const double d = l2_by_hand(solve_forward_final(assemble(s.a, cc), ff, s.phi) - s.g_data);
    return d * d / 2;
  };
  const double eps = 1e-5;
  const auto residual = apply_F(ParamPair<double>(c, f), s) - s.g_data;
  const ParamPair<double> p(c, f);
  double worst_f = 0, worst_c = 0;
  for (int t = 0; t < 3; ++t) {
    const auto h = random_field(g, rng, -1, 1, true);
    const auto kappa = random_field(g, rng, -1, 1, true);
    const double fd_f = (misfit(c, f + eps * h) - misfit(c, f - eps * h)) / (2 * eps);
    const double fd_c = (misfit(c + eps * kappa, f) - misfit(c - eps * kappa, f)) / (2 * eps);
    const double ad_f = l2_inner(grad_f(residual, p, s), h);
    const double ad_c = l2_inner(grad_c(residual, p, s), kappa);
    worst_f = std::max(worst_f, std::abs(fd_f - ad_f) / std::abs(ad_f));
    worst_c = std::max(worst_c, std::abs(fd_c - ad_c) / std::abs(ad_c));
  }
  return {worst_f <= 1e-4 && worst_c <= 1e-4,
          "relative error f " + fmt(worst_f) + ", c " + fmt(worst_c) + " (<= 1e-4 at eps = 1e-5)"};
}

Outcome tangential_cone() {
  const auto sc = make_benchmark(BenchmarkSpec<double>{}, 0.0, 1);
  const auto& s = sc.setup;
  const auto& p = sc.truth;
  const ForwardState<double> base(s, p.c, p.f);
  const auto g0 = base.output();
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  auto direction = [&] {
    Vector<double> v(s.grid->size());
    for (Index k = 0; k < v.size(); ++k) v[k] = s.grid->is_boundary(k) ? 0.0 : normal(rng);
    const Field d(s.grid, v);
    return (1 / l2_by_hand(d)) * d;
  };
  double worst_affine = 0;
  std::vector<double> radii{1e-1, 1e-2, 1e-3}, ratios;
  for (const double r : radii) {
    double worst = 0;
    for (int t = 0; t < 5; ++t) {
      const auto dc = direction(), df = direction();
      const auto inc_c = apply_Af(p.c + r * dc, p.f, s) - g0;
      worst = std::max(worst, l2_by_hand(inc_c - base.apply_dc(r * dc)) / l2_by_hand(inc_c));
      const auto inc_f = apply_Fc(p.f + r * df, p.c, s) - g0;
      worst_affine = std::max(worst_affine, l2_by_hand(inc_f - base.apply_df(r * df)) / l2_by_hand(inc_f));
    }
    ratios.push_back(worst);
  }
  const double slope = loglog_slope(radii, ratios);
  const double min_step = std::min(std::log10(ratios[0] / ratios[1]), std::log10(ratios[1] / ratios[2]));
  return {worst_affine <= 1e-10 && slope >= 0.8 && min_step >= 0.8,
          "F_c remainder " + fmt(worst_affine) + " (<= 1e-10); A_f cone ratios " + fmt(ratios[0]) + ", " +
              fmt(ratios[1]) + ", " + fmt(ratios[2]) + ", slope " + fmt(slope) + " (>= 0.8)"};
}

Outcome benchmark_surrogates() {
  const auto sc = make_benchmark(BenchmarkSpec<double>{}, 0.01, 1);
  const auto cfg = config_for(sc);
  const auto res = run_inversion(sc.setup, cfg, sc.init, sc.truth);
  const double td = cfg.tau * sc.setup.delta;
  // (a) stopped by the discrepancy rule; the final residual is recomputed here.
  const double final_res = l2_by_hand(apply_F(res.final_pair, sc.setup) - sc.setup.g_data);
  const bool a = res.stop_reason == StopReason::discrepancy && res.k_stop < 500 && final_res <= td;
  // (b) finite-stopping inequality from the logged Landweber residuals.
  double sum_sq = 0;
  for (const auto& r : res.records) sum_sq += r.residual_landweber * r.residual_landweber;
  const bool b = res.k_stop * td * td <= sum_sq;
  // (c) f-error monotone in at least 90% of cycles before the stop.
  int monotone = 0, cycles = 0;
  double prev = *res.initial_f_error;
  for (const auto& r : res.records) {
    ++cycles;
    if (*r.f_error <= prev) ++monotone;
    prev = *r.f_error;
  }
  const double frac = cycles ? static_cast<double>(monotone) / cycles : 0.0;
  const bool c = frac >= 0.9;
  // (d) unified residual never above the Landweber residual of the same cycle.
  bool d = true;
  for (const auto& r : res.records) d = d && r.residual_unified <= r.residual_landweber;
  return {a && b && c && d,
          std::string("(a) ") + (a ? "ok" : "FAIL") + ": k* = " + std::to_string(res.k_stop) + ", residual " +
              fmt(final_res) + " <= tau*delta " + fmt(td) + "; (b) " + (b ? "ok" : "FAIL") + ": " +
              fmt(res.k_stop * td * td) + " <= " + fmt(sum_sq) + "; (c) " + (c ? "ok" : "FAIL") + ": f-error " +
              "non-increasing in " + fmt(100 * frac) + "% of cycles; (d) " + (d ? "ok" : "FAIL")};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2;
}

Outcome semi_convergence() {
  std::vector<double> med_c, med_f;
  std::string detail;
  for (const double noise : {0.04, 0.02, 0.01}) {
    std::vector<double> ce, fe;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto sc = make_benchmark(BenchmarkSpec<double>{}, noise, seed);
      const auto res = run_inversion(sc.setup, config_for(sc), sc.init);
      ce.push_back(l2_by_hand(res.final_pair.c - sc.truth.c));
      fe.push_back(l2_by_hand(res.final_pair.f - sc.truth.f));
    }
    med_c.push_back(median(ce));
    med_f.push_back(median(fe));
    detail += (detail.empty() ? "" : "; ") + std::string("delta ") + fmt(100 * noise) + "%: median c-err " +
              fmt(med_c.back()) + ", f-err " + fmt(med_f.back());
  }
  bool c_ok = true, f_ok = true;
  for (std::size_t i = 1; i < med_c.size(); ++i) {
    c_ok = c_ok && med_c[i] <= med_c[i - 1];
    f_ok = f_ok && med_f[i] <= med_f[i - 1];
  }
  detail += std::string(" | c monotone: ") + (c_ok ? "yes" : "NO") + ", f monotone: " + (f_ok ? "yes" : "NO");
  return {c_ok && f_ok, detail};
}

Outcome uniqueness_witnesses() {
  const auto g = build_grid<double>(1, {1.0}, {101}, 0.5, 1000);
  const auto a = Field::constant(g, 0.1), c = Field::constant(g, 1.0), f = Field::constant(g, 1.0);
  const auto phi = sine(g);
  // Discretization floor: 10x the distance to a reference solve on a 4x finer
  // grid with 8x more steps, sampled back at the coarse nodes.
  const auto fine = build_grid<double>(1, {1.0}, {401}, 0.5, 8000);
  auto coarse_error = [&](double c0, const std::function<double(double)>& src) {
    const auto u = solve_forward_final(Coefficients<double>{a, Field::constant(g, c0),
                                                            Field::sample(g, [&](double x, double) { return src(x); }),
                                                            phi});
    const auto uf = solve_forward_final(Coefficients<double>{
        Field::constant(fine, 0.1), Field::constant(fine, c0),
        Field::sample(fine, [&](double x, double) { return src(x); }), sine(fine)});
    Vector<double> inj(g->size());
    for (Index k = 0; k < inj.size(); ++k) inj[k] = uf[4 * k];
    return l2_by_hand(u - Field(g, inj));
  };
  auto one = [](double) { return 1.0; };
  auto shifted = [](double x) { return 1.0 + std::sin(pi * x); };
  const double floor_c = 10 * std::max(coarse_error(1.0, one), coarse_error(1.5, one));
  const double floor_f = 10 * std::max(coarse_error(1.0, one), coarse_error(1.0, shifted));
  const ProblemSetup<double> s{g, a, phi, Field::zeros(g), 0.0};
  const double gap_c = l2_by_hand(apply_F(ParamPair<double>(c, f), s) -
                                  apply_F(ParamPair<double>(Field::constant(g, 1.5), f), s));
  const double gap_f = l2_by_hand(apply_F(ParamPair<double>(c, f), s) - apply_F(ParamPair<double>(c, f + sine(g)), s));

  const auto wit = nonuniqueness_witness(a, c, Field::constant(g, 0.3), phi);
  const ProblemSetup<double> steady{g, a, wit.phi, Field::zeros(g), 0.0};
  const double gap_s = l2_by_hand(apply_F(wit.first, steady) - apply_F(wit.second, steady));
  const double c_dist = l2_by_hand(wit.first.c - wit.second.c);
  const bool ok = gap_c >= floor_c && gap_f >= floor_f && gap_s <= 1e-10 && std::abs(c_dist - 0.3) <= 1e-12;
  return {ok, "reaction gap " + fmt(gap_c) + " >= floor " + fmt(floor_c) + ", source gap " + fmt(gap_f) +
                  " >= floor " + fmt(floor_f) + "; stationary gap " + fmt(gap_s) + " (<= 1e-10) with |c1 - c2| = " +
                  fmt(c_dist)};
}

Outcome thermography() {
  const ThermographySpec<double> spec;
  const auto sc = make_thermography(spec, 0.01, 1);
  const auto res = run_inversion(sc.setup, config_for(sc, spec.rho), sc.init, sc.truth);
  const auto& g = *sc.setup.grid;
  const auto& c = res.final_pair.c;
  double mass = 0, mx = 0, my = 0;
  for (Index k = 0; k < c.size(); ++k) {
    const double wx = (g.ix(k) == 0 || g.ix(k) == g.nodes(0) - 1) ? 0.5 : 1.0;
    const double wy = (g.iy(k) == 0 || g.iy(k) == g.nodes(1) - 1) ? 0.5 : 1.0;
    const double e = std::max(0.0, c[k] - spec.perfusion) * wx * wy;
    mass += e;
    mx += e * g.x(k);
    my += e * g.y(k);
  }
  const double cx = mass > 0 ? mx / mass : -1, cy = mass > 0 ? my / mass : -1;
  const double dist = std::hypot(cx - spec.tumor.center_x, cy - spec.tumor.center_y);
  const double cells = dist / g.spacing(0);
  const double contrast = c.max() / spec.perfusion;
  const bool ok = res.stop_reason != StopReason::solver_failure && mass > 0 && cells <= 2 && contrast >= 1.5;
  return {ok, "stop " + std::string(to_string(res.stop_reason)) + " at k = " + std::to_string(res.k_stop) +
                  ", centroid (" + fmt(cx) + ", " + fmt(cy) + ") is " + fmt(cells) +
                  " cells from the centre (<= 2), contrast " + fmt(contrast) + " (>= 1.5)"};
}

Outcome reproducibility() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "heatid_acceptance_repro";
  fs::remove_all(root);
  std::string logs[2];
  for (int i = 0; i < 2; ++i) {
    const auto dir = root / std::to_string(i);
    const auto rc = cli::resolve_config({}, {{"mode", "invert"}, {"seed", "5"}, {"out_dir", dir.string()}});
    std::ostringstream sink;
    cli::run(rc, sink);
    std::ifstream in(dir / "iterations.csv", std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    logs[i] = ss.str();
  }
  const bool ok = !logs[0].empty() && logs[0] == logs[1];
  return {ok, "two runs with seed 5: iterations.csv " + std::to_string(logs[0].size()) + " bytes, " +
                  (ok ? "identical" : "DIFFERENT")};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double budget_seconds;
    Outcome (*fn)();
  };
  const Criterion criteria[] = {
      {1, "forward-solver oracle", 5, forward_oracle},
      {2, "contraction and positivity", 10, contraction_positivity},
      {3, "discrete adjoint identities", 10, adjoint_identities},
      {4, "gradient check", 10, gradient_check_fd},
      {5, "tangential-cone behaviour", 30, tangential_cone},
      {6, "benchmark stopping surrogates", 120, benchmark_surrogates},
      {7, "semi-convergence", 600, semi_convergence},
      {8, "uniqueness witnesses", 10, uniqueness_witnesses},
      {9, "thermography end-to-end", 600, thermography},
      {10, "reproducibility", 0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.fn();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.budget_seconds <= 0 || secs <= c.budget_seconds;
    const bool pass = out.pass && in_time;
    if (!pass) ++failed;
    std::printf("criterion %d: %s  %s: %s [%.2f s%s%s]\n", c.id, pass ? "PASS" : "FAIL", c.title, out.detail.c_str(),
                secs, c.budget_seconds > 0 ? (" of " + fmt(c.budget_seconds) + " s").c_str() : "",
                in_time ? "" : ", over budget");
    std::fflush(stdout);
  }
  std::printf("%d of 10 criteria passed\n", 10 - failed);
  return failed == 0 ? 0 : 1;
}
