#include <doctest.h>

#include <cmath>

#include "heatid/diagnostics.hpp"
#include "heatid/operators.hpp"
#include "heatid/scenarios.hpp"
#include "test_util.hpp"

using namespace heatid;
using testutil::pi;

namespace {

ProblemSetup<double> setup_on(const GridPtr<double>& g, double a, const Field& phi) {
  return {g, Field::constant(g, a), phi, Field::zeros(g), 0.0};
}

ParamPair<double> random_pair(const GridPtr<double>& g, std::uint64_t seed) {
  return {testutil::random_field(g, seed, 0.5, 2.0), testutil::random_field(g, seed + 1, -1, 1)};
}

}  // namespace

TEST_CASE("apply_F: steady state and zero data") {
  const auto g = build_grid<double>(1, {1.0}, {201}, 1.0, 50);
  const auto phi = testutil::sine(g);
  const auto s = setup_on(g, 1.0, phi);
  const ParamPair<double> steady(Field::constant(g, 1.0), (pi * pi + 1) * phi);
  CHECK(l2_distance(apply_F(steady, s), phi) <= 1e-3);

  const auto zero_setup = setup_on(g, 1.0, Field::zeros(g));
  const ParamPair<double> quiet(Field::constant(g, 1.0), Field::zeros(g));
  CHECK(l2_norm(apply_F(quiet, zero_setup)) == 0.0);
}

TEST_CASE("apply_F: eigenmode superposition") {
  const double T = 0.2, c0 = 1.0;
  const auto g = build_grid<double>(1, {1.0}, {201}, T, 400);
  const auto phi = testutil::sine(g);
  const double lam = pi * pi + c0;
  const auto expected = std::exp(-lam * T) * phi + ((1 - std::exp(-lam * T)) / lam) * phi;
  const auto out = apply_F(ParamPair<double>(Field::constant(g, c0), phi), setup_on(g, 1.0, phi));
  CHECK(l2_distance(out, expected) <= 0.01 * l2_norm(expected));
}

TEST_CASE("apply_Fc and apply_Af agree bitwise with apply_F") {
  const auto g = build_grid<double>(2, {1.0, 1.0}, {11, 11}, 0.5, 10);
  const auto s = setup_on(g, 0.3, testutil::sine(g));
  const auto p = random_pair(g, 5);
  const auto full = apply_F(p, s);
  CHECK((apply_Fc(p.f, p.c, s).values().array() == full.values().array()).all());
  CHECK((apply_Af(p.c, p.f, s).values().array() == full.values().array()).all());
}

TEST_CASE("apply_Fc is affine in f") {
  const auto g = build_grid<double>(1, {1.0}, {81}, 0.5, 40);
  const auto s = setup_on(g, 1.0, testutil::sine(g));
  const auto c = testutil::random_field(g, 1, 0.5, 2.0);
  const auto offset = apply_Fc(Field::zeros(g), c, s);
  const auto f1 = testutil::random_field(g, 2), f2 = testutil::random_field(g, 3);
  const double al = 1.7, be = -0.6;
  const auto lin = [&](const Field& f) { return apply_Fc(f, c, s) - offset; };
  const auto l1 = lin(f1), l2 = lin(f2);
  CHECK(l2_distance(lin(al * f1 + be * f2), al * l1 + be * l2) <= 1e-12 * (l2_norm(al * l1) + l2_norm(be * l2)));
}

TEST_CASE("apply_Af is not affine in c") {
  const auto g = build_grid<double>(1, {1.0}, {81}, 0.5, 40);
  const auto s = setup_on(g, 1.0, testutil::sine(g));
  const auto f = Field::constant(g, 1.0);
  const auto c0 = Field::constant(g, 1.0);
  const auto c1 = testutil::random_field(g, 4, 1.0, 3.0), c2 = testutil::random_field(g, 5, 1.0, 3.0);
  const auto lhs = apply_Af(c1 + c2 - c0, f, s);
  const auto rhs = apply_Af(c1, f, s) + apply_Af(c2, f, s) - apply_Af(c0, f, s);
  CHECK(l2_distance(lhs, rhs) >= 1e-6);
}

TEST_CASE("grad_f and grad_c satisfy the adjoint identities") {
  const auto g = build_grid<double>(2, {1.0, 1.0}, {13, 13}, 0.4, 20);
  auto s = setup_on(g, 0.5, testutil::sine(g));
  const auto p = random_pair(g, 7);
  const auto mm = adjoint_mismatch(p, s, 10, 99);
  CHECK(mm.worst_f <= 1e-11);
  CHECK(mm.worst_c <= 1e-11);

  // Also through the free functions, with an explicitly built direction.
  const auto kappa = testutil::random_field(g, 20), r = testutil::random_field(g, 21, -1, 1, true);
  const ForwardState<double> st(s, p.c, p.f);
  const double lhs = l2_inner(st.apply_dc(kappa), r), rhs = l2_inner(kappa, grad_c(r, p, s));
  CHECK(std::abs(lhs - rhs) <= 1e-11 * l2_norm(kappa) * l2_norm(r));
  const double lhs_f = l2_inner(st.apply_df(kappa), r), rhs_f = l2_inner(kappa, grad_f(r, p, s));
  CHECK(std::abs(lhs_f - rhs_f) <= 1e-11 * l2_norm(kappa) * l2_norm(r));

  CHECK(l2_norm(grad_c(Field::zeros(g), p, s)) == 0.0);
  CHECK(l2_norm(grad_f(Field::zeros(g), p, s)) == 0.0);
}

TEST_CASE("gradients match central differences of the misfit") {
  const auto g = build_grid<double>(1, {1.0}, {101}, 0.5, 50);
  auto s = setup_on(g, 1.0, 5.0 * testutil::sine(g));
  s.g_data = testutil::random_field(g, 11, 0.0, 1.0, true);
  const auto p = random_pair(g, 12);
  const auto chk = gradient_check(p, s, 1e-5, 13);
  CHECK(chk.relative_error_f <= 1e-4);
  CHECK(chk.relative_error_c <= 1e-4);

  // Independent loss oracle: the same check with a hand-written misfit.
  const auto kappa = random_direction(g, 14);
  auto loss = [&](const Field& c) {
    const double d = l2_distance(apply_Af(c, p.f, s), s.g_data);
    return d * d / 2;
  };
  const double eps = 1e-5;
  const double fd = (loss(p.c + eps * kappa) - loss(p.c - eps * kappa)) / (2 * eps);
  const double ad = l2_inner(grad_c(apply_F(p, s) - s.g_data, p, s), kappa);
  CHECK(std::abs(fd - ad) <= 1e-4 * std::abs(ad));
}

TEST_CASE("estimate_step_gamma: eigenmode norm and safety factor") {
  const double T = 0.5, c0 = 1.0;
  const auto g = build_grid<double>(1, {1.0}, {201}, T, 400);
  const auto s = setup_on(g, 1.0, testutil::sine(g));
  const ParamPair<double> p(Field::constant(g, c0), Field::zeros(g));
  const auto est = estimate_step_gamma(p, s);
  const double lam = pi * pi + c0;
  const double norm = (1 - std::exp(-lam * T)) / lam;
  CHECK(est.converged);
  CHECK(std::sqrt(est.norm_sq) == doctest::Approx(norm).epsilon(0.01));
  CHECK(est.gamma * est.norm_sq <= 0.9 + 1e-6);
  CHECK(est.gamma >= 0.9 / (T * T));
  CHECK(est.conservative == doctest::Approx(0.9 / (T * T)));
  CHECK_THROWS_AS(estimate_step_gamma(p, s, 4), ValidationError);
}

TEST_CASE("estimate_eta: affine part is exact and remainder shrinks with radius") {
  const auto sc = make_benchmark(BenchmarkSpec<double>{}, 0.0, 1);
  const auto& p = sc.truth;
  std::vector<double> radii{1e-1, 1e-2, 1e-3}, etas;
  for (const double r : radii) {
    const auto est = estimate_eta(p, r, 5, sc.setup, 3);
    CHECK(est.eta_f <= 1e-10);
    etas.push_back(est.eta_c);
  }
  CHECK(std::log10(etas[0] / etas[1]) >= 0.8);
  CHECK(std::log10(etas[1] / etas[2]) >= 0.8);

  const double radius = 0.1 * l2_norm(p.c);
  const auto est = estimate_eta(p, radius, 10, sc.setup, 5);
  MESSAGE("eta_c at radius " << radius << " on the benchmark phantom: " << est.eta_c << " (step L2 "
                             << est.max_step_l2 << ", sup " << est.max_step_linf << ")");
  CHECK(est.eta_c < 1.0);
  CHECK_THROWS_AS(estimate_eta(p, 0.0, 5, sc.setup), ValidationError);
  CHECK_THROWS_AS(estimate_eta(p, 0.1, 0, sc.setup), ValidationError);
}

TEST_CASE("project_admissible: clip, idempotence and nonexpansiveness") {
  const auto g = build_grid<double>(1, {1.0}, {51}, 1.0, 1);
  const AdmissibleBox<double> box{0.5, 2.0, std::nullopt, std::nullopt};
  const auto inside = testutil::random_field(g, 1, 0.5, 2.0);
  CHECK((project_admissible(inside, box).values().array() == inside.values().array()).all());
  const auto above = Field::constant(g, box.c_upper + 1);
  CHECK((project_admissible(above, box).values().array() == box.c_upper).all());
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto c1 = testutil::random_field(g, 100 + s, -3, 5), c2 = testutil::random_field(g, 200 + s, -3, 5);
    const auto p1 = project_admissible(c1, box), p2 = project_admissible(c2, box);
    CHECK(l2_distance(p1, p2) <= l2_distance(c1, c2));
    CHECK((project_admissible(p1, box).values().array() == p1.values().array()).all());
    CHECK(p1.min() >= box.c_lower);
    CHECK(p1.max() <= box.c_upper);
  }
  CHECK_THROWS_AS(project_admissible(inside, AdmissibleBox<double>{0.0, 1.0, std::nullopt, std::nullopt}),
                  ValidationError);
  CHECK_THROWS_AS(project_admissible(inside, AdmissibleBox<double>{2.0, 1.0, std::nullopt, std::nullopt}),
                  ValidationError);
}

TEST_CASE("project_source honours optional bounds") {
  const auto g = build_grid<double>(1, {1.0}, {11}, 1.0, 1);
  const auto f = testutil::random_field(g, 3, -5, 5);
  CHECK((project_source(f, AdmissibleBox<double>{}).values().array() == f.values().array()).all());
  const auto lo = project_source(f, AdmissibleBox<double>{0.01, 100, 0.0, std::nullopt});
  CHECK(lo.min() >= 0.0);
}

TEST_CASE("ParamPair rejects inadmissible pairs") {
  const auto g = build_grid<double>(1, {1.0}, {11}, 1.0, 1);
  CHECK_THROWS_AS(ParamPair<double>(Field::constant(g, 0.0), Field::zeros(g)), AdmissibilityError);
  CHECK_THROWS_AS(ParamPair<double>(Field::constant(g, 1e3), Field::zeros(g)), AdmissibilityError);
  CHECK_THROWS_AS(
      ParamPair<double>(Field::constant(g, 1.0), Field::constant(g, -1.0), AdmissibleBox<double>{0.01, 100, 0.0, {}}),
      AdmissibilityError);
  const auto other = build_grid<double>(1, {1.0}, {13}, 1.0, 1);
  CHECK_THROWS_AS(ParamPair<double>(Field::constant(g, 1.0), Field::zeros(other)), ValidationError);
}

TEST_CASE("forward map is continuous along a converging sequence") {
  const auto g = build_grid<double>(1, {1.0}, {101}, 0.5, 50);
  const auto s = setup_on(g, 1.0, testutil::sine(g));
  const ParamPair<double> base(Field::constant(g, 1.0), Field::constant(g, 1.0));
  const auto pc = testutil::random_field(g, 31, 0.0, 1.0), pf = testutil::random_field(g, 32);
  const auto g0 = apply_F(base, s);
  double prev = std::numeric_limits<double>::infinity();
  for (int n = 1; n <= 64; n *= 2) {
    const ParamPair<double> pn(base.c + (1.0 / n) * pc, base.f + (1.0 / n) * pf);
    const double d = l2_distance(apply_F(pn, s), g0);
    CHECK(d <= 1.1 * prev);
    prev = d;
  }
  CHECK(prev <= 0.05 * l2_distance(apply_F(ParamPair<double>(base.c + pc, base.f + pf), s), g0));
}
