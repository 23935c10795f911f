#pragma once

#include <cstdint>
#include <optional>

#include "heatid/phantom.hpp"
#include "heatid/regularizer.hpp"

namespace heatid {

/// A synthetic identification problem: noisy data from a known truth plus
/// the starting pair of the iteration.
template <typename Scalar = double>
struct Scenario {
  ProblemSetup<Scalar> setup;
  ParamPair<Scalar> truth;
  ParamPair<Scalar> init;
  ScalarField<Scalar> clean_data;
  Scalar c_background = 1;
  Scalar alpha = Scalar(1e-3);  ///< Tikhonov weight the scenario was tuned with
};

/// Clean data F(truth), then noise with |g - g_delta| = relative_noise |g|.
template <typename Scalar>
Scenario<Scalar> synthesize(const ScalarField<Scalar>& a, const ScalarField<Scalar>& phi,
                            const ParamPair<Scalar>& truth, const ParamPair<Scalar>& init,
                            Scalar relative_noise, std::uint64_t seed) {
  if (!(relative_noise >= 0)) throw ValidationError("noise: must be >= 0");
  const ProblemSetup<Scalar> clean_setup{a.grid_ptr(), a, phi, ScalarField<Scalar>::zeros(a.grid_ptr()), 0};
  auto clean = apply_F(truth, clean_setup);
  const Scalar delta = relative_noise * l2_norm(clean);
  ProblemSetup<Scalar> setup{a.grid_ptr(), a, phi, add_noise(clean, delta, seed), delta};
  setup.validate();
  return {std::move(setup), truth, init, std::move(clean)};
}

/// 1D benchmark: c* = c_background + c_bump * b, f* = f_bump * b with b a
/// Gaussian bump, observed after heating from phi = phi_amplitude sin(pi x).
template <typename Scalar = double>
struct BenchmarkSpec {
  int nodes = 101;
  int steps = 200;
  Scalar final_time = 1;
  Scalar diffusivity = 1;
  Scalar phi_amplitude = 10;
  Scalar bump_center = Scalar(0.5);
  Scalar bump_width = Scalar(0.1);
  Scalar c_background = 1;
  Scalar c_bump = Scalar(0.5);
  Scalar f_bump = 2;
  Scalar alpha = Scalar(0.1);
  AdmissibleBox<Scalar> box{Scalar(0.1), Scalar(10), std::nullopt, std::nullopt};
};

template <typename Scalar>
Scenario<Scalar> make_benchmark(const BenchmarkSpec<Scalar>& spec, Scalar relative_noise, std::uint64_t seed) {
  const auto grid = build_grid<Scalar>(1, {Scalar(1)}, {spec.nodes}, spec.final_time, spec.steps);
  const auto bump = gaussian_bump(grid, spec.bump_center, Scalar(0), spec.bump_width);
  const auto one = ScalarField<Scalar>::constant(grid, 1);
  const ParamPair<Scalar> truth(spec.c_background * one + spec.c_bump * bump, spec.f_bump * bump, spec.box);
  const ParamPair<Scalar> init(spec.c_background * one, ScalarField<Scalar>::zeros(grid), spec.box);
  auto s = synthesize(spec.diffusivity * one, spec.phi_amplitude * sine_mode(grid), truth, init,
                      relative_noise, seed);
  s.c_background = spec.c_background;
  s.alpha = spec.alpha;
  return s;
}

/// 2D thermography phantom in unit Pennes constants. The skin is heated to
/// q0 + heating_amplitude sin(pi x) sin(pi y) and the temperature recorded
/// after `final_time`. Background perfusion and metabolic heat are known, and
/// the source is bounded below by its background value.
template <typename Scalar = double>
struct ThermographySpec {
  int nodes = 49;
  int steps = 40;
  Scalar final_time = Scalar(0.5);
  Scalar conductivity = Scalar(0.1);
  Scalar heating_amplitude = 10;
  Scalar q0 = 37;
  Scalar perfusion = 1;
  Scalar metabolic = 1;
  Scalar rho = 2;
  TumorSpec<Scalar> tumor{};
  Scalar c_upper = 20;
  Scalar c_lower = Scalar(0.1);
};

template <typename Scalar>
PennesParams<Scalar> thermography_background(const ThermographySpec<Scalar>& spec) {
  const auto grid = build_grid<Scalar>(2, {Scalar(1), Scalar(1)}, {spec.nodes, spec.nodes}, spec.final_time,
                                       spec.steps);
  const auto one = ScalarField<Scalar>::constant(grid, 1);
  const auto heat = spec.heating_amplitude * sine_mode(grid);
  return PennesParams<Scalar>{1, 1, 1, 1,
                              spec.perfusion * one,
                              spec.metabolic * one,
                              spec.q0,
                              spec.conductivity * one,
                              heat.with_values(heat.values().array() + spec.q0)};
}

template <typename Scalar>
AdmissibleBox<Scalar> thermography_box(const ThermographySpec<Scalar>& spec) {
  AdmissibleBox<Scalar> box{spec.c_lower, spec.c_upper, std::nullopt, std::nullopt};
  box.f_lower = spec.metabolic;  // unit Pennes constants: f = Q_m
  return box;
}

template <typename Scalar>
Scenario<Scalar> make_thermography(const ThermographySpec<Scalar>& spec, Scalar relative_noise,
                                   std::uint64_t seed) {
  const auto bg = thermography_background(spec);
  const auto box = thermography_box(spec);
  const auto phantom = make_tumor_phantom(spec.tumor, bg, box);
  const auto background = pennes_to_model(bg);
  const ParamPair<Scalar> init(background.coeffs.c, background.coeffs.f, box);
  auto s = synthesize(phantom.model.coeffs.a, phantom.model.coeffs.phi, phantom.truth, init, relative_noise, seed);
  s.c_background = background.coeffs.c.max();
  s.alpha = choose_alpha(s.setup.delta, spec.rho);
  return s;
}

/// Where the reconstructed reaction exceeds its background.
template <typename Scalar = double>
struct InclusionEstimate {
  Scalar centroid_x = 0;
  Scalar centroid_y = 0;
  Scalar excess_mass = 0;  ///< integral of (c - c_background)_+
  Scalar peak = 0;         ///< max c
  Scalar contrast = 0;     ///< peak / c_background
};

template <typename Scalar>
InclusionEstimate<Scalar> locate_inclusion(const ScalarField<Scalar>& c, Scalar c_background) {
  const auto& g = c.grid();
  const auto& w = g.weights();
  InclusionEstimate<Scalar> out;
  Scalar mx = 0, my = 0;
  for (Index k = 0; k < c.size(); ++k) {
    const Scalar e = std::max(Scalar(0), c[k] - c_background) * w[k];
    out.excess_mass += e;
    mx += e * g.x(k);
    my += e * g.y(k);
  }
  if (out.excess_mass > 0) {
    out.centroid_x = mx / out.excess_mass;
    out.centroid_y = my / out.excess_mass;
  }
  out.peak = c.max();
  out.contrast = out.peak / c_background;
  return out;
}

}  // namespace heatid
