#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>

#include "heatid/operators.hpp"

namespace heatid {

/// Pennes bioheat parameters:
///   rho C_p U_t - div(a grad U) - omega_b rho_b c_b (Q_0 - U) = Q_m.
template <typename Scalar = double>
struct PennesParams {
  Scalar rho = 1;
  Scalar c_p = 1;
  Scalar rho_b = 1;
  Scalar c_b = 1;
  ScalarField<Scalar> omega_b;
  ScalarField<Scalar> q_m;
  Scalar q0 = 0;
  ScalarField<Scalar> a;
  /// Tissue temperature at t = 0; Q_0 everywhere when absent.
  std::optional<ScalarField<Scalar>> u_initial;
  Scalar perfusion_floor = Scalar(1e-12);

  void validate() const {
    if (!(rho > 0) || !(c_p > 0) || !(rho_b > 0) || !(c_b > 0))
      throw ValidationError("pennes: rho, c_p, rho_b, c_b must be positive");
    require_same_grid(omega_b, q_m);
    require_same_grid(omega_b, a);
    if (omega_b.min() < perfusion_floor || !(perfusion_floor > 0))
      throw ValidationError("pennes: perfusion omega_b below its floor");
    if (!(q_m.min() > 0)) throw ValidationError("pennes: metabolic heat Q_m must be positive");
    if (!(a.min() > 0)) throw ValidationError("pennes: conductivity a must be positive");
    if (u_initial) require_same_grid(omega_b, *u_initial);
  }
};

/// Reduced model obtained from Pennes data by dividing through by rho C_p and
/// shifting the temperature by Q_0.
template <typename Scalar = double>
struct PennesModel {
  Coefficients<Scalar> coeffs;
  Scalar q0;
  Scalar heat_capacity;    ///< rho C_p
  Scalar perfusion_scale;  ///< rho_b c_b / (rho C_p)

  ScalarField<Scalar> to_tissue_temperature(const ScalarField<Scalar>& u) const {
    return u.with_values(u.values().array() + q0);
  }
  ScalarField<Scalar> from_tissue_temperature(const ScalarField<Scalar>& temperature) const {
    return temperature.with_values(temperature.values().array() - q0);
  }
  ScalarField<Scalar> perfusion_from_reaction(const ScalarField<Scalar>& c) const {
    return (1 / perfusion_scale) * c;
  }
  ScalarField<Scalar> metabolic_from_source(const ScalarField<Scalar>& f) const {
    return heat_capacity * f;
  }
};

template <typename Scalar>
PennesModel<Scalar> pennes_to_model(const PennesParams<Scalar>& p) {
  p.validate();
  const Scalar cap = p.rho * p.c_p;
  const Scalar scale = p.rho_b * p.c_b / cap;
  const auto phi = p.u_initial ? p.u_initial->with_values(p.u_initial->values().array() - p.q0)
                               : ScalarField<Scalar>::zeros(p.omega_b.grid_ptr());
  if (!phi.zero_on_boundary())
    throw ValidationError("pennes: initial temperature must equal Q_0 on the boundary");
  Coefficients<Scalar> k{(1 / cap) * p.a, scale * p.omega_b, (1 / cap) * p.q_m, phi};
  return {std::move(k), p.q0, cap, scale};
}

template <typename Scalar = double>
struct TumorSpec {
  Scalar center_x = Scalar(0.5);
  Scalar center_y = Scalar(0.5);
  Scalar radius = Scalar(0.15);
  Scalar perfusion_contrast = 3;
  Scalar metabolic_contrast = 2;
  Scalar smoothing_width = 0;

  void validate() const {
    if (!(radius > 0)) throw ValidationError("tumor: radius must be positive");
    if (!(perfusion_contrast >= 1)) throw ValidationError("tumor: perfusion contrast must be >= 1");
    if (!(metabolic_contrast >= 1)) throw ValidationError("tumor: metabolic contrast must be >= 1");
    if (!(smoothing_width >= 0)) throw ValidationError("tumor: smoothing width must be >= 0");
  }
};

/// Mollified indicator of the inclusion: 1 inside radius - w/2, 0 outside
/// radius + w/2, cosine ramp in between.
template <typename Scalar>
ScalarField<Scalar> inclusion_profile(const TumorSpec<Scalar>& spec, const GridPtr<Scalar>& grid) {
  spec.validate();
  const Scalar reach = spec.radius + spec.smoothing_width / 2;
  for (int d = 0; d < grid->dim(); ++d) {
    const Scalar ctr = d == 0 ? spec.center_x : spec.center_y;
    if (!(ctr - reach > 0) || !(ctr + reach < grid->extent(d)))
      throw ValidationError("tumor: inclusion touches the boundary");
  }
  const Scalar w = spec.smoothing_width;
  return ScalarField<Scalar>::sample(grid, [&](Scalar x, Scalar y) {
    const Scalar dy = grid->dim() == 2 ? y - spec.center_y : Scalar(0);
    const Scalar d = std::hypot(x - spec.center_x, dy);
    if (w == 0) return d <= spec.radius ? Scalar(1) : Scalar(0);
    if (d <= spec.radius - w / 2) return Scalar(1);
    if (d >= spec.radius + w / 2) return Scalar(0);
    return Scalar(0.5) * (1 + std::cos(std::numbers::pi_v<Scalar> * (d - spec.radius + w / 2) / w));
  });
}

template <typename Scalar = double>
struct TumorPhantom {
  ParamPair<Scalar> truth;
  PennesModel<Scalar> model;
  ScalarField<Scalar> profile;
};

/// Background Pennes data with perfusion and metabolic heat raised inside the
/// inclusion by the contrast factors.
template <typename Scalar>
TumorPhantom<Scalar> make_tumor_phantom(const TumorSpec<Scalar>& spec, const PennesParams<Scalar>& background,
                                        const AdmissibleBox<Scalar>& box = {}) {
  background.validate();
  const auto profile = inclusion_profile(spec, background.omega_b.grid_ptr());
  auto scaled = [&](const ScalarField<Scalar>& base, Scalar contrast) {
    return base.with_values(base.values().array() * (1 + (contrast - 1) * profile.values().array()));
  };
  PennesParams<Scalar> p = background;
  p.omega_b = scaled(background.omega_b, spec.perfusion_contrast);
  p.q_m = scaled(background.q_m, spec.metabolic_contrast);
  auto model = pennes_to_model(p);
  ParamPair<Scalar> truth(model.coeffs.c, model.coeffs.f, box);
  return {std::move(truth), std::move(model), profile};
}

/// g + e where e is smoothed white noise with zero boundary trace, scaled so
/// that |e|_L2 = delta exactly. Deterministic in the seed.
template <typename Scalar>
ScalarField<Scalar> add_noise(const ScalarField<Scalar>& g, Scalar delta, std::uint64_t seed) {
  if (!(delta >= 0)) throw ValidationError("delta: must be >= 0");
  if (delta == 0) return g;
  const auto& grid = g.grid();
  for (std::uint64_t stream = 0; stream < 16; ++stream) {
    std::mt19937_64 rng(seed + 0x9E3779B97F4A7C15ULL * stream);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector<Scalar> e(grid.size());
    for (Index k = 0; k < e.size(); ++k) e[k] = static_cast<Scalar>(normal(rng));
    // two [1 2 1]/4 passes along each axis
    for (int pass = 0; pass < 2; ++pass) {
      for (int d = 0; d < grid.dim(); ++d) {
        const Index stride = d == 0 ? 1 : grid.nodes(0);
        Vector<Scalar> s = e;
        for (Index k = 0; k < e.size(); ++k) {
          const int i = d == 0 ? grid.ix(k) : grid.iy(k);
          if (i == 0 || i == grid.nodes(d) - 1) continue;
          s[k] = (e[k - stride] + 2 * e[k] + e[k + stride]) / 4;
        }
        e = s;
      }
    }
    for (Index k = 0; k < e.size(); ++k)
      if (grid.is_boundary(k)) e[k] = 0;
    const ScalarField<Scalar> noise(g.grid_ptr(), e);
    const Scalar n = l2_norm(noise);
    if (n > 0) return g + (delta / n) * noise;
  }
  throw SolverError("add_noise: zero perturbation in every substream");
}

namespace detail {

/// Bilinear interpolation of u onto a finer grid over the same domain.
template <typename Scalar>
ScalarField<Scalar> interpolate_to(const ScalarField<Scalar>& u, const GridPtr<Scalar>& fine) {
  const auto& g = u.grid();
  return ScalarField<Scalar>::sample(fine, [&](Scalar x, Scalar y) {
    auto locate = [&](Scalar p, int d, int& i0, Scalar& t) {
      const Scalar s = p / g.spacing(d);
      i0 = std::min(static_cast<int>(std::floor(s)), g.nodes(d) - 2);
      t = s - i0;
    };
    int i0 = 0, j0 = 0;
    Scalar tx = 0, ty = 0;
    locate(x, 0, i0, tx);
    if (g.dim() == 1) return (1 - tx) * u[g.index(i0)] + tx * u[g.index(i0 + 1)];
    locate(y, 1, j0, ty);
    return (1 - tx) * (1 - ty) * u[g.index(i0, j0)] + tx * (1 - ty) * u[g.index(i0 + 1, j0)] +
           (1 - tx) * ty * u[g.index(i0, j0 + 1)] + tx * ty * u[g.index(i0 + 1, j0 + 1)];
  });
}

}  // namespace detail

/// Richardson-style estimate of the L2 error of u(T): halves dt, then halves h
/// (injecting the fine solution back), and combines the two differences with
/// the factors for first order in time and second order in space.
template <typename Scalar>
Scalar discretization_error_estimate(const Coefficients<Scalar>& k) {
  const auto& g = k.a.grid();
  const auto base = solve_forward_final(k);

  const auto fine_t = with_time(g, g.final_time(), 2 * g.steps());
  auto on = [](const ScalarField<Scalar>& u, const GridPtr<Scalar>& grid) {
    return ScalarField<Scalar>(grid, u.values());
  };
  const Coefficients<Scalar> kt{on(k.a, fine_t), on(k.c, fine_t), on(k.f, fine_t), on(k.phi, fine_t)};
  const auto u_t = on(solve_forward_final(kt), k.a.grid_ptr());

  std::vector<Scalar> ext;
  std::vector<int> nod;
  for (int d = 0; d < g.dim(); ++d) {
    ext.push_back(g.extent(d));
    nod.push_back(2 * g.nodes(d) - 1);
  }
  const auto fine_s = build_grid<Scalar>(g.dim(), ext, nod, g.final_time(), g.steps());
  using detail::interpolate_to;
  const Coefficients<Scalar> ks{interpolate_to(k.a, fine_s), interpolate_to(k.c, fine_s),
                                interpolate_to(k.f, fine_s), interpolate_to(k.phi, fine_s)};
  const auto u_fine = solve_forward_final(ks);
  Vector<Scalar> injected(g.size());
  for (Index p = 0; p < g.size(); ++p) injected[p] = u_fine[fine_s->index(2 * g.ix(p), 2 * g.iy(p))];
  const ScalarField<Scalar> u_s(k.a.grid_ptr(), injected);

  return 2 * l2_distance(base, u_t) + Scalar(4) / 3 * l2_distance(base, u_s);
}

template <typename Scalar = double>
struct UniquenessReport {
  Scalar gap;                   ///< |F(c1,f1) - F(c2,f2)|
  Scalar discretization_error;  ///< larger of the two estimates
  Scalar floor;                 ///< 10 x discretization_error
  bool distinguishable;
};

/// Forward data of two parameter pairs and whether their gap clears the
/// discretization-error floor.
template <typename Scalar>
UniquenessReport<Scalar> uniqueness_witness(const ScalarField<Scalar>& a, const ScalarField<Scalar>& c1,
                                            const ScalarField<Scalar>& c2, const ScalarField<Scalar>& f1,
                                            const ScalarField<Scalar>& f2, const ScalarField<Scalar>& phi) {
  const Coefficients<Scalar> k1{a, c1, f1, phi};
  const Coefficients<Scalar> k2{a, c2, f2, phi};
  k1.validate();
  k2.validate();
  const Scalar gap = l2_distance(solve_forward_final(k1), solve_forward_final(k2));
  const Scalar err = std::max(discretization_error_estimate(k1), discretization_error_estimate(k2));
  return {gap, err, 10 * err, gap >= 10 * err};
}

template <typename Scalar = double>
struct NonuniquenessWitness {
  ParamPair<Scalar> first;
  ParamPair<Scalar> second;
  ScalarField<Scalar> phi;  ///< the steady state, used as initial data
  Scalar gap;
};

/// Two distinct pairs with identical final data: phi = u_s is a discrete
/// steady state for (c, A_h(a,c) u_s) and also for (c + kappa, A_h(a,c) u_s + kappa u_s).
template <typename Scalar>
NonuniquenessWitness<Scalar> nonuniqueness_witness(const ScalarField<Scalar>& a, const ScalarField<Scalar>& c,
                                                   const ScalarField<Scalar>& kappa,
                                                   const ScalarField<Scalar>& steady,
                                                   const AdmissibleBox<Scalar>& box = {}) {
  if (!steady.zero_on_boundary()) throw ValidationError("witness: steady state must vanish on the boundary");
  const auto op = assemble(a, c);
  const auto f1 = op.apply(steady);
  ParamPair<Scalar> first(c, f1, box);
  ParamPair<Scalar> second(c + kappa, f1 + hadamard(kappa, steady), box);
  const ProblemSetup<Scalar> setup{a.grid_ptr(), a, steady, ScalarField<Scalar>::zeros(a.grid_ptr()), 0};
  const Scalar gap = l2_distance(apply_F(first, setup), apply_F(second, setup));
  return {std::move(first), std::move(second), steady, gap};
}

/// Smooth bump exp(-|x - center|^2 / (2 width^2)) cut to zero on the boundary.
template <typename Scalar>
ScalarField<Scalar> gaussian_bump(const GridPtr<Scalar>& grid, Scalar cx, Scalar cy, Scalar width) {
  return ScalarField<Scalar>::sample(grid, [&](Scalar x, Scalar y) {
           const Scalar dy = grid->dim() == 2 ? y - cy : Scalar(0);
           const Scalar r2 = (x - cx) * (x - cx) + dy * dy;
           return std::exp(-r2 / (2 * width * width));
         })
      .with_zero_boundary();
}

/// Product of sines sin(pi x / Lx) [sin(pi y / Ly)], zero on the boundary.
template <typename Scalar>
ScalarField<Scalar> sine_mode(const GridPtr<Scalar>& grid, int kx = 1, int ky = 1) {
  const Scalar pi = std::numbers::pi_v<Scalar>;
  return ScalarField<Scalar>::sample(grid, [&](Scalar x, Scalar y) {
           Scalar v = std::sin(kx * pi * x / grid->extent(0));
           if (grid->dim() == 2) v *= std::sin(ky * pi * y / grid->extent(1));
           return v;
         })
      .with_zero_boundary();
}

}  // namespace heatid
