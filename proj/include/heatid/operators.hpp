#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>

#include "heatid/pde.hpp"

namespace heatid {

/// Pointwise box for the reaction coefficient, optional box for the source.
template <typename Scalar = double>
struct AdmissibleBox {
  Scalar c_lower = Scalar(0.01);
  Scalar c_upper = Scalar(100);
  std::optional<Scalar> f_lower;
  std::optional<Scalar> f_upper;

  void validate() const {
    if (!(c_lower > 0)) throw ValidationError("c_lower: must be positive");
    if (!(c_upper >= c_lower) || !std::isfinite(static_cast<double>(c_upper)))
      throw ValidationError("c_upper: must be finite and >= c_lower");
    if (f_lower && f_upper && *f_upper < *f_lower)
      throw ValidationError("f_upper: must be >= f_lower");
  }
};

template <typename Scalar>
ScalarField<Scalar> clip(const ScalarField<Scalar>& u, Scalar lo, Scalar hi) {
  return u.with_values(u.values().cwiseMax(lo).cwiseMin(hi));
}

/// Pointwise clip of c into [c_lower, c_upper].
template <typename Scalar>
ScalarField<Scalar> project_admissible(const ScalarField<Scalar>& c, const AdmissibleBox<Scalar>& box) {
  box.validate();
  return clip(c, box.c_lower, box.c_upper);
}

template <typename Scalar>
ScalarField<Scalar> project_source(const ScalarField<Scalar>& f, const AdmissibleBox<Scalar>& box) {
  const Scalar lo = box.f_lower.value_or(-std::numeric_limits<Scalar>::infinity());
  const Scalar hi = box.f_upper.value_or(std::numeric_limits<Scalar>::infinity());
  return clip(f, lo, hi);
}

/// An element (c, f) of the admissible parameter set.
template <typename Scalar = double>
struct ParamPair {
  ScalarField<Scalar> c;
  ScalarField<Scalar> f;
  AdmissibleBox<Scalar> box;

  ParamPair(ScalarField<Scalar> c_, ScalarField<Scalar> f_, AdmissibleBox<Scalar> box_ = {})
      : c(std::move(c_)), f(std::move(f_)), box(box_) {
    box.validate();
    require_same_grid(c, f);
    if (c.min() < box.c_lower || c.max() > box.c_upper)
      throw AdmissibilityError("reaction c outside [c_lower, c_upper]");
    if ((box.f_lower && f.min() < *box.f_lower) || (box.f_upper && f.max() > *box.f_upper))
      throw AdmissibilityError("source f outside its bounds");
  }
};

/// Known data of an identification problem.
template <typename Scalar = double>
struct ProblemSetup {
  GridPtr<Scalar> grid;
  ScalarField<Scalar> a;
  ScalarField<Scalar> phi;
  ScalarField<Scalar> g_data;
  Scalar delta = 0;

  void validate() const {
    if (!a.grid().same_as(*grid) || !phi.grid().same_as(*grid) || !g_data.grid().same_as(*grid))
      throw ValidationError("setup: fields must live on the setup grid");
    if (!phi.zero_on_boundary()) throw ValidationError("setup: phi must vanish on the boundary");
    if (!g_data.zero_on_boundary()) throw ValidationError("setup: g_data must vanish on the boundary");
    if (!(delta >= 0)) throw ValidationError("delta: must be >= 0");
  }
};

/// Assembled step operator and forward trajectory at one (c, f), with the
/// derivative and adjoint actions of the final-state map at that point.
template <typename Scalar = double>
class ForwardState {
 public:
  ForwardState(const ProblemSetup<Scalar>& setup, const ScalarField<Scalar>& c,
               const ScalarField<Scalar>& f)
      : op_(assemble(setup.a, c)), u_(solve_forward(op_, f, setup.phi)) {}

  const StepOperator<Scalar>& op() const { return op_; }
  const Trajectory<Scalar>& trajectory() const { return u_; }
  ScalarField<Scalar> output() const { return u_.final_state(); }

  ScalarField<Scalar> apply_df(const ScalarField<Scalar>& h) const { return solve_sensitivity_f(op_, h); }
  ScalarField<Scalar> apply_dc(const ScalarField<Scalar>& kappa) const {
    return solve_sensitivity_c(op_, kappa, u_);
  }
  ScalarField<Scalar> grad_f(const ScalarField<Scalar>& r) const { return apply_adjoint_final(op_, r).grad_f; }
  ScalarField<Scalar> grad_c(const ScalarField<Scalar>& r) const {
    return *apply_adjoint_final(op_, r, &u_).grad_c;
  }

 private:
  StepOperator<Scalar> op_;
  Trajectory<Scalar> u_;
};

/// Final state u(T) for the pair (c, f).
template <typename Scalar>
ScalarField<Scalar> apply_F(const ParamPair<Scalar>& p, const ProblemSetup<Scalar>& setup) {
  return solve_forward_final(assemble(setup.a, p.c), p.f, setup.phi);
}

/// f -> u(T) with c held fixed. Affine in f.
template <typename Scalar>
ScalarField<Scalar> apply_Fc(const ScalarField<Scalar>& f, const ScalarField<Scalar>& c,
                             const ProblemSetup<Scalar>& setup) {
  return solve_forward_final(assemble(setup.a, c), f, setup.phi);
}

/// c -> u(T) with f held fixed.
template <typename Scalar>
ScalarField<Scalar> apply_Af(const ScalarField<Scalar>& c, const ScalarField<Scalar>& f,
                             const ProblemSetup<Scalar>& setup) {
  return solve_forward_final(assemble(setup.a, c), f, setup.phi);
}

/// L2 adjoint of the source sensitivity at p applied to a data-space residual.
template <typename Scalar>
ScalarField<Scalar> grad_f(const ScalarField<Scalar>& residual, const ParamPair<Scalar>& p,
                           const ProblemSetup<Scalar>& setup) {
  return apply_adjoint_final(assemble(setup.a, p.c), residual).grad_f;
}

/// L2 adjoint of the reaction sensitivity at p applied to a data-space residual.
template <typename Scalar>
ScalarField<Scalar> grad_c(const ScalarField<Scalar>& residual, const ParamPair<Scalar>& p,
                           const ProblemSetup<Scalar>& setup) {
  return ForwardState<Scalar>(setup, p.c, p.f).grad_c(residual);
}

template <typename Scalar = double>
struct StepSizeEstimate {
  Scalar gamma;          ///< 0.9 / norm_sq, or the conservative value on failure
  Scalar norm_sq;        ///< estimated squared operator norm of the source sensitivity
  Scalar conservative;   ///< 0.9 / T^2
  int iterations;
  bool converged;
};

/// Power iteration on h -> F'^* F' h for the Landweber step size.
template <typename Scalar>
StepSizeEstimate<Scalar> estimate_step_gamma(const ParamPair<Scalar>& p,
                                             const ProblemSetup<Scalar>& setup,
                                             int iterations = 50, Scalar rel_tol = Scalar(1e-8)) {
  if (iterations < 5) throw ValidationError("iterations: power iteration needs at least 5");
  const auto op = assemble(setup.a, p.c);
  const Scalar horizon = setup.grid->final_time();
  const Scalar conservative = Scalar(0.9) / (horizon * horizon);
  auto x = ScalarField<Scalar>::constant(setup.grid, 1).with_zero_boundary();
  x = (1 / l2_norm(x)) * x;
  Scalar lambda = 0;
  for (int it = 1; it <= iterations; ++it) {
    const auto y = apply_adjoint_final(op, solve_sensitivity_f(op, x)).grad_f;
    const Scalar next = l2_inner(x, y);
    const Scalar ny = l2_norm(y);
    if (!(ny > 0)) break;
    x = (1 / ny) * y;
    if (it > 1 && std::abs(next - lambda) <= rel_tol * std::abs(next))
      return {Scalar(0.9) / next, next, conservative, it, true};
    lambda = next;
  }
  return {conservative, lambda, conservative, iterations, false};
}

template <typename Scalar = double>
struct EtaEstimate {
  Scalar eta_c = 0;            ///< max Taylor-remainder ratio of c -> A_f(c)
  Scalar eta_f = 0;            ///< same for f -> F_c(f); zero up to round-off
  Scalar max_step_l2 = 0;      ///< largest L2 size of the admissible c perturbations
  Scalar max_step_linf = 0;    ///< and their sup norm
  int samples_used = 0;
  int samples_skipped = 0;
};

/// Random unit-L2 direction with zero boundary trace, deterministic in the seed.
template <typename Scalar>
ScalarField<Scalar> random_direction(const GridPtr<Scalar>& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector<Scalar> v(grid->size());
  for (Index k = 0; k < v.size(); ++k) v[k] = grid->is_boundary(k) ? Scalar(0) : Scalar(normal(rng));
  ScalarField<Scalar> d(grid, std::move(v));
  const Scalar n = l2_norm(d);
  return n > 0 ? (1 / n) * d : d;
}

/// Empirical tangential-cone constants around p_center: the max over random
/// perturbations of |G(x~) - G(x) - G'(x)(x~ - x)| / |G(x~) - G(x)| for
/// G = A_f (in c) and G = F_c (in f).
template <typename Scalar>
EtaEstimate<Scalar> estimate_eta(const ParamPair<Scalar>& p_center, Scalar radius, int samples,
                                 const ProblemSetup<Scalar>& setup, std::uint64_t seed = 1) {
  if (samples < 1) throw ValidationError("samples: need at least 1");
  if (!(radius > 0)) throw ValidationError("radius: must be positive");
  const ForwardState<Scalar> base(setup, p_center.c, p_center.f);
  const auto g0 = base.output();
  constexpr Scalar floor = Scalar(1e-14);
  EtaEstimate<Scalar> out;
  for (int s = 0; s < samples; ++s) {
    const auto dir_c = random_direction(setup.grid, seed + 2 * static_cast<std::uint64_t>(s));
    const auto dir_f = random_direction(setup.grid, seed + 2 * static_cast<std::uint64_t>(s) + 1);
    const auto c_new = project_admissible(p_center.c + radius * dir_c, p_center.box);
    const auto step = c_new - p_center.c;
    const auto inc_c = apply_Af(c_new, p_center.f, setup) - g0;
    const auto inc_f = apply_Fc(p_center.f + radius * dir_f, p_center.c, setup) - g0;
    const Scalar nc = l2_norm(inc_c);
    const Scalar nf = l2_norm(inc_f);
    if (nc < floor || nf < floor) {
      ++out.samples_skipped;
      continue;
    }
    ++out.samples_used;
    out.eta_c = std::max(out.eta_c, l2_norm(inc_c - base.apply_dc(step)) / nc);
    out.eta_f = std::max(out.eta_f, l2_norm(inc_f - base.apply_df(radius * dir_f)) / nf);
    out.max_step_l2 = std::max(out.max_step_l2, l2_norm(step));
    out.max_step_linf = std::max(out.max_step_linf, linf_norm(step));
  }
  if (out.samples_used == 0) throw SolverError("estimate_eta: every sample had a degenerate increment");
  return out;
}

}  // namespace heatid
