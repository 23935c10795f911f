#pragma once

#include <Eigen/SparseCholesky>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "heatid/grid.hpp"

namespace heatid {

/// Lower bounds the assembler checks before building a step operator.
template <typename Scalar = double>
struct CoefficientBounds {
  Scalar a_lower = Scalar(1e-12);
  Scalar c_lower = Scalar(0);
};

/// Diffusivity a, reaction c, source f and initial state phi of
/// u_t - div(a grad u) + c u = f with homogeneous Dirichlet data.
template <typename Scalar = double>
struct Coefficients {
  ScalarField<Scalar> a;
  ScalarField<Scalar> c;
  ScalarField<Scalar> f;
  ScalarField<Scalar> phi;

  void validate(const CoefficientBounds<Scalar>& bounds = {}) const {
    require_same_grid(a, c);
    require_same_grid(a, f);
    require_same_grid(a, phi);
    if (a.min() < bounds.a_lower)
      throw AdmissibilityError("diffusivity a below its lower bound");
    if (c.min() < bounds.c_lower) throw AdmissibilityError("reaction c below its lower bound");
    if (!phi.zero_on_boundary()) throw ValidationError("phi must vanish on the boundary");
  }
};

/// One backward-Euler step x -> (I + dt A_h)^{-1} x for fixed (a, c), where
/// A_h discretizes -div(a grad .) + c with harmonic face averages of a and
/// Dirichlet rows eliminated. Works on interior unknowns; the factorization
/// is computed once and shared by copies.
template <typename Scalar = double>
class StepOperator {
 public:
  using Solver = Eigen::SimplicialLDLT<SparseMatrix<Scalar>, Eigen::Lower>;

  StepOperator(GridPtr<Scalar> grid, SparseMatrix<Scalar> a_h)
      : grid_(std::move(grid)), a_h_(std::move(a_h)) {
    const Index n = a_h_.rows();
    SparseMatrix<Scalar> eye(n, n);
    eye.setIdentity();
    SparseMatrix<Scalar> system = eye + grid_->dt() * a_h_;
    auto solver = std::make_shared<Solver>();
    solver->compute(system);
    if (solver->info() != Eigen::Success) throw SolverError("factorization of I + dt*A_h failed");
    solver_ = std::move(solver);
  }

  const GridSpec<Scalar>& grid() const { return *grid_; }
  const GridPtr<Scalar>& grid_ptr() const { return grid_; }
  /// A_h restricted to interior unknowns.
  const SparseMatrix<Scalar>& matrix() const { return a_h_; }

  Vector<Scalar> gather(const Vector<Scalar>& full) const {
    const auto& ids = grid_->interior();
    Vector<Scalar> v(static_cast<Index>(ids.size()));
    for (Index s = 0; s < v.size(); ++s) v[s] = full[ids[s]];
    return v;
  }

  Vector<Scalar> scatter(const Vector<Scalar>& inner) const {
    const auto& ids = grid_->interior();
    Vector<Scalar> v = Vector<Scalar>::Zero(grid_->size());
    for (Index s = 0; s < inner.size(); ++s) v[ids[s]] = inner[s];
    return v;
  }

  /// A_h u, with u treated as zero on the boundary.
  ScalarField<Scalar> apply(const ScalarField<Scalar>& u) const {
    if (!u.grid().same_as(*grid_)) throw ValidationError("apply: grid mismatch");
    return u.with_values(scatter(a_h_ * gather(u.values())));
  }

  Vector<Scalar> step(const Vector<Scalar>& rhs) const { return solver_->solve(rhs); }

 private:
  GridPtr<Scalar> grid_;
  SparseMatrix<Scalar> a_h_;
  std::shared_ptr<const Solver> solver_;
};

template <typename Scalar>
StepOperator<Scalar> assemble(const ScalarField<Scalar>& a, const ScalarField<Scalar>& c,
                              const CoefficientBounds<Scalar>& bounds = {}) {
  require_same_grid(a, c);
  if (a.min() < bounds.a_lower) throw AdmissibilityError("diffusivity a below its lower bound");
  if (c.min() < bounds.c_lower) throw AdmissibilityError("reaction c below its lower bound");

  const auto& g = a.grid();
  const auto& ids = g.interior();
  const auto& slot = g.interior_slot();
  const Index n = static_cast<Index>(ids.size());
  std::vector<Eigen::Triplet<Scalar>> t;
  t.reserve(static_cast<std::size_t>(n) * (1 + 2 * g.dim()));
  for (Index s = 0; s < n; ++s) {
    const Index k = ids[s];
    Scalar diag = c[k];
    for (int d = 0; d < g.dim(); ++d) {
      const Scalar inv_h2 = 1 / (g.spacing(d) * g.spacing(d));
      const Index stride = d == 0 ? 1 : g.nodes(0);
      for (const Index nb : {k - stride, k + stride}) {
        const Scalar face = 2 * a[k] * a[nb] / (a[k] + a[nb]);
        diag += face * inv_h2;
        if (slot[nb] >= 0) t.emplace_back(s, slot[nb], -face * inv_h2);
      }
    }
    t.emplace_back(s, s, diag);
  }
  SparseMatrix<Scalar> a_h(n, n);
  a_h.setFromTriplets(t.begin(), t.end());
  return StepOperator<Scalar>(a.grid_ptr(), std::move(a_h));
}

namespace detail {

template <typename Scalar>
void check_step(const Vector<Scalar>& v, int m) {
  if (!v.allFinite())
    throw SolverError("linear solve produced non-finite values at step " + std::to_string(m));
}

}  // namespace detail

/// Backward Euler from u^0 = phi with source f; returns all M+1 levels.
template <typename Scalar>
Trajectory<Scalar> solve_forward(const StepOperator<Scalar>& op, const ScalarField<Scalar>& f,
                                 const ScalarField<Scalar>& phi) {
  const int steps = op.grid().steps();
  const Scalar dt = op.grid().dt();
  const Vector<Scalar> src = dt * op.gather(f.values());
  std::vector<Vector<Scalar>> levels;
  levels.reserve(steps + 1);
  levels.push_back(phi.values());
  Vector<Scalar> u = op.gather(phi.values());
  for (int m = 1; m <= steps; ++m) {
    u = op.step(u + src);
    detail::check_step(u, m);
    levels.push_back(op.scatter(u));
  }
  return Trajectory<Scalar>(op.grid_ptr(), std::move(levels));
}

/// Same recursion, keeping only u^M.
template <typename Scalar>
ScalarField<Scalar> solve_forward_final(const StepOperator<Scalar>& op,
                                        const ScalarField<Scalar>& f,
                                        const ScalarField<Scalar>& phi) {
  const Scalar dt = op.grid().dt();
  const Vector<Scalar> src = dt * op.gather(f.values());
  Vector<Scalar> u = op.gather(phi.values());
  for (int m = 1; m <= op.grid().steps(); ++m) {
    u = op.step(u + src);
    detail::check_step(u, m);
  }
  return f.with_values(op.scatter(u));
}

template <typename Scalar>
Trajectory<Scalar> solve_forward(const Coefficients<Scalar>& k) {
  k.validate();
  return solve_forward(assemble(k.a, k.c), k.f, k.phi);
}

template <typename Scalar>
ScalarField<Scalar> solve_forward_final(const Coefficients<Scalar>& k) {
  k.validate();
  return solve_forward_final(assemble(k.a, k.c), k.f, k.phi);
}

/// w(T) for w_t + A_h w = h, w(0) = 0: the derivative of the final state in
/// the source direction h.
template <typename Scalar>
ScalarField<Scalar> solve_sensitivity_f(const StepOperator<Scalar>& op,
                                        const ScalarField<Scalar>& h) {
  if (!h.grid().same_as(op.grid())) throw ValidationError("sensitivity_f: grid mismatch");
  const Vector<Scalar> src = op.grid().dt() * op.gather(h.values());
  Vector<Scalar> w = Vector<Scalar>::Zero(src.size());
  for (int m = 1; m <= op.grid().steps(); ++m) {
    w = op.step(w + src);
    detail::check_step(w, m);
  }
  return h.with_values(op.scatter(w));
}

/// w(T) for w_t + A_h w = -kappa u(t), w(0) = 0, with u taken at the implicit
/// level m+1: the derivative of the final state in the reaction direction kappa.
template <typename Scalar>
ScalarField<Scalar> solve_sensitivity_c(const StepOperator<Scalar>& op,
                                        const ScalarField<Scalar>& kappa,
                                        const Trajectory<Scalar>& u) {
  if (!kappa.grid().same_as(op.grid()) || !u.grid().same_as(op.grid()))
    throw ValidationError("sensitivity_c: grid mismatch");
  const Scalar dt = op.grid().dt();
  const Vector<Scalar> k = op.gather(kappa.values());
  Vector<Scalar> w = Vector<Scalar>::Zero(k.size());
  for (int m = 1; m <= op.grid().steps(); ++m) {
    w = op.step(w - dt * k.cwiseProduct(op.gather(u.raw(m))));
    detail::check_step(w, m);
  }
  return kappa.with_values(op.scatter(w));
}

/// Output of the reverse sweep. `levels[m-1]` holds V^m for m = 1..M when kept.
template <typename Scalar = double>
struct AdjointSolution {
  std::vector<Vector<Scalar>> levels;
  ScalarField<Scalar> grad_f;
  std::optional<ScalarField<Scalar>> grad_c;
};

/// Exact transpose of the discrete final-state sensitivities. Runs the
/// factored step backwards from the data-space residual r:
///   V^M = K r,  V^{m-1} = K V^m,  K = (I + dt A_h)^{-1},
///   G_f = dt sum_m V^m,   G_c = -dt sum_m V^m .* u^m.
/// G_c is only formed when the forward trajectory is supplied.
template <typename Scalar>
AdjointSolution<Scalar> apply_adjoint_final(const StepOperator<Scalar>& op,
                                            const ScalarField<Scalar>& r,
                                            const Trajectory<Scalar>* u = nullptr,
                                            bool keep_levels = false) {
  if (!r.grid().same_as(op.grid())) throw ValidationError("adjoint: grid mismatch");
  if (u && !u->grid().same_as(op.grid())) throw ValidationError("adjoint: trajectory grid mismatch");
  const int steps = op.grid().steps();
  const Scalar dt = op.grid().dt();
  Vector<Scalar> v = op.gather(r.values());
  Vector<Scalar> gf = Vector<Scalar>::Zero(v.size());
  Vector<Scalar> gc = Vector<Scalar>::Zero(v.size());
  std::vector<Vector<Scalar>> levels;
  if (keep_levels) levels.resize(steps);
  for (int m = steps; m >= 1; --m) {
    v = op.step(v);
    detail::check_step(v, m);
    gf += v;
    if (u) gc -= v.cwiseProduct(op.gather(u->raw(m)));
    if (keep_levels) levels[m - 1] = op.scatter(v);
  }
  AdjointSolution<Scalar> out{std::move(levels), r.with_values(op.scatter(dt * gf)), std::nullopt};
  if (u) out.grad_c = r.with_values(op.scatter(dt * gc));
  return out;
}

}  // namespace heatid
