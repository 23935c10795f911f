#pragma once

#include <chrono>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include "heatid/operators.hpp"

namespace heatid {

/// Discrepancy factor 1.05 * 2(1+eta)/(1-eta).
template <typename Scalar>
Scalar choose_tau(Scalar eta_assumed) {
  if (!(eta_assumed >= 0) || !(eta_assumed < 1))
    throw ValidationError("eta_assumed: must lie in [0, 1)");
  return Scalar(1.05) * 2 * (1 + eta_assumed) / (1 - eta_assumed);
}

/// Smallest tau the discrepancy rule accepts for a given cone constant.
template <typename Scalar>
Scalar tau_bound(Scalar eta_assumed) {
  return 2 * (1 + eta_assumed) / (1 - eta_assumed);
}

/// Tikhonov weight max(6.6 (delta/rho)^2, 1e-8).
template <typename Scalar>
Scalar choose_alpha(Scalar delta, Scalar rho) {
  if (!(rho > 0)) throw ValidationError("rho: must be positive");
  if (!(delta >= 0)) throw ValidationError("delta: must be >= 0");
  const Scalar ratio = delta / rho;
  return std::max(Scalar(6.6) * ratio * ratio, Scalar(1e-8));
}

template <typename Scalar = double>
struct InversionConfig {
  Scalar gamma = 1;
  Scalar alpha = Scalar(1e-3);
  Scalar tau = choose_tau(Scalar(0.2));
  Scalar eta_assumed = Scalar(0.2);
  Scalar rho = 1;
  int k_max = 500;
  Scalar inner_cg_tol = Scalar(1e-6);
  int inner_cg_maxit = 100;
  Scalar backtrack_factor = 4;
  int max_backtracks = 10;
  /// Stagnation: relative drop of the unified residual over `stagnation_window`
  /// cycles below `stagnation_tol`.
  int stagnation_window = 10;
  Scalar stagnation_tol = Scalar(1e-10);

  void validate(Scalar delta) const {
    if (!(gamma > 0)) throw ValidationError("gamma: must be positive");
    if (!(alpha > 0)) throw ValidationError("alpha: must be positive");
    if (!(eta_assumed >= 0) || !(eta_assumed < 1))
      throw ValidationError("eta_assumed: must lie in [0, 1)");
    if (!(tau > tau_bound(eta_assumed)))
      throw ValidationError("tau: must exceed 2(1+eta)/(1-eta) = " +
                            std::to_string(static_cast<double>(tau_bound(eta_assumed))));
    if (!(rho > 0)) throw ValidationError("rho: must be positive");
    if (delta > 0 && alpha < 6 * (delta / rho) * (delta / rho))
      throw ValidationError("alpha: must be at least 6 (delta/rho)^2");
    if (k_max < 0) throw ValidationError("k_max: must be >= 0");
    if (!(inner_cg_tol > 0)) throw ValidationError("inner_cg_tol: must be positive");
    if (inner_cg_maxit < 1) throw ValidationError("inner_cg_maxit: must be >= 1");
    if (!(backtrack_factor > 1)) throw ValidationError("backtrack_factor: must exceed 1");
    if (max_backtracks < 0) throw ValidationError("max_backtracks: must be >= 0");
    if (stagnation_window < 1) throw ValidationError("stagnation_window: must be >= 1");
  }
};

/// One coupled cycle k-1 -> k.
template <typename Scalar = double>
struct IterationRecord {
  int k = 0;
  Scalar residual_unified = 0;    ///< |F(c_k, f_k) - g|
  Scalar residual_landweber = 0;  ///< |F(c_{k-1}, f_k) - g|
  Scalar tikhonov_value = 0;      ///< J_alpha(c_k) about c_{k-1}
  std::optional<Scalar> f_error;  ///< |f* - f_k| when the truth is known
  std::optional<Scalar> c_error;
  Scalar alpha_used = 0;
  int backtracks = 0;
  int cg_iterations = 0;
  bool tikhonov_stagnated = false;
  double wall_seconds = 0;
};

enum class StopReason { discrepancy, k_max, stagnation, solver_failure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::discrepancy: return "discrepancy";
    case StopReason::k_max: return "k_max";
    case StopReason::stagnation: return "stagnation";
    case StopReason::solver_failure: return "solver_failure";
  }
  return "unknown";
}

template <typename Scalar = double>
struct InversionResult {
  ParamPair<Scalar> final_pair;
  StopReason stop_reason;
  int k_stop = 0;
  Scalar tau = 0;
  Scalar delta = 0;
  Scalar initial_residual = 0;
  std::optional<Scalar> initial_f_error;
  std::optional<Scalar> initial_c_error;
  std::vector<IterationRecord<Scalar>> records;
  std::string failure_message;

  Scalar final_residual() const {
    return records.empty() ? initial_residual : records.back().residual_unified;
  }
  /// sum_{k < k*} |F(c_k, f_{k+1}) - g|^2
  Scalar landweber_sum_sq() const {
    Scalar s = 0;
    for (const auto& r : records) s += r.residual_landweber * r.residual_landweber;
    return s;
  }
  /// sum_{k < k*} |F(c_k, f_k) - g|^2, the cycle-start residuals.
  Scalar start_residual_sum_sq() const {
    Scalar s = initial_residual * initial_residual;
    for (std::size_t i = 0; i + 1 < records.size(); ++i)
      s += records[i].residual_unified * records[i].residual_unified;
    return records.empty() ? Scalar(0) : s;
  }
};

/// Stop iff residual <= tau * delta. Never fires for noise-free data.
template <typename Scalar>
bool unified_discrepancy(Scalar residual_unified, Scalar tau, Scalar delta) {
  if (!(delta >= 0)) throw ValidationError("delta: must be >= 0");
  if (delta == 0) return false;
  return residual_unified <= tau * delta;
}

/// f_{k+1} = f_k + gamma F'^*(g - F_c(f_k)) using the state at (c_k, f_k).
template <typename Scalar>
ScalarField<Scalar> landweber_step(const ForwardState<Scalar>& at_ck_fk, const ScalarField<Scalar>& f_k,
                                   const ProblemSetup<Scalar>& setup, Scalar gamma,
                                   const AdmissibleBox<Scalar>& box = {}) {
  const auto residual = setup.g_data - at_ck_fk.output();
  auto next = f_k + gamma * at_ck_fk.grad_f(residual);
  if (box.f_lower || box.f_upper) next = project_source(next, box);
  return next;
}

template <typename Scalar>
ScalarField<Scalar> landweber_step(const ScalarField<Scalar>& f_k, const ScalarField<Scalar>& c_k,
                                   const ProblemSetup<Scalar>& setup, Scalar gamma) {
  return landweber_step(ForwardState<Scalar>(setup, c_k, f_k), f_k, setup, gamma);
}

template <typename Scalar = double>
struct CgReport {
  int iterations = 0;
  Scalar relative_residual = 0;  ///< |H s - b|_W / |b|_W
};

/// Conjugate gradients for (J^* J + alpha W^{-1} B) s = J^* r in the
/// W-weighted inner product, where J = dA_f/dc at `lin`, B is the H1 Gram
/// matrix and W the mass weights. Returns s (zero if the right side is zero).
template <typename Scalar>
Vector<Scalar> solve_gauss_newton(const ForwardState<Scalar>& lin, const ScalarField<Scalar>& residual,
                                  Scalar alpha, Scalar tol, int maxit, CgReport<Scalar>* report = nullptr) {
  const auto& grid_ptr = residual.grid_ptr();
  const auto& w = grid_ptr->weights();
  const auto& gram = grid_ptr->h1_gram();
  auto dot = [&](const Vector<Scalar>& x, const Vector<Scalar>& y) {
    return (w.array() * x.array() * y.array()).sum();
  };
  auto hessian = [&](const Vector<Scalar>& s) -> Vector<Scalar> {
    const ScalarField<Scalar> sf(grid_ptr, s);
    Vector<Scalar> out = lin.grad_c(lin.apply_dc(sf)).values();
    out.array() += alpha * (gram * s).array() / w.array();
    return out;
  };

  const Vector<Scalar> b = lin.grad_c(residual).values();
  Vector<Scalar> s = Vector<Scalar>::Zero(b.size());
  const Scalar b_norm = std::sqrt(dot(b, b));
  CgReport<Scalar> rep;
  if (b_norm == 0) {
    if (report) *report = rep;
    return s;
  }
  Vector<Scalar> r = b;
  Vector<Scalar> p = r;
  Scalar rr = dot(r, r);
  for (int it = 1; it <= maxit; ++it) {
    const Vector<Scalar> hp = hessian(p);
    const Scalar php = dot(p, hp);
    if (!(php > 0)) throw SolverError("Gauss-Newton CG: non-positive curvature");
    const Scalar step = rr / php;
    s += step * p;
    r -= step * hp;
    const Scalar rr_next = dot(r, r);
    rep.iterations = it;
    rep.relative_residual = std::sqrt(rr_next) / b_norm;
    if (rep.relative_residual <= tol) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }
  if (report) *report = rep;
  return s;
}

template <typename Scalar = double>
struct TikhonovOutcome {
  ScalarField<Scalar> c_next;
  Scalar tikhonov_value;
  Scalar residual_unified;    ///< |F(c_next, f) - g|
  Scalar residual_landweber;  ///< |F(c_k, f) - g|
  Scalar alpha_used;
  int backtracks = 0;
  int cg_iterations = 0;
  bool stagnated = false;
  std::optional<ForwardState<Scalar>> state;  ///< forward state at (c_next, f)
};

/// One projected Gauss-Newton step on J_alpha(c) = |A_f(c) - g|^2 + alpha |c - c_k|_H1^2
/// linearized at c_k. `lin` is the forward state at (c_k, f). alpha is inflated by
/// the backtrack factor until the new residual does not exceed the residual at c_k;
/// if that never happens c_k is returned with the stagnation flag.
template <typename Scalar>
TikhonovOutcome<Scalar> tikhonov_step(const ForwardState<Scalar>& lin, const ScalarField<Scalar>& c_k,
                                      const ScalarField<Scalar>& f, const ProblemSetup<Scalar>& setup,
                                      Scalar alpha, const InversionConfig<Scalar>& config,
                                      const AdmissibleBox<Scalar>& box) {
  const auto residual = setup.g_data - lin.output();
  const Scalar res_lw = l2_norm(residual);
  Scalar a = alpha;
  int total_cg = 0;
  for (int attempt = 0; attempt <= config.max_backtracks; ++attempt) {
    CgReport<Scalar> rep;
    const Vector<Scalar> s =
        solve_gauss_newton(lin, residual, a, config.inner_cg_tol, config.inner_cg_maxit, &rep);
    total_cg += rep.iterations;
    const auto c_next = project_admissible(c_k.with_values(c_k.values() + s), box);
    ForwardState<Scalar> state(setup, c_next, f);
    const Scalar res_new = l2_norm(state.output() - setup.g_data);
    if (res_new <= res_lw) {
      const Scalar pen = h1_norm(c_next - c_k);
      return {c_next, res_new * res_new + a * pen * pen, res_new, res_lw, a, attempt, total_cg, false,
              std::move(state)};
    }
    a *= config.backtrack_factor;
  }
  return {c_k, res_lw * res_lw, res_lw, res_lw, a, config.max_backtracks, total_cg, true, std::nullopt};
}

template <typename Scalar>
TikhonovOutcome<Scalar> tikhonov_step(const ScalarField<Scalar>& c_k, const ScalarField<Scalar>& f_next,
                                      const ProblemSetup<Scalar>& setup, Scalar alpha,
                                      const InversionConfig<Scalar>& config = {},
                                      const AdmissibleBox<Scalar>& box = {}) {
  return tikhonov_step(ForwardState<Scalar>(setup, c_k, f_next), c_k, f_next, setup, alpha, config, box);
}

/// Coupled iteration: a Landweber step in f followed by an iterated-Tikhonov
/// step in c, stopped by the unified discrepancy rule on |F(c_k, f_k) - g|.
/// The unified residual of one cycle is the Landweber input of the next, so
/// each cycle evaluates it once.
template <typename Scalar>
InversionResult<Scalar> run_inversion(const ProblemSetup<Scalar>& setup, const InversionConfig<Scalar>& config,
                                      const ParamPair<Scalar>& init,
                                      const std::optional<std::type_identity_t<ParamPair<Scalar>>>& truth = std::nullopt) {
  setup.validate();
  config.validate(setup.delta);
  using Clock = std::chrono::steady_clock;
  const auto t0 = Clock::now();

  ScalarField<Scalar> c = init.c;
  ScalarField<Scalar> f = init.f;
  ForwardState<Scalar> state(setup, c, f);
  Scalar residual = l2_norm(state.output() - setup.g_data);

  InversionResult<Scalar> result{init, StopReason::k_max, 0, config.tau, setup.delta, residual,
                                 std::nullopt, std::nullopt, {}, {}};
  if (truth) {
    result.initial_f_error = l2_distance(f, truth->f);
    result.initial_c_error = l2_distance(c, truth->c);
  }
  if (unified_discrepancy(residual, config.tau, setup.delta)) {
    result.stop_reason = StopReason::discrepancy;
    return result;
  }

  std::vector<Scalar> history{residual};
  for (int k = 1; k <= config.k_max; ++k) {
    try {
      auto f_next = landweber_step(state, f, setup, config.gamma, init.box);
      ForwardState<Scalar> lin(setup, c, f_next);
      auto tk = tikhonov_step(lin, c, f_next, setup, config.alpha, config, init.box);

      IterationRecord<Scalar> rec;
      rec.k = k;
      rec.residual_unified = tk.residual_unified;
      rec.residual_landweber = tk.residual_landweber;
      rec.tikhonov_value = tk.tikhonov_value;
      rec.alpha_used = tk.alpha_used;
      rec.backtracks = tk.backtracks;
      rec.cg_iterations = tk.cg_iterations;
      rec.tikhonov_stagnated = tk.stagnated;
      if (truth) {
        rec.f_error = l2_distance(f_next, truth->f);
        rec.c_error = l2_distance(tk.c_next, truth->c);
      }
      rec.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();

      f = std::move(f_next);
      c = tk.c_next;
      state = tk.state ? std::move(*tk.state) : std::move(lin);
      residual = tk.residual_unified;
      result.records.push_back(rec);
      result.k_stop = k;
      result.final_pair = ParamPair<Scalar>(c, f, init.box);
    } catch (const std::exception& e) {
      result.stop_reason = StopReason::solver_failure;
      result.failure_message = e.what();
      return result;
    }

    if (unified_discrepancy(residual, config.tau, setup.delta)) {
      result.stop_reason = StopReason::discrepancy;
      return result;
    }
    history.push_back(residual);
    const int w = config.stagnation_window;
    if (static_cast<int>(history.size()) > w) {
      const Scalar before = history[history.size() - 1 - w];
      if (before - residual <= config.stagnation_tol * before) {
        result.stop_reason = StopReason::stagnation;
        return result;
      }
    }
  }
  result.stop_reason = StopReason::k_max;
  return result;
}

}  // namespace heatid
