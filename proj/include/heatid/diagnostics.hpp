#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "heatid/operators.hpp"

namespace heatid {

/// Least-squares slope of log(error) against log(size).
template <typename Scalar>
Scalar observed_order(const std::vector<Scalar>& sizes, const std::vector<Scalar>& errors) {
  if (sizes.size() != errors.size() || sizes.size() < 2) throw ValidationError("observed_order: need >= 2 pairs");
  const auto n = static_cast<Scalar>(sizes.size());
  Scalar sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const Scalar x = std::log(sizes[i]), y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// L2 error of u(T) against exp(-(a pi^2 + c) T) sin(pi x) on (0,1) for
/// constant a, c and f = 0.
template <typename Scalar>
Scalar eigenmode_error(int nodes, int steps, Scalar final_time, Scalar a, Scalar c) {
  const auto grid = build_grid<Scalar>(1, {Scalar(1)}, {nodes}, final_time, steps);
  const Scalar pi = std::numbers::pi_v<Scalar>;
  const auto phi = ScalarField<Scalar>::sample(grid, [&](Scalar x, Scalar) { return std::sin(pi * x); })
                       .with_zero_boundary();
  const Coefficients<Scalar> k{ScalarField<Scalar>::constant(grid, a), ScalarField<Scalar>::constant(grid, c),
                               ScalarField<Scalar>::zeros(grid), phi};
  const Scalar decay = std::exp(-(a * pi * pi + c) * final_time);
  return l2_norm(solve_forward_final(k) - decay * phi);
}

template <typename Scalar = double>
struct AdjointMismatch {
  Scalar worst_f = 0;  ///< max |<F'h, r> - <h, G_f>| / (|h| |r|)
  Scalar worst_c = 0;  ///< same for the reaction derivative
  int trials = 0;
};

/// Inner-product test of both adjoints at p on random directions.
template <typename Scalar>
AdjointMismatch<Scalar> adjoint_mismatch(const ParamPair<Scalar>& p, const ProblemSetup<Scalar>& setup,
                                         int trials, std::uint64_t seed) {
  const ForwardState<Scalar> st(setup, p.c, p.f);
  AdjointMismatch<Scalar> out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t s = seed + 3 * static_cast<std::uint64_t>(t);
    const auto h = random_direction(setup.grid, s);
    const auto kappa = random_direction(setup.grid, s + 1);
    const auto r = random_direction(setup.grid, s + 2);
    const Scalar scale_f = l2_norm(h) * l2_norm(r);
    const Scalar scale_c = l2_norm(kappa) * l2_norm(r);
    out.worst_f = std::max(out.worst_f,
                           std::abs(l2_inner(st.apply_df(h), r) - l2_inner(h, st.grad_f(r))) / scale_f);
    out.worst_c = std::max(out.worst_c,
                           std::abs(l2_inner(st.apply_dc(kappa), r) - l2_inner(kappa, st.grad_c(r))) / scale_c);
  }
  return out;
}

template <typename Scalar = double>
struct GradientCheck {
  Scalar relative_error_f = 0;
  Scalar relative_error_c = 0;
};

/// Directional derivatives of J(c, f) = |F(c, f) - g|^2 / 2 from the adjoint
/// gradients against central differences with step eps along random directions.
template <typename Scalar>
GradientCheck<Scalar> gradient_check(const ParamPair<Scalar>& p, const ProblemSetup<Scalar>& setup, Scalar eps,
                                     std::uint64_t seed) {
  auto misfit = [&](const ScalarField<Scalar>& c, const ScalarField<Scalar>& f) {
    const Scalar r = l2_distance(apply_Af(c, f, setup), setup.g_data);
    return r * r / 2;
  };
  const ForwardState<Scalar> st(setup, p.c, p.f);
  const auto residual = st.output() - setup.g_data;
  const auto h = random_direction(setup.grid, seed);
  const auto kappa = random_direction(setup.grid, seed + 1);

  const Scalar fd_f = (misfit(p.c, p.f + eps * h) - misfit(p.c, p.f - eps * h)) / (2 * eps);
  const Scalar ad_f = l2_inner(st.grad_f(residual), h);
  const Scalar fd_c = (misfit(p.c + eps * kappa, p.f) - misfit(p.c - eps * kappa, p.f)) / (2 * eps);
  const Scalar ad_c = l2_inner(st.grad_c(residual), kappa);
  return {std::abs(fd_f - ad_f) / std::abs(ad_f), std::abs(fd_c - ad_c) / std::abs(ad_c)};
}

template <typename Scalar = double>
struct LinearityCheck {
  Scalar relative_error_f = 0;  ///< |w(s h1 + t h2) - s w(h1) - t w(h2)| / (|s w(h1)| + |t w(h2)|)
  Scalar relative_error_c = 0;
};

/// Superposition test of both sensitivity maps at p.
template <typename Scalar>
LinearityCheck<Scalar> sensitivity_linearity(const ParamPair<Scalar>& p, const ProblemSetup<Scalar>& setup,
                                             std::uint64_t seed) {
  const ForwardState<Scalar> st(setup, p.c, p.f);
  const auto d1 = random_direction(setup.grid, seed);
  const auto d2 = random_direction(setup.grid, seed + 1);
  const Scalar s = Scalar(0.7), t = Scalar(-1.3);
  auto rel = [&](auto&& map) {
    const auto w1 = map(d1), w2 = map(d2);
    return l2_norm(map(s * d1 + t * d2) - s * w1 - t * w2) / (l2_norm(s * w1) + l2_norm(t * w2));
  };
  return {rel([&](const ScalarField<Scalar>& h) { return st.apply_df(h); }),
          rel([&](const ScalarField<Scalar>& k) { return st.apply_dc(k); })};
}

}  // namespace heatid
