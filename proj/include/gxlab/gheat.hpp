#pragma once

// Explicit monotone scheme for the G-heat equation  d_t u = G(D^2 u),
// u(0, x) = phi(x), giving u(t, x) = E^G[phi(x + B_t)].

#include <cmath>
#include <concepts>
#include <functional>
#include <span>
#include <vector>

#include "gxlab/gcore.hpp"
#include "gxlab/grid.hpp"
#include "gxlab/parallel.hpp"

namespace gxlab {

/// Default spatial resolution used by heat_grid.
inline constexpr int kDefaultHeatNx = 801;
/// Default domain half-width in units of sigma_max * sqrt(T).
inline constexpr double kTruncationSigmas = 8.0;

/// Grid covering +/- 8 sigma_max sqrt(T) around `center`.
inline Grid1D heat_grid(const UncertaintySet& gamma, double horizon, double center = 0.0,
                        int nx_target = kDefaultHeatNx, double cfl = kMaxCflSafety) {
  const double width = kTruncationSigmas * std::sqrt(gamma.sigma2_max() * std::max(horizon, 1e-12));
  return dyadic_grid(center, width, nx_target, horizon, gamma.sigma2_max(), cfl);
}

namespace detail {

inline void check_heat_inputs(const UncertaintySet& gamma, double horizon, const Grid1D& grid) {
  if (gamma.dim() != 1) throw DimensionMismatch("G-heat solver is one-dimensional");
  grid.validate();
  if (!(horizon >= 0.0)) throw InputError("horizon must be >= 0");
  if (std::fabs(grid.horizon() - horizon) > 1e-9 * std::max(1.0, horizon))
    throw InputError("grid covers t = " + std::to_string(grid.horizon()) + " but horizon is " +
                     std::to_string(horizon));
  if (grid.nt > 0) check_diffusion_cfl(grid, gamma.sigma2_max());
}

/// One explicit step: out[i] = u[i] + dt * G(D^2 u[i]).
inline void heat_step(const UncertaintySet& gamma, const Grid1D& grid, std::span<const double> u,
                      std::span<double> out) {
  const double inv_dx2 = 1.0 / (grid.dx() * grid.dx());
  for (int i = 0; i < grid.nx; ++i) out[i] = u[i] + grid.dt * g_value(gamma, stencil::second(u, i, inv_dx2));
}

template <class Phi>
std::vector<double> sample(const Grid1D& grid, Phi&& phi) {
  std::vector<double> u(static_cast<std::size_t>(grid.nx));
  for (int i = 0; i < grid.nx; ++i) u[i] = phi(grid.x(i));
  return u;
}

inline std::function<double(double)> as_function(const Expr& e) {
  return [e](double x) { return e.evaluate(expr::Bindings{}.set(expr::Var::x, x)); };
}

}  // namespace detail

/// Evolves sampled initial data to the final layer without storing history.
inline std::vector<double> evolve_gheat(const UncertaintySet& gamma, std::vector<double> u, double horizon,
                                        const Grid1D& grid) {
  detail::check_heat_inputs(gamma, horizon, grid);
  if (u.size() != static_cast<std::size_t>(grid.nx)) throw DimensionMismatch("initial data size != nx");
  require_finite(u, "G-heat initial data");
  std::vector<double> next(u.size());
  for (int k = 0; k < grid.nt; ++k) {
    detail::heat_step(gamma, grid, u, next);
    u.swap(next);
  }
  require_finite(u, "G-heat solution");
  return u;
}

/// Full space-time solution; layer k holds u(k dt, .), layer 0 is phi.
template <class Phi>
  requires std::invocable<Phi&, double>
SolutionField solve_gheat(const UncertaintySet& gamma, Phi&& phi, double horizon, const Grid1D& grid) {
  detail::check_heat_inputs(gamma, horizon, grid);
  std::vector<double> times(static_cast<std::size_t>(grid.nt) + 1);
  for (int k = 0; k <= grid.nt; ++k) times[k] = k * grid.dt;
  SolutionField field(grid, std::move(times));
  const auto init = detail::sample(grid, phi);
  std::copy(init.begin(), init.end(), field.layer(0).begin());
  require_finite(field.layer(0), "G-heat initial data");
  for (int k = 0; k < grid.nt; ++k) detail::heat_step(gamma, grid, field.layer(k), field.layer(k + 1));
  require_finite(field.layer(grid.nt), "G-heat solution");
  return field;
}

inline SolutionField solve_gheat(const UncertaintySet& gamma, const Expr& phi, double horizon, const Grid1D& grid) {
  return solve_gheat(gamma, detail::as_function(phi), horizon, grid);
}

/// E^G[phi(B_t)] = u(t, 0).
template <class Phi>
  requires std::invocable<Phi&, double>
double g_expect(const UncertaintySet& gamma, Phi&& phi, double horizon, const Grid1D& grid) {
  const auto u = evolve_gheat(gamma, detail::sample(grid, phi), horizon, grid);
  return SolutionField::interpolate_layer(grid, u, 0.0);
}

inline double g_expect(const UncertaintySet& gamma, const Expr& phi, double horizon, const Grid1D& grid) {
  return g_expect(gamma, detail::as_function(phi), horizon, grid);
}

/// Convenience overload on the default grid.
inline double g_expect(const UncertaintySet& gamma, const Expr& phi, double horizon) {
  return g_expect(gamma, phi, horizon, heat_grid(gamma, horizon));
}

// ---------------------------------------------------------------------------
// Two-layer cylinder payoffs phi(B_t1, B_t2)

struct CylinderResult {
  std::vector<double> x1;   ///< outer grid nodes
  std::vector<double> psi;  ///< psi(x1) = E^G[phi(x1, x1 + B_t2 - B_t1)]
  double value = 0.0;       ///< E^G[psi(B_t1)]
};

struct CylinderOptions {
  int outer_nx = 401;
  int inner_nx = 401;
  int threads = 0;
};

/// Conditional G-expectation of a cylinder payoff. The payoff expression
/// binds B_t1 to x and B_t2 to y. With a single time the payoff is phi(x).
inline CylinderResult conditional_cylinder(const UncertaintySet& gamma, const Expr& payoff,
                                           const std::vector<double>& times, const CylinderOptions& opt = {}) {
  if (times.empty()) throw InputError("cylinder: at least one time required");
  if (times.size() > 2) throw UnsupportedArity("cylinder payoffs support at most two times");
  if (!(times[0] >= 0.0)) throw InputError("cylinder: times must be >= 0");
  if (times.size() == 2 && !(times[0] < times[1])) throw InputError("cylinder: times must increase");

  const double t1 = times[0];
  const double t2 = times.size() == 2 ? times[1] : times[0];
  const double gap = t2 - t1;
  // Outer nodes must cover the spread of B_t2, not only B_t1.
  const double width = kTruncationSigmas * std::sqrt(gamma.sigma2_max() * std::max(t2, 1e-12));
  const Grid1D cover = dyadic_grid(0.0, width, opt.outer_nx, t1, gamma.sigma2_max());

  CylinderResult res;
  res.x1.resize(static_cast<std::size_t>(cover.nx));
  res.psi.resize(res.x1.size());
  for (int i = 0; i < cover.nx; ++i) res.x1[i] = cover.x(i);

  if (times.size() == 1) {
    for (int i = 0; i < cover.nx; ++i) res.psi[i] = payoff.evaluate(expr::Bindings{}.set(expr::Var::x, res.x1[i]));
  } else {
    const Grid1D inner = heat_grid(gamma, gap, 0.0, opt.inner_nx);
    parallel_for(res.x1.size(), resolve_threads(opt.threads), [&](std::size_t i) {
      const double x1 = res.x1[i];
      auto init = detail::sample(inner, [&](double w) {
        return payoff.evaluate(expr::Bindings{}.set(expr::Var::x, x1).set(expr::Var::y, x1 + w));
      });
      const auto u = evolve_gheat(gamma, std::move(init), gap, inner);
      res.psi[i] = SolutionField::interpolate_layer(inner, u, 0.0);
    });
  }

  const auto final_layer = evolve_gheat(gamma, res.psi, t1, cover);
  res.value = SolutionField::interpolate_layer(cover, final_layer, 0.0);
  return res;
}

}  // namespace gxlab
