#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "gxlab/errors.hpp"

namespace gxlab {

/// Largest CFL safety factor accepted by the explicit schemes.
inline constexpr double kMaxCflSafety = 0.5;

/// Uniform space-time grid. Node i sits at x_min + i * dx; boundary nodes
/// use a linear closure (zero second difference, one-sided first difference).
struct Grid1D {
  double x_min = -1.0;
  double x_max = 1.0;
  int nx = 16;
  double dt = 0.0;
  int nt = 0;

  double dx() const noexcept { return (x_max - x_min) / (nx - 1); }
  double x(int i) const noexcept { return x_min + i * dx(); }
  double horizon() const noexcept { return dt * nt; }

  void validate() const {
    if (!(x_min < x_max)) throw InputError("grid: x_min must be < x_max");
    if (nx < 16) throw InputError("grid: nx must be >= 16");
    if (nt < 0 || !(dt >= 0.0)) throw InputError("grid: dt and nt must be non-negative");
    if (nt > 0 && !(dt > 0.0)) throw InputError("grid: dt must be > 0");
  }

  /// Index of the node at or to the left of x, clamped so that i + 1 is valid.
  int cell_of(double xv) const noexcept {
    const double s = (xv - x_min) / dx();
    return std::clamp(static_cast<int>(std::floor(s)), 0, nx - 2);
  }
};

/// Throws CflViolation unless dt <= safety * dx^2 / diffusivity.
inline void check_diffusion_cfl(const Grid1D& grid, double diffusivity, double safety = kMaxCflSafety) {
  if (safety > kMaxCflSafety) throw InputError("CFL safety factor must be <= 0.5");
  const double limit = safety * grid.dx() * grid.dx() / diffusivity;
  if (grid.dt > limit * (1.0 + 1e-12))
    throw CflViolation("dt = " + std::to_string(grid.dt) + " exceeds " + std::to_string(limit) +
                       " (dx = " + std::to_string(grid.dx()) + ", diffusivity = " + std::to_string(diffusivity) + ")");
}

/// Grid centred on `center` spanning at least +/- half_width, with dx the
/// largest power of two not exceeding 2 * half_width / (nx_target - 1).
/// Dyadic spacing keeps node coordinates exact, so linear data have an
/// exactly vanishing second difference.
inline Grid1D dyadic_grid(double center, double half_width, int nx_target, double horizon, double diffusivity,
                          double cfl = kMaxCflSafety) {
  if (!(half_width > 0.0) || nx_target < 16) throw InputError("dyadic_grid: bad extent or resolution");
  if (!(horizon >= 0.0)) throw InputError("dyadic_grid: horizon must be >= 0");
  const double raw = 2.0 * half_width / (nx_target - 1);
  const double dx = std::exp2(std::floor(std::log2(raw)));
  const int k = static_cast<int>(std::ceil(half_width / dx - 1e-9));
  Grid1D g;
  g.nx = 2 * k + 1;
  g.x_min = center - k * dx;
  g.x_max = center + k * dx;
  if (horizon > 0.0) {
    const double dt_max = cfl * dx * dx / diffusivity;
    g.nt = std::max(1, static_cast<int>(std::ceil(horizon / dt_max - 1e-9)));
    g.dt = horizon / g.nt;
  }
  return g;
}

/// Values u(t_k, x_i) on a Grid1D, one row per time layer.
struct SolutionField {
  Grid1D grid;
  std::vector<double> times;
  std::vector<double> values;

  SolutionField() = default;
  SolutionField(const Grid1D& g, std::vector<double> t)
      : grid(g), times(std::move(t)), values(times.size() * static_cast<std::size_t>(g.nx)) {}

  int layers() const noexcept { return static_cast<int>(times.size()); }
  std::span<double> layer(int k) {
    return {values.data() + static_cast<std::size_t>(k) * grid.nx, static_cast<std::size_t>(grid.nx)};
  }
  std::span<const double> layer(int k) const {
    return {values.data() + static_cast<std::size_t>(k) * grid.nx, static_cast<std::size_t>(grid.nx)};
  }
  double at(int k, int i) const { return values[static_cast<std::size_t>(k) * grid.nx + i]; }

  /// Linear interpolation within layer k.
  double interpolate(int k, double xv) const { return interpolate_layer(grid, layer(k), xv); }

  static double interpolate_layer(const Grid1D& g, std::span<const double> u, double xv) {
    if (xv < g.x_min - 1e-12 || xv > g.x_max + 1e-12)
      throw InputError("interpolation point " + std::to_string(xv) + " outside grid");
    const int i = g.cell_of(xv);
    const double w = (xv - g.x(i)) / g.dx();
    if (w == 0.0) return u[i];
    return (1.0 - w) * u[i] + w * u[i + 1];
  }
};

namespace stencil {

/// Second difference (u[i+1] - 2u[i] + u[i-1]) / dx^2; zero at boundary nodes.
inline double second(std::span<const double> u, int i, double inv_dx2) noexcept {
  const int n = static_cast<int>(u.size());
  if (i == 0 || i == n - 1) return 0.0;
  return (u[i + 1] - 2.0 * u[i] + u[i - 1]) * inv_dx2;
}

/// Centred first difference; one-sided at boundary nodes.
inline double first(std::span<const double> u, int i, double inv_dx) noexcept {
  const int n = static_cast<int>(u.size());
  if (i == 0) return (u[1] - u[0]) * inv_dx;
  if (i == n - 1) return (u[n - 1] - u[n - 2]) * inv_dx;
  return (u[i + 1] - u[i - 1]) * (0.5 * inv_dx);
}

}  // namespace stencil

inline void require_finite(std::span<const double> u, const char* where) {
  for (std::size_t i = 0; i < u.size(); ++i)
    if (!std::isfinite(u[i])) throw NonFiniteValue(std::string(where) + " at node " + std::to_string(i));
}

}  // namespace gxlab
