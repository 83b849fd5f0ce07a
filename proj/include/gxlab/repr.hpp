#pragma once

// Small-horizon slope of the G-BSDE solution started from linear terminal
// data, and the closed-form generator combination it converges to.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "gxlab/gbsde.hpp"
#include "gxlab/gcore.hpp"
#include "gxlab/parallel.hpp"

namespace gxlab {

/// Geometric grid {0.2, 0.1, 0.05, 0.025, 0.0125}.
inline std::vector<double> default_eps_grid() { return {0.2, 0.1, 0.05, 0.025, 0.0125}; }

struct ReprPoint {
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double p = 1.0;
  /// Full p in R^n when the state is multi-dimensional; x binds to x_1.
  std::vector<double> p_vector;
};

struct ReprCase {
  std::string id;
  ForwardSpec forward;
  GeneratorSpec generator = GeneratorSpec::scalar(Expr::constant(0.0), Expr::constant(0.0));
  UncertaintySet gamma = UncertaintySet::interval(1.0, 1.0);
  ReprPoint point;
  double horizon = 1.0;  ///< T; every eps must fit in [t, T]
  std::vector<double> eps_grid = default_eps_grid();

  void validate() const {
    if (eps_grid.size() < 4) throw InputError("repr case '" + id + "': eps grid needs at least 4 points");
    for (std::size_t i = 0; i < eps_grid.size(); ++i) {
      if (!(eps_grid[i] > 0.0)) throw InputError("repr case '" + id + "': eps must be > 0");
      if (i > 0 && !(eps_grid[i] < eps_grid[i - 1]))
        throw InputError("repr case '" + id + "': eps grid must be strictly decreasing");
    }
    if (eps_grid.front() > horizon - point.t + 1e-12)
      throw InputError("repr case '" + id + "': largest eps exceeds T - t");
    if (forward.d() != gamma.dim() || generator.dim() != gamma.dim())
      throw DimensionMismatch("repr case '" + id + "': dimensions differ");
  }

  std::vector<double> p_components() const {
    if (forward.n() == 1) return {point.p};
    if (static_cast<int>(point.p_vector.size()) != forward.n())
      throw DimensionMismatch("repr case '" + id + "': p must have n components");
    return point.p_vector;
  }
};

/// f(t, y, sigma^T p) + <p, b> + 2G(g(t, y, sigma^T p) + <p, h>), evaluated
/// at the case's point.
inline double rhs_formula(const ReprCase& c) {
  const int n = c.forward.n();
  const int d = c.forward.d();
  const auto p = c.p_components();
  const auto at_x = expr::Bindings::txyz(c.point.t, c.point.x, 0.0, 0.0);

  std::vector<double> z(static_cast<std::size_t>(d), 0.0);
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < n; ++k) z[j] += c.forward.sigma(k, j).evaluate(at_x) * p[k];

  double drift = 0.0;
  for (int k = 0; k < n; ++k) drift += p[k] * c.forward.b(k).evaluate(at_x);

  const auto gen_at = expr::Bindings::txyz(c.point.t, 0.0, c.point.y, z[0]);
  Matrix arg(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double ph = 0.0;
      for (int k = 0; k < n; ++k) ph += p[k] * c.forward.h(i, j, k).evaluate(at_x);
      arg(i, j) = arg(j, i) = c.generator.g(i, j).evaluate(gen_at) + ph;
    }
  }
  return c.generator.f.evaluate(gen_at) + drift + two_g(c.gamma, arg);
}

struct SlopeEstimate {
  std::string case_id;
  std::vector<double> eps;
  std::vector<double> d_eps;
  double fitted_limit = 0.0;
  double c_half = 0.0;
  double c_one = 0.0;
  double fit_residual = 0.0;  ///< RMS residual of the least-squares fit
  double rhs = 0.0;
  double abs_err = 0.0;
};

struct SlopeOptions {
  /// Nodes across +/- 8 sigma sqrt(eps); 385 gives dx ~ sigma sqrt(eps) / 24.
  int nx_per_eps = 385;
  double cfl = kMaxCflSafety;
  int threads = 0;
  /// Condition-number ceiling for the {1, sqrt eps, eps} design matrix.
  double max_condition = 1e8;
};

/// Least-squares fit of D(eps) = D0 + c_half sqrt(eps) + c_one eps.
inline void fit_slope(SlopeEstimate& est, double max_condition = 1e8) {
  const auto m = static_cast<Eigen::Index>(est.eps.size());
  if (m < 4) throw FitIllConditioned("slope fit needs at least 4 eps values, got " + std::to_string(m));
  Eigen::MatrixXd a(m, 3);
  Eigen::VectorXd rhs(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = std::sqrt(est.eps[i]);
    a(i, 2) = est.eps[i];
    rhs(i) = est.d_eps[i];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition))
    throw FitIllConditioned("eps grid too clustered: condition number " + std::to_string(cond));
  const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(rhs);
  est.fitted_limit = coef(0);
  est.c_half = coef(1);
  est.c_one = coef(2);
  est.fit_residual = std::sqrt((a * coef - rhs).squaredNorm() / static_cast<double>(m));
  if (!std::isfinite(est.fitted_limit)) throw FitIllConditioned("non-finite fitted limit");
}

/// Problem on [t, t + eps] with terminal y + p (x' - x).
inline GBsdeProblem slope_problem(const ReprCase& c, double eps) {
  GBsdeProblem p;
  p.forward = c.forward;
  p.generator = c.generator;
  p.gamma = c.gamma;
  p.horizon = eps;
  p.start_time = c.point.t;
  p.terminal = Expr::constant(c.point.y) +
               Expr::constant(c.point.p) * (Expr::variable(expr::Var::x) - Expr::constant(c.point.x));
  return p;
}

/// D(eps) = (Y_t^eps - y) / eps for each eps, then the {1, sqrt eps, eps} fit.
inline SlopeEstimate slope_estimate(const ReprCase& c, const SlopeOptions& opt = {}) {
  c.validate();
  if (c.forward.n() != 1) throw UnsupportedArity("slope estimation requires n = 1");
  SlopeEstimate est;
  est.case_id = c.id;
  est.eps = c.eps_grid;
  est.d_eps.assign(c.eps_grid.size(), 0.0);
  est.rhs = rhs_formula(c);

  const GBsdeProblem probe = slope_problem(c, c.eps_grid.front());
  const auto lip = generator_lipschitz(probe);
  GBsdeOptions gopt;
  gopt.cfl = opt.cfl;
  gopt.threads = 1;
  gopt.store_z = false;

  parallel_for(c.eps_grid.size(), resolve_threads(opt.threads), [&](std::size_t i) {
    const double eps = c.eps_grid[i];
    const GBsdeProblem p = slope_problem(c, eps);
    const Grid1D grid = gbsde_grid(p, c.point.x, opt.nx_per_eps, opt.cfl, &lip);
    const auto sol = solve_gbsde(p, c.point.x, grid, gopt);
    est.d_eps[i] = (sol.y0 - c.point.y) / eps;
  });

  fit_slope(est, opt.max_condition);
  est.abs_err = std::fabs(est.fitted_limit - est.rhs);
  return est;
}

struct ConvergenceReport {
  bool exact = false;            ///< residuals vanish to rounding
  double exponent = 0.0;         ///< empirical order q in D(eps) - D0 ~ eps^q
  double constant = 0.0;         ///< max |D(eps) - D0| / sqrt(eps)
  double max_residual = 0.0;     ///< max |D(eps) - D0|
  bool rate_consistent = false;  ///< exact, or exponent within [0.4, 1.1]

  std::string exponent_label() const {
    if (exact) return "exact";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", exponent);
    return buf;
  }
};

inline constexpr double kExactResidual = 1e-9;
inline constexpr double kMinDecayExponent = 0.4;
inline constexpr double kMaxDecayExponent = 1.1;

/// Empirical decay of D(eps) towards its limit. The order comes from a
/// log-log fit of consecutive differences |D(eps_i) - D(eps_{i+1})|, which
/// scale like eps_i^q on a geometric grid and, unlike |D - D0|, do not
/// inherit the bias of the extrapolated D0. The constant is reported
/// against the sqrt(eps) rate that the small-time bounds guarantee.
inline ConvergenceReport convergence_diagnostics(const SlopeEstimate& est) {
  ConvergenceReport r;
  const double scale = std::max(1.0, std::fabs(est.fitted_limit));
  for (std::size_t i = 0; i < est.eps.size(); ++i) {
    const double res = std::fabs(est.d_eps[i] - est.fitted_limit);
    r.max_residual = std::max(r.max_residual, res);
    r.constant = std::max(r.constant, res / std::sqrt(est.eps[i]));
  }
  std::vector<double> lx, ly;
  double max_step = 0.0;
  for (std::size_t i = 0; i + 1 < est.eps.size(); ++i) {
    const double step = std::fabs(est.d_eps[i] - est.d_eps[i + 1]);
    max_step = std::max(max_step, step);
    if (step > 0.0) {
      lx.push_back(std::log(est.eps[i]));
      ly.push_back(std::log(step));
    }
  }
  if ((r.max_residual <= kExactResidual * scale && max_step <= kExactResidual * scale) || lx.size() < 2) {
    r.exact = true;
    r.rate_consistent = true;
    return r;
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
  }
  r.exponent = sxy / sxx;
  r.rate_consistent = r.exponent >= kMinDecayExponent && r.exponent <= kMaxDecayExponent;
  return r;
}

}  // namespace gxlab
