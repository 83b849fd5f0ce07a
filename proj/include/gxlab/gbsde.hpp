#pragma once

// Markovian G-BSDE solver. With X driven by
//   dX = b(X) dt + h(X) d<B> + sigma(X) dB,   Y_T = phi(X_T),
// Y_t = u(t, X_t) where u solves backward in time
//   -d_t u = b Du + f(t, u, sigma Du) + 2G(h Du + 1/2 sigma^2 D^2 u + g(t, u, sigma Du)).
// K is recovered afterwards as the predictable residual along a chosen
// volatility scenario.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "gxlab/gcore.hpp"
#include "gxlab/gheat.hpp"
#include "gxlab/grid.hpp"
#include "gxlab/lattice.hpp"
#include "gxlab/parallel.hpp"

namespace gxlab {

/// A volatility path for K extraction: either the pointwise maximiser of
/// the G-term, or a piecewise-constant function of time.
struct VolScenario {
  enum class Kind { worst_case, piecewise };

  std::string id;
  Kind kind = Kind::worst_case;
  std::vector<double> breakpoints;  ///< interior switch times, increasing
  std::vector<double> values;       ///< breakpoints.size() + 1 variances

  static VolScenario worst_case(std::string id = "worst_case") { return {std::move(id), Kind::worst_case, {}, {}}; }
  static VolScenario constant(std::string id, double v) { return {std::move(id), Kind::piecewise, {}, {v}}; }
  static VolScenario piecewise(std::string id, std::vector<double> breakpoints, std::vector<double> values) {
    return {std::move(id), Kind::piecewise, std::move(breakpoints), std::move(values)};
  }

  double at(double t) const {
    std::size_t j = 0;
    while (j < breakpoints.size() && t >= breakpoints[j]) ++j;
    return values[j];
  }
};

/// Expected K (and expected <B>) along one scenario, one entry per time layer.
struct KPath {
  std::string scenario_id;
  std::vector<double> times;
  std::vector<double> k;
  std::vector<double> qv;
};

struct GeneratorLipschitz {
  double f = 0.0;
  double g = 0.0;
};

struct GBsdeOptions {
  double cfl = kMaxCflSafety;
  int lipschitz_samples = 2000;
  std::uint64_t seed = 0;
  std::vector<VolScenario> scenarios;
  int threads = 0;
  bool store_z = true;
};

/// Default spatial resolution of gbsde_grid; coarser than the heat default
/// because the solver keeps every time layer.
inline constexpr int kDefaultBsdeNx = 401;

struct GBsdeSolution {
  SolutionField field;  ///< u(t_k, x_i); layer 0 is the start time
  SolutionField z_field;
  double y0 = 0.0;
  double x0 = 0.0;
  GeneratorLipschitz lipschitz;
  std::vector<VolScenario> scenarios;
  std::vector<KPath> k_paths;
};

namespace detail {

inline void require_scalar_problem(const GBsdeProblem& p) {
  p.validate();
  if (p.forward.n() != 1 || p.forward.d() != 1 || p.gamma.dim() != 1)
    throw UnsupportedArity("G-BSDE solver supports n = d = 1 only");
}

/// Range of variances that the scalar uncertainty set can realise.
inline std::pair<double, double> variance_range(const UncertaintySet& gamma) {
  if (gamma.kind() == UncertaintySet::Kind::interval) return {gamma.sigma2_min(), gamma.sigma2_max()};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& m : gamma.matrices()) {
    lo = std::min(lo, m(0, 0));
    hi = std::max(hi, m(0, 0));
  }
  return {lo, hi};
}

/// b, h, sigma and sigma^2 sampled on the grid nodes at time t.
struct NodeCoefficients {
  std::vector<double> b, h, sigma, s2;
  double b_max = 0.0, h_max = 0.0, s2_max = 0.0;

  void fill(const ForwardSpec& fw, const Grid1D& grid, double t) {
    const auto n = static_cast<std::size_t>(grid.nx);
    b.resize(n);
    h.resize(n);
    sigma.resize(n);
    s2.resize(n);
    b_max = h_max = s2_max = 0.0;
    for (int i = 0; i < grid.nx; ++i) {
      const auto at = expr::Bindings::txyz(t, grid.x(i), 0.0, 0.0);
      b[i] = fw.b(0).evaluate(at);
      h[i] = fw.h(0, 0, 0).evaluate(at);
      sigma[i] = fw.sigma(0, 0).evaluate(at);
      s2[i] = sigma[i] * sigma[i];
      b_max = std::max(b_max, std::fabs(b[i]));
      h_max = std::max(h_max, std::fabs(h[i]));
      s2_max = std::max(s2_max, s2[i]);
    }
  }
};

inline bool forward_time_dependent(const ForwardSpec& fw) {
  for (const auto& e : fw.all())
    if (e.depends_on(expr::Var::t)) return true;
  return false;
}

/// Evaluates a generator component, skipping the tree walk for constants.
class GeneratorTerm {
 public:
  explicit GeneratorTerm(const Expr& e) : e_(e), constant_(e.is_constant()), value_(constant_ ? e.evaluate({}) : 0.0) {}
  double operator()(double t, double y, double z) const {
    return constant_ ? value_ : e_.evaluate(expr::Bindings::txyz(t, 0.0, y, z));
  }
  bool is_zero() const noexcept { return constant_ && value_ == 0.0; }

 private:
  Expr e_;
  bool constant_;
  double value_;
};

}  // namespace detail

/// Lipschitz constants of f and g in (y, z) used by the CFL condition and
/// the blow-up guard; a declared constant overrides sampling.
inline GeneratorLipschitz generator_lipschitz(const GBsdeProblem& p, int samples = 2000, std::uint64_t seed = 0) {
  if (p.generator.lipschitz) return {p.generator.lipschitz->bound(), p.generator.lipschitz->bound()};
  expr::Box box;
  box.set(expr::Var::t, p.start_time, p.start_time + p.horizon).set(expr::Var::y, -10, 10).set(expr::Var::z, -10, 10);
  const auto vars = static_cast<std::uint8_t>(expr::var_bit(expr::Var::y) | expr::var_bit(expr::Var::z));
  const expr::LipschitzOptions opt{samples, seed, 1e6, 1.1};
  auto one = [&](const Expr& e) { return e.is_constant() ? 0.0 : expr::estimate_lipschitz(e, vars, box, opt).bound(); };
  return {one(p.generator.f), one(p.generator.g(0, 0))};
}

/// Throws CflViolation unless both the diffusion and the zeroth-order
/// conditions hold.
inline void check_gbsde_cfl(const UncertaintySet& gamma, const Grid1D& grid, const detail::NodeCoefficients& c,
                            const GeneratorLipschitz& lip, double safety = kMaxCflSafety) {
  if (grid.nt == 0) return;
  check_diffusion_cfl(grid, gamma.sigma2_max() * std::max(c.s2_max, 1e-300), safety);
  const double rate = lip.f + 2.0 * gamma.sigma2_max() * lip.g + c.b_max;
  if (grid.dt * rate > safety * (1.0 + 1e-12))
    throw CflViolation("dt * (L_f + 2 sigma2_max L_g + |b|) = " + std::to_string(grid.dt * rate) + " exceeds " +
                       std::to_string(safety));
}

/// Bound on how fast information travels in x: forward drift plus the
/// transport induced by the z-dependence of the generator.
inline double propagation_speed(const UncertaintySet& gamma, double b_max, double h_max, double s2_max,
                                const GeneratorLipschitz& lip) {
  const double s2g = gamma.sigma2_max();
  return b_max + s2g * h_max + std::sqrt(s2_max) * (lip.f + 2.0 * s2g * lip.g);
}

namespace detail {

struct ForwardBounds {
  double b = 0.0, h = 0.0, s2 = 0.0;
};

inline ForwardBounds forward_bounds(const GBsdeProblem& p, const Grid1D& grid) {
  ForwardBounds fb;
  NodeCoefficients c;
  const double t_end = p.start_time + p.horizon;
  for (double t : {p.start_time, 0.5 * (p.start_time + t_end), t_end}) {
    c.fill(p.forward, grid, t);
    fb.b = std::max(fb.b, c.b_max);
    fb.h = std::max(fb.h, c.h_max);
    fb.s2 = std::max(fb.s2, c.s2_max);
  }
  return fb;
}

}  // namespace detail

/// Dyadic grid centred on x0 wide enough for diffusion and transport over
/// the horizon, refined in time until both CFL conditions hold.
inline Grid1D gbsde_grid(const GBsdeProblem& p, double x0, int nx_target = kDefaultBsdeNx, double cfl = kMaxCflSafety,
                         const GeneratorLipschitz* lip_in = nullptr) {
  detail::require_scalar_problem(p);
  const double s2g = p.gamma.sigma2_max();
  const GeneratorLipschitz lip = lip_in ? *lip_in : generator_lipschitz(p);
  double width = kTruncationSigmas * std::sqrt(s2g * p.horizon);
  detail::ForwardBounds fb;
  for (int pass = 0; pass < 3; ++pass) {
    Grid1D probe;
    probe.x_min = x0 - width;
    probe.x_max = x0 + width;
    probe.nx = 257;
    fb = detail::forward_bounds(p, probe);
    width = kTruncationSigmas * std::sqrt(s2g * std::max(fb.s2, 1e-12) * p.horizon) +
            p.horizon * propagation_speed(p.gamma, fb.b, fb.h, fb.s2, lip);
  }
  Grid1D g = dyadic_grid(x0, width, nx_target, p.horizon, s2g * std::max(fb.s2, 1e-12), cfl);
  // Re-check on the final nodes and refine in time if needed.
  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto on_grid = detail::forward_bounds(p, g);
    const double dt_diff = on_grid.s2 > 0.0 ? cfl * g.dx() * g.dx() / (s2g * on_grid.s2) : p.horizon;
    const double rate = lip.f + 2.0 * s2g * lip.g + on_grid.b;
    const double dt_rate = rate > 0.0 ? cfl / rate : p.horizon;
    const double dt_max = std::min(dt_diff, dt_rate);
    const int nt = std::max(1, static_cast<int>(std::ceil(p.horizon / dt_max - 1e-9)));
    if (nt <= g.nt) break;
    g.nt = nt;
    g.dt = p.horizon / nt;
  }
  return g;
}

/// Predictable K residual along one scenario, propagating the law of X
/// forward from x0 on the grid.
inline KPath extract_k(const GBsdeProblem& problem, const GBsdeSolution& sol, const VolScenario& scenario);

/// Backward sweep of the monotone scheme from the terminal layer.
inline GBsdeSolution solve_gbsde(const GBsdeProblem& problem, double x0, const Grid1D& grid,
                                 const GBsdeOptions& opt = {}) {
  detail::require_scalar_problem(problem);
  grid.validate();
  if (std::fabs(grid.horizon() - problem.horizon) > 1e-9 * std::max(1.0, problem.horizon))
    throw InputError("grid covers " + std::to_string(grid.horizon()) + " but horizon is " +
                     std::to_string(problem.horizon));
  if (x0 < grid.x_min || x0 > grid.x_max) throw InputError("x0 outside the grid");

  const UncertaintySet& gamma = problem.gamma;
  const bool time_dep = detail::forward_time_dependent(problem.forward);
  const double t0 = problem.start_time;

  GBsdeSolution sol;
  sol.x0 = x0;
  sol.lipschitz = generator_lipschitz(problem, opt.lipschitz_samples, opt.seed);

  detail::NodeCoefficients c;
  for (double t : {t0, t0 + problem.horizon}) {
    c.fill(problem.forward, grid, t);
    check_gbsde_cfl(gamma, grid, c, sol.lipschitz, opt.cfl);
  }

  std::vector<double> times(static_cast<std::size_t>(grid.nt) + 1);
  for (int k = 0; k <= grid.nt; ++k) times[k] = t0 + k * grid.dt;
  sol.field = SolutionField(grid, times);
  if (opt.store_z) sol.z_field = SolutionField(grid, times);

  const double t_end = times.back();
  {
    auto last = sol.field.layer(grid.nt);
    for (int i = 0; i < grid.nx; ++i)
      last[i] = problem.terminal.evaluate(expr::Bindings{}.set(expr::Var::t, t_end).set(expr::Var::x, grid.x(i)));
    require_finite(last, "terminal payoff");
  }

  const detail::GeneratorTerm f(problem.generator.f);
  const detail::GeneratorTerm g(problem.generator.g(0, 0));
  const double inv_dx = 1.0 / grid.dx();
  const double inv_dx2 = inv_dx * inv_dx;
  const double s2g = gamma.sigma2_max();
  const GeneratorLipschitz lip = sol.lipschitz;
  const int workers = resolve_threads(opt.threads);
  c.fill(problem.forward, grid, t_end);

  auto z_layer = [&](int k) {
    if (!opt.store_z) return;
    auto u = sol.field.layer(k);
    auto z = sol.z_field.layer(k);
    for (int i = 0; i < grid.nx; ++i) z[i] = c.sigma[i] * stencil::first(u, i, inv_dx);
  };
  z_layer(grid.nt);

  for (int k = grid.nt - 1; k >= 0; --k) {
    const double t = times[k + 1];
    if (time_dep) c.fill(problem.forward, grid, t);
    std::span<const double> u = sol.field.layer(k + 1);
    std::span<double> out = sol.field.layer(k);
    const double f0 = std::fabs(f(t, 0.0, 0.0));
    const double g0 = std::fabs(g(t, 0.0, 0.0));

    auto node = [&](int i) {
      const double du = stencil::first(u, i, inv_dx);
      const double d2u = stencil::second(u, i, inv_dx2);
      const double y = u[i];
      const double z = c.sigma[i] * du;
      const double fv = f(t, y, z);
      const double inner = c.h[i] * du + 0.5 * c.s2[i] * d2u + g(t, y, z);
      const double change = grid.dt * (c.b[i] * du + fv + two_g(gamma, inner));
      out[i] = y + change;
      // |f(y,z)| <= |f(0,0)| + L (|y| + |z|), likewise for g; twice that is the guard.
      const double yz = std::fabs(y) + std::fabs(z);
      const double bound = std::fabs(c.b[i] * du) + f0 + lip.f * yz +
                           s2g * (std::fabs(c.h[i] * du) + 0.5 * c.s2[i] * std::fabs(d2u) + g0 + lip.g * yz);
      if (std::fabs(change) > 2.0 * grid.dt * bound + 1e-12 * (1.0 + std::fabs(y)))
        throw LipschitzBlowup("layer change " + std::to_string(std::fabs(change)) + " at t = " + std::to_string(t) +
                              ", x = " + std::to_string(grid.x(i)) + " exceeds the Lipschitz bound " +
                              std::to_string(2.0 * grid.dt * bound));
    };

    if (workers > 1 && grid.nx >= 4096) {
      const int chunk = (grid.nx + workers - 1) / workers;
      parallel_for(static_cast<std::size_t>(workers), workers, [&](std::size_t w) {
        const int lo = static_cast<int>(w) * chunk;
        const int hi = std::min(grid.nx, lo + chunk);
        for (int i = lo; i < hi; ++i) node(i);
      });
    } else {
      for (int i = 0; i < grid.nx; ++i) node(i);
    }
    require_finite(out, "G-BSDE layer");
    if (time_dep) c.fill(problem.forward, grid, times[k]);
    z_layer(k);
  }

  sol.y0 = sol.field.interpolate(0, x0);
  sol.scenarios = opt.scenarios;
  for (const auto& s : opt.scenarios) sol.k_paths.push_back(extract_k(problem, sol, s));
  return sol;
}

/// Convenience: default grid around x0.
inline GBsdeSolution solve_gbsde(const GBsdeProblem& problem, double x0, const GBsdeOptions& opt = {}) {
  const auto lip = generator_lipschitz(problem, opt.lipschitz_samples, opt.seed);
  return solve_gbsde(problem, x0, gbsde_grid(problem, x0, kDefaultBsdeNx, opt.cfl, &lip), opt);
}

inline KPath extract_k(const GBsdeProblem& problem, const GBsdeSolution& sol, const VolScenario& scenario) {
  detail::require_scalar_problem(problem);
  const Grid1D& grid = sol.field.grid;
  const auto [lo, hi] = detail::variance_range(problem.gamma);
  if (scenario.kind == VolScenario::Kind::piecewise) {
    if (scenario.values.size() != scenario.breakpoints.size() + 1)
      throw InputError("scenario '" + scenario.id + "': need one more value than breakpoints");
    for (double v : scenario.values)
      if (!(v >= lo - 1e-12 && v <= hi + 1e-12))
        throw ScenarioOutOfRange("scenario '" + scenario.id + "': variance " + std::to_string(v) + " outside [" +
                                 std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }

  const detail::GeneratorTerm f(problem.generator.f);
  const detail::GeneratorTerm g(problem.generator.g(0, 0));
  const double inv_dx = 1.0 / grid.dx();
  const double inv_dx2 = inv_dx * inv_dx;
  const double dt = grid.dt;
  const bool time_dep = detail::forward_time_dependent(problem.forward);
  detail::NodeCoefficients c;
  c.fill(problem.forward, grid, sol.field.times.front());

  // Law of X on the grid nodes, starting as a point mass at x0.
  std::vector<double> mass(static_cast<std::size_t>(grid.nx), 0.0), next(mass.size());
  {
    const int i = grid.cell_of(sol.x0);
    const double w = std::clamp((sol.x0 - grid.x(i)) / grid.dx(), 0.0, 1.0);
    mass[i] += 1.0 - w;
    mass[i + 1] += w;
  }

  KPath path;
  path.scenario_id = scenario.id;
  path.times = sol.field.times;
  path.k.assign(path.times.size(), 0.0);
  path.qv.assign(path.times.size(), 0.0);

  for (int k = 0; k < grid.nt; ++k) {
    const double t_now = sol.field.times[k];
    const double t = sol.field.times[k + 1];
    if (time_dep) c.fill(problem.forward, grid, t);
    auto u = sol.field.layer(k + 1);
    auto u_now = sol.field.layer(k);
    double dk = 0.0, dqv = 0.0;
    std::fill(next.begin(), next.end(), 0.0);
    for (int i = 0; i < grid.nx; ++i) {
      const double du = stencil::first(u, i, inv_dx);
      const double d2u = stencil::second(u, i, inv_dx2);
      const double y = u[i];
      const double z = c.sigma[i] * du;
      const double gv = g(t, y, z);
      double v;
      if (scenario.kind == VolScenario::Kind::worst_case)
        v = argmax_variance(problem.gamma, c.h[i] * du + 0.5 * c.s2[i] * d2u + gv);
      else
        v = scenario.at(t_now);
      const double drift = c.b[i] + c.h[i] * v;
      // Conditional mean of u^{k+1} one step ahead under variance v.
      const double mean_next = y + dt * (drift * du + 0.5 * c.s2[i] * v * d2u);
      const double residual = mean_next - u_now[i] + dt * f(t, y, z) + dt * v * gv;
      dk += mass[i] * residual;
      dqv += mass[i] * v * dt;

      if (mass[i] == 0.0) continue;
      if (i == 0 || i == grid.nx - 1) {
        next[i] += mass[i];
        continue;
      }
      // Transition law: centred when it is a probability, upwind otherwise.
      const double diff = 0.5 * c.s2[i] * v * dt * inv_dx2;
      const double adv = drift * dt * inv_dx;
      double up = diff + 0.5 * adv, down = diff - 0.5 * adv;
      if (up < 0.0 || down < 0.0) {
        up = diff + std::max(adv, 0.0);
        down = diff + std::max(-adv, 0.0);
      }
      if (up + down > 1.0) {
        const double s = 1.0 / (up + down);
        up *= s;
        down *= s;
      }
      next[i + 1] += mass[i] * up;
      next[i - 1] += mass[i] * down;
      next[i] += mass[i] * (1.0 - up - down);
    }
    mass.swap(next);
    path.k[k + 1] = path.k[k] + dk;
    path.qv[k + 1] = path.qv[k] + dqv;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Comparison of two generators on shared terminal data

struct ComparisonRow {
  std::string payoff_id;
  double tau = 0.0;             ///< tolerance used for this payoff
  long violations = 0;          ///< interior nodes with Y1 < Y2 - tau
  long nodes_checked = 0;
  double worst_gap = 0.0;       ///< max over nodes of Y2 - Y1
  double worst_t = 0.0, worst_x = 0.0;
  bool identical = false;       ///< Y1 and Y2 agree bit for bit
  double y0_first = 0.0, y0_second = 0.0;
};

struct ComparisonReport {
  std::vector<ComparisonRow> rows;
  long total_violations() const {
    long n = 0;
    for (const auto& r : rows) n += r.violations;
    return n;
  }
};

/// Same grid with every other spatial node removed; used as the coarse
/// solve in the truncation estimate.
inline Grid1D coarsened(const Grid1D& g) {
  Grid1D c = g;
  c.nx = (g.nx - 1) / 2 + 1;
  c.x_max = g.x_min + (c.nx - 1) * 2.0 * g.dx();
  return c;
}

/// Solves both problems for every terminal payoff and flags interior nodes
/// where the first solution falls below the second by more than
/// tau = 1e-6 + 2 * |y0(fine) - y0(coarse)|.
inline ComparisonReport compare_solutions(const GBsdeProblem& first, const GBsdeProblem& second,
                                          const std::vector<NamedPayoff>& payoffs, double x0, const Grid1D& grid,
                                          const GBsdeOptions& opt = {}) {
  const Grid1D coarse = coarsened(grid);
  std::vector<GBsdeSolution> fine(payoffs.size() * 2);
  std::vector<double> coarse_y0(payoffs.size() * 2);
  GBsdeOptions inner = opt;
  inner.scenarios.clear();
  inner.threads = 1;
  inner.store_z = false;

  parallel_for(payoffs.size() * 4, resolve_threads(opt.threads), [&](std::size_t job) {
    const std::size_t slot = job / 2;
    GBsdeProblem p = (slot % 2 == 0) ? first : second;
    p.terminal = payoffs[slot / 2].expr;
    if (job % 2 == 0)
      fine[slot] = solve_gbsde(p, x0, grid, inner);
    else
      coarse_y0[slot] = solve_gbsde(p, x0, coarse, inner).y0;
  });

  ComparisonReport report;
  for (std::size_t j = 0; j < payoffs.size(); ++j) {
    const auto& a = fine[2 * j];
    const auto& b = fine[2 * j + 1];
    ComparisonRow row;
    row.payoff_id = payoffs[j].id;
    row.y0_first = a.y0;
    row.y0_second = b.y0;
    row.tau = 1e-6 + 2.0 * std::max(std::fabs(a.y0 - coarse_y0[2 * j]), std::fabs(b.y0 - coarse_y0[2 * j + 1]));
    row.identical = a.field.values == b.field.values;
    row.worst_gap = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < a.field.layers(); ++k) {
      for (int i = 1; i + 1 < grid.nx; ++i) {
        const double gap = b.field.at(k, i) - a.field.at(k, i);
        ++row.nodes_checked;
        if (gap > row.worst_gap) {
          row.worst_gap = gap;
          row.worst_t = a.field.times[k];
          row.worst_x = grid.x(i);
        }
        if (gap > row.tau) ++row.violations;
      }
    }
    report.rows.push_back(row);
  }
  return report;
}

}  // namespace gxlab
