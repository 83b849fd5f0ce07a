#pragma once

// Brute-force G-expectation: exhaustive backward induction over a tree in
// which, at every node, an adversary picks a variance from a finite list
// before a symmetric two-point increment +/- sqrt(variance * dt) is drawn.
// The running quadratic variation sum(variance * dt) is carried as state.

#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gxlab/gcore.hpp"
#include "gxlab/gheat.hpp"

namespace gxlab {

inline constexpr int kMaxLatticeSteps = 12;
inline constexpr std::uint64_t kDefaultLatticeBudget = 2'000'000'000ULL;

struct VolLattice {
  int steps = 10;
  double horizon = 1.0;
  std::vector<double> vol_choices;

  double dt() const noexcept { return horizon / steps; }

  /// Lattice whose choices are the two endpoints of an interval Gamma.
  static VolLattice endpoints(const UncertaintySet& gamma, int steps, double horizon) {
    VolLattice l{steps, horizon, {gamma.sigma2_min(), gamma.sigma2_max()}};
    if (gamma.sigma2_min() == gamma.sigma2_max()) l.vol_choices.pop_back();
    l.validate(gamma);
    return l;
  }

  void validate(const UncertaintySet& gamma) const {
    if (steps < 1 || steps > kMaxLatticeSteps)
      throw InputError("lattice steps must be in [1, " + std::to_string(kMaxLatticeSteps) + "]");
    if (!(horizon > 0.0)) throw InputError("lattice horizon must be > 0");
    if (vol_choices.empty()) throw InputError("lattice needs at least one volatility choice");
    for (double v : vol_choices)
      if (v < gamma.sigma2_min() || v > gamma.sigma2_max())
        throw InputError("volatility choice " + std::to_string(v) + " outside Gamma");
  }

  /// Leaf count times depth: the work of one exhaustive evaluation.
  double cost() const noexcept {
    return steps * std::pow(2.0 * static_cast<double>(vol_choices.size()), steps);
  }
};

namespace detail {

template <class Payoff>
double lattice_value(const VolLattice& l, const std::vector<double>& scales, int depth, double x, double qv,
                     Payoff& payoff) {
  if (depth == l.steps) return payoff(x, qv);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < l.vol_choices.size(); ++c) {
    const double next_qv = qv + l.vol_choices[c] * l.dt();
    const double up = lattice_value(l, scales, depth + 1, x + scales[c], next_qv, payoff);
    const double down = lattice_value(l, scales, depth + 1, x - scales[c], next_qv, payoff);
    best = std::max(best, 0.5 * (up + down));
  }
  return best;
}

}  // namespace detail

/// Exhaustive max-of-means over the tree. `payoff(x_T, qv_T)` sees the
/// terminal position and the accumulated quadratic variation.
template <class Payoff>
  requires std::invocable<Payoff&, double, double>
double oracle_expect(const VolLattice& lattice, Payoff&& payoff, std::uint64_t budget = kDefaultLatticeBudget) {
  if (lattice.steps < 1 || lattice.steps > kMaxLatticeSteps || lattice.vol_choices.empty())
    throw InputError("malformed lattice");
  if (lattice.cost() > static_cast<double>(budget))
    throw BudgetExceeded("lattice needs " + std::to_string(lattice.cost()) + " node visits, budget is " +
                         std::to_string(budget));
  std::vector<double> scales;
  for (double v : lattice.vol_choices) scales.push_back(std::sqrt(v * lattice.dt()));
  return detail::lattice_value(lattice, scales, 0, 0.0, 0.0, payoff);
}

/// Expression payoff: x is the terminal position, y the terminal <B>.
inline double oracle_expect(const VolLattice& lattice, const Expr& payoff,
                            std::uint64_t budget = kDefaultLatticeBudget) {
  return oracle_expect(
      lattice,
      [&](double x, double qv) { return payoff.evaluate(expr::Bindings{}.set(expr::Var::x, x).set(expr::Var::y, qv)); },
      budget);
}

struct NamedPayoff {
  std::string id;
  Expr expr;
};

struct OracleRow {
  std::string payoff_id;
  double oracle = 0.0;
  double pde = 0.0;
  double abs_diff = 0.0;
  bool flagged = false;
};

struct OracleReport {
  std::vector<OracleRow> rows;
  double tolerance = 0.0;
  bool all_within() const {
    for (const auto& r : rows)
      if (r.flagged) return false;
    return true;
  }
};

/// Cross-validates the lattice oracle against the PDE solver for payoffs of
/// the terminal position only.
inline OracleReport oracle_vs_pde(const UncertaintySet& gamma, const std::vector<NamedPayoff>& payoffs, int steps,
                                  double horizon, const Grid1D& grid, double tolerance, int threads = 0) {
  const VolLattice lattice = VolLattice::endpoints(gamma, steps, horizon);
  OracleReport report;
  report.tolerance = tolerance;
  report.rows.resize(payoffs.size());
  parallel_for(payoffs.size(), resolve_threads(threads), [&](std::size_t i) {
    if (payoffs[i].expr.depends_on(expr::Var::y) || payoffs[i].expr.depends_on(expr::Var::z) ||
        payoffs[i].expr.depends_on(expr::Var::t))
      throw InputError("oracle_vs_pde: payoff '" + payoffs[i].id + "' must depend on x only");
    OracleRow row;
    row.payoff_id = payoffs[i].id;
    row.oracle = oracle_expect(lattice, payoffs[i].expr);
    row.pde = g_expect(gamma, payoffs[i].expr, horizon, grid);
    row.abs_diff = std::fabs(row.oracle - row.pde);
    row.flagged = row.abs_diff > tolerance;
    report.rows[i] = row;
  });
  return report;
}

}  // namespace gxlab
