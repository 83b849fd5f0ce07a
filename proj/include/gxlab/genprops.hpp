#pragma once

// Generator-level predicates (converse-comparison gap, translation,
// sub-additivity, convexity, positive homogeneity) and a harness that ties
// each predicate to the matching statement about the solutions.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "gxlab/gbsde.hpp"
#include "gxlab/gcore.hpp"
#include "gxlab/repr.hpp"

namespace gxlab {

enum class Predicate { translation, subadd, convex, poshom, converse_gap };

inline const char* predicate_name(Predicate p) {
  switch (p) {
    case Predicate::translation: return "translation";
    case Predicate::subadd: return "subadd";
    case Predicate::convex: return "convex";
    case Predicate::poshom: return "poshom";
    case Predicate::converse_gap: return "converse-gap";
  }
  return "?";
}

/// Tolerance for the identities, which are pure expression arithmetic.
inline constexpr double kPredicateTolerance = 1e-10;

struct PredicatePoint {
  double t = 0.0, y = 0.0, y2 = 0.0, z = 0.0, z2 = 0.0, lambda = 1.0;

  std::string str() const {
    char buf[160];
    std::snprintf(buf, sizeof buf, "t=%g;y=%g;y'=%g;z=%g;z'=%g;lambda=%g", t, y, y2, z, z2, lambda);
    return buf;
  }
};

struct PredicateReport {
  Predicate predicate = Predicate::translation;
  std::string sample_grid;
  double worst_violation = 0.0;
  std::optional<PredicatePoint> witness;  ///< set iff the predicate fails
  bool holds = true;
  long points = 0;

  const char* verdict() const { return holds ? "holds" : "fails"; }
};

struct PredicateGrid {
  std::vector<double> t;
  std::vector<double> y{-2.0, -1.0, 0.0, 1.0, 2.0};
  std::vector<double> z{-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0};
  std::vector<double> convex_lambda{0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> homogeneity_lambda{0.0, 0.5, 1.0, 2.0, 5.0};

  /// Times {0, T/4, T/2, 3T/4}.
  static PredicateGrid for_horizon(double horizon) {
    PredicateGrid g;
    g.t = {0.0, 0.25 * horizon, 0.5 * horizon, 0.75 * horizon};
    return g;
  }

  std::string describe(bool pairs, bool lambdas, const std::vector<double>* lam = nullptr) const {
    std::string s = std::to_string(t.size()) + " t x " + std::to_string(y.size()) + (pairs ? "^2" : "") + " y x " +
                    std::to_string(z.size()) + (pairs ? "^2" : "") + " z";
    if (lambdas && lam) s += " x " + std::to_string(lam->size()) + " lambda";
    return s;
  }
};

namespace detail {

/// Tracks the worst value seen and where; the first maximiser wins.
struct Worst {
  double value = -std::numeric_limits<double>::infinity();
  PredicatePoint at;
  long count = 0;
  void offer(double v, const PredicatePoint& p) {
    ++count;
    if (v > value) {
      value = v;
      at = p;
    }
  }
};

inline PredicateReport finish(Predicate pred, std::string grid, const Worst& w) {
  PredicateReport r;
  r.predicate = pred;
  r.sample_grid = std::move(grid);
  r.points = w.count;
  r.worst_violation = std::max(0.0, w.value);
  r.holds = r.worst_violation <= kPredicateTolerance;
  if (!r.holds) r.witness = w.at;
  return r;
}

}  // namespace detail

/// f2 - f1 + 2G(g2 - g1) at (t, y, z). Non-positive everywhere is the
/// generator-level condition for Y1 >= Y2.
inline double converse_gap(const GeneratorSpec& gen1, const GeneratorSpec& gen2, const UncertaintySet& gamma, double t,
                           double y, double z) {
  if (gen1.dim() != gen2.dim() || gen1.dim() != gamma.dim()) throw DimensionMismatch("converse_gap: dimensions differ");
  return gen2.f_at(t, y, z) - gen1.f_at(t, y, z) + two_g(gamma, Matrix(gen2.g_at(t, y, z) - gen1.g_at(t, y, z)));
}

/// Positive part of the converse gap over the (t, y, z) grid.
inline PredicateReport check_converse_gap(const GeneratorSpec& gen1, const GeneratorSpec& gen2,
                                          const UncertaintySet& gamma, const PredicateGrid& grid) {
  detail::Worst w;
  for (double t : grid.t)
    for (double y : grid.y)
      for (double z : grid.z) w.offer(converse_gap(gen1, gen2, gamma, t, y, z), {t, y, y, z, z, 1.0});
  return detail::finish(Predicate::converse_gap, grid.describe(false, false), w);
}

/// |f(y,z) - f(y',z) + 2G(g(y,z) - g(y',z))| must vanish.
inline PredicateReport check_translation(const GeneratorSpec& gen, const UncertaintySet& gamma, const PredicateGrid& grid) {
  detail::Worst w;
  for (double t : grid.t)
    for (double y : grid.y)
      for (double y2 : grid.y)
        for (double z : grid.z) {
          const double v = gen.f_at(t, y, z) - gen.f_at(t, y2, z) +
                           two_g(gamma, Matrix(gen.g_at(t, y, z) - gen.g_at(t, y2, z)));
          w.offer(std::fabs(v), {t, y, y2, z, z, 1.0});
        }
  return detail::finish(Predicate::translation, grid.describe(true, false), w);
}

/// f(y+y', z+z') - f(y,z) - f(y',z') + 2G(g(y+y',z+z') - g(y,z) - g(y',z')) <= 0.
inline double subadd_lhs(const GeneratorSpec& gen, const UncertaintySet& gamma, double t, double y, double y2, double z,
                       double z2) {
  const Matrix dg = gen.g_at(t, y + y2, z + z2) - gen.g_at(t, y, z) - gen.g_at(t, y2, z2);
  return gen.f_at(t, y + y2, z + z2) - gen.f_at(t, y, z) - gen.f_at(t, y2, z2) + two_g(gamma, dg);
}

inline PredicateReport check_subadd(const GeneratorSpec& gen, const UncertaintySet& gamma, const PredicateGrid& grid) {
  detail::Worst w;
  for (double t : grid.t)
    for (double y : grid.y)
      for (double y2 : grid.y)
        for (double z : grid.z)
          for (double z2 : grid.z) w.offer(subadd_lhs(gen, gamma, t, y, y2, z, z2), {t, y, y2, z, z2, 1.0});
  return detail::finish(Predicate::subadd, grid.describe(true, false), w);
}

/// Convexity form of the above with weights lambda, 1 - lambda.
inline double convex_lhs(const GeneratorSpec& gen, const UncertaintySet& gamma, double t, double y, double y2, double z,
                       double z2, double lam) {
  const double ym = lam * y + (1.0 - lam) * y2;
  const double zm = lam * z + (1.0 - lam) * z2;
  const Matrix dg = gen.g_at(t, ym, zm) - lam * gen.g_at(t, y, z) - (1.0 - lam) * gen.g_at(t, y2, z2);
  return gen.f_at(t, ym, zm) - lam * gen.f_at(t, y, z) - (1.0 - lam) * gen.f_at(t, y2, z2) + two_g(gamma, dg);
}

inline PredicateReport check_convex(const GeneratorSpec& gen, const UncertaintySet& gamma, const PredicateGrid& grid) {
  detail::Worst w;
  for (double lam : grid.convex_lambda)
    for (double t : grid.t)
      for (double y : grid.y)
        for (double y2 : grid.y)
          for (double z : grid.z)
            for (double z2 : grid.z) w.offer(convex_lhs(gen, gamma, t, y, y2, z, z2, lam), {t, y, y2, z, z2, lam});
  return detail::finish(Predicate::convex, grid.describe(true, true, &grid.convex_lambda), w);
}

/// Residuals of f(ly,lz) - l f(y,z) = 2G(l g(y,z) - g(ly,lz)) and of the
/// second form with -2G(g(ly,lz) - l g(y,z)); the larger is returned.
inline double poshom_residual(const GeneratorSpec& gen, const UncertaintySet& gamma, double t, double y, double z,
                            double lam) {
  const double lhs = gen.f_at(t, lam * y, lam * z) - lam * gen.f_at(t, y, z);
  const Matrix a = lam * gen.g_at(t, y, z) - gen.g_at(t, lam * y, lam * z);
  const double first = std::fabs(lhs - two_g(gamma, a));
  const double second = std::fabs(lhs + two_g(gamma, Matrix(-a)));
  return std::max(first, second);
}

inline PredicateReport check_poshom(const GeneratorSpec& gen, const UncertaintySet& gamma, const PredicateGrid& grid) {
  detail::Worst w;
  for (double lam : grid.homogeneity_lambda)
    for (double t : grid.t)
      for (double y : grid.y)
        for (double z : grid.z) w.offer(poshom_residual(gen, gamma, t, y, z, lam), {t, y, y, z, z, lam});
  return detail::finish(Predicate::poshom, grid.describe(false, true, &grid.homogeneity_lambda), w);
}

inline PredicateReport check_predicate(Predicate p, const GeneratorSpec& gen, const UncertaintySet& gamma,
                                       const PredicateGrid& grid) {
  switch (p) {
    case Predicate::translation: return check_translation(gen, gamma, grid);
    case Predicate::subadd: return check_subadd(gen, gamma, grid);
    case Predicate::convex: return check_convex(gen, gamma, grid);
    case Predicate::poshom: return check_poshom(gen, gamma, grid);
    case Predicate::converse_gap: break;
  }
  throw InputError("converse-gap needs two generators; use check_converse_gap");
}

// ---------------------------------------------------------------------------
// Expectation-level cross-checks

struct CrosscheckOptions {
  double horizon = 0.5;
  double start_time = 0.0;
  double x0 = 0.0;
  int nx = 257;
  /// Absolute tolerance on solution-level identities and inequalities.
  double tolerance = 1e-6;
  /// Relative agreement required between measured and predicted slope gaps.
  double witness_rel_tol = 0.05;
  /// Predicted gaps below this are treated as indistinguishable from noise.
  double noise_floor = 1e-3;
  std::vector<double> eps_grid = default_eps_grid();
  int threads = 0;
  /// Witness location for the converse direction; defaults to the worst grid point.
  std::optional<PredicatePoint> witness_point;
};

/// One solution-level comparison on the forward path.
struct CrosscheckRow {
  std::string label;
  double lhs = 0.0;  ///< e.g. E[xi + eta]
  double rhs = 0.0;  ///< e.g. E[xi] + E[eta]
  double violation = 0.0;
};

/// One small-time solve in a converse witness: terminal y + p (X_eps - x)
/// under the given generator, with weight w in the combination.
struct WitnessLeg {
  int generator = 0;
  double y = 0.0;
  double p = 0.0;
  double weight = 1.0;
  double predicted_slope = 0.0;
  double measured_slope = 0.0;
  double smallest_eps_slope = 0.0;
};

struct CrosscheckReport {
  enum class Direction { forward, converse };

  Predicate predicate = Predicate::translation;
  PredicateReport predicate_report;
  Direction direction = Direction::forward;
  bool consistent = false;  ///< forward: no violations; converse: violation exhibited
  std::vector<CrosscheckRow> rows;
  std::vector<WitnessLeg> legs;
  double h = 0.0;               ///< d<B> coefficient of the witness forward process
  double predicted_gap = 0.0;   ///< sum of weight * predicted slope
  double measured_gap = 0.0;    ///< sum of weight * fitted slope
  double small_eps_gap = 0.0;   ///< sum of weight * D(eps_min)
  std::string detail;

  const char* direction_name() const { return direction == Direction::forward ? "forward" : "converse"; }
};

namespace detail {

inline GBsdeProblem crosscheck_problem(const GeneratorSpec& gen, const UncertaintySet& gamma,
                                       const CrosscheckOptions& opt) {
  GBsdeProblem p;
  p.forward = ForwardSpec::parse("0", "0", "1");
  p.generator = gen;
  p.gamma = gamma;
  p.horizon = opt.horizon;
  p.start_time = opt.start_time;
  return p;
}

/// y0 for every terminal payoff on one shared grid.
inline std::vector<double> solve_all(const GBsdeProblem& base, const std::vector<Expr>& terminals,
                                     const CrosscheckOptions& opt) {
  const auto lip = generator_lipschitz(base);
  const Grid1D grid = gbsde_grid(base, opt.x0, opt.nx, kMaxCflSafety, &lip);
  std::vector<double> y0(terminals.size());
  GBsdeOptions gopt;
  gopt.threads = 1;
  gopt.store_z = false;
  parallel_for(terminals.size(), resolve_threads(opt.threads), [&](std::size_t i) {
    GBsdeProblem p = base;
    p.terminal = terminals[i];
    y0[i] = solve_gbsde(p, opt.x0, grid, gopt).y0;
  });
  return y0;
}

/// Slope gap of a weighted combination of linear-terminal solves. The
/// forward process is dX = h d<B> + dB, so the terminal y + p (X_eps - x)
/// equals y + p dB + p h d<B>; h is picked from the candidates that cancel
/// one leg's g-term, maximising the predicted gap.
inline void run_witness(CrosscheckReport& rep, const std::vector<const GeneratorSpec*>& gens,
                        const UncertaintySet& gamma, double t, std::vector<WitnessLeg> legs, bool two_sided,
                        const CrosscheckOptions& opt) {
  auto predicted = [&](const WitnessLeg& leg, double h) {
    const GeneratorSpec& g = *gens[leg.generator];
    return g.f_at(t, leg.y, leg.p) + two_g(gamma, g.g_scalar(t, leg.y, leg.p) + leg.p * h);
  };
  auto gap_for = [&](double h) {
    double s = 0.0;
    for (const auto& leg : legs) s += leg.weight * predicted(leg, h);
    return s;
  };
  // Cancelling the last leg's g-term comes first, so ties keep that choice.
  std::vector<double> candidates;
  for (auto it = legs.rbegin(); it != legs.rend(); ++it)
    if (it->p != 0.0) candidates.push_back(-gens[it->generator]->g_scalar(t, it->y, it->p) / it->p);
  candidates.push_back(0.0);
  double best_h = 0.0, best = -std::numeric_limits<double>::infinity();
  for (double h : candidates) {
    const double v = two_sided ? std::fabs(gap_for(h)) : gap_for(h);
    if (v > best) {
      best = v;
      best_h = h;
    }
  }
  rep.h = best_h + 0.0;  // avoid printing -0
  rep.predicted_gap = gap_for(best_h);
  if (!(best > opt.noise_floor)) {
    rep.legs = std::move(legs);
    throw InconclusiveTolerance("predicted solution-level gap " + std::to_string(rep.predicted_gap) +
                                " is below the noise floor " + std::to_string(opt.noise_floor));
  }

  std::vector<SlopeEstimate> est(legs.size());
  for (std::size_t i = 0; i < legs.size(); ++i) {
    legs[i].predicted_slope = predicted(legs[i], best_h);
    ReprCase c;
    c.id = "witness-leg-" + std::to_string(i);
    c.forward = ForwardSpec::scalar(Expr::constant(0.0), Expr::constant(best_h), Expr::constant(1.0));
    c.generator = *gens[legs[i].generator];
    c.gamma = gamma;
    c.point = {t, opt.x0, legs[i].y, legs[i].p, {}};
    c.eps_grid = opt.eps_grid;
    c.horizon = t + opt.eps_grid.front();
    SlopeOptions so;
    so.threads = opt.threads;
    est[i] = slope_estimate(c, so);
    legs[i].measured_slope = est[i].fitted_limit;
    legs[i].smallest_eps_slope = est[i].d_eps.back();
  }
  rep.measured_gap = 0.0;
  rep.small_eps_gap = 0.0;
  for (const auto& leg : legs) {
    rep.measured_gap += leg.weight * leg.measured_slope;
    rep.small_eps_gap += leg.weight * leg.smallest_eps_slope;
  }
  const double err = std::fabs(rep.measured_gap - rep.predicted_gap);
  const bool agrees = err <= opt.witness_rel_tol * std::fabs(rep.predicted_gap);
  const bool same_sign = rep.small_eps_gap * rep.predicted_gap > 0.0;
  rep.consistent = agrees && same_sign;
  char buf[256];
  std::snprintf(buf, sizeof buf, "h=%g predicted gap %.6g, measured %.6g (rel err %.3g), D-gap at eps_min %.6g",
                best_h, rep.predicted_gap, rep.measured_gap, err / std::fabs(rep.predicted_gap), rep.small_eps_gap);
  rep.detail = buf;
  rep.legs = std::move(legs);
}

}  // namespace detail

/// Checks the predicate on the grid, then either confirms the matching
/// solution-level property on the payoffs (predicate holds) or builds a
/// small-time witness showing the property fails (predicate fails).
inline CrosscheckReport crosscheck_expectation(const GeneratorSpec& gen, const UncertaintySet& gamma, Predicate pred,
                                               const std::vector<NamedPayoff>& payoffs, const CrosscheckOptions& opt = {},
                                               const std::optional<PredicateGrid>& grid_in = std::nullopt) {
  const PredicateGrid grid = grid_in ? *grid_in : PredicateGrid::for_horizon(1.0);
  CrosscheckReport rep;
  rep.predicate = pred;
  rep.predicate_report = check_predicate(pred, gen, gamma, grid);

  if (rep.predicate_report.holds) {
    rep.direction = CrosscheckReport::Direction::forward;
    if (payoffs.empty()) throw InputError("crosscheck: payoff list is empty");
    const GBsdeProblem base = detail::crosscheck_problem(gen, gamma, opt);
    const std::size_t n = payoffs.size();
    std::vector<Expr> terms;
    std::vector<std::string> labels;
    auto add = [&](const Expr& e) {
      terms.push_back(e);
      return terms.size() - 1;
    };
    std::vector<std::size_t> base_idx(n);
    for (std::size_t i = 0; i < n; ++i) base_idx[i] = add(payoffs[i].expr);

    struct Plan {
      std::string label;
      std::size_t combined;
      std::vector<std::pair<std::size_t, double>> parts;  // weighted terms of the rhs
      double constant = 0.0;
      bool equality = false;
    };
    std::vector<Plan> plans;
    switch (pred) {
      case Predicate::translation:
        for (std::size_t i = 0; i < n; ++i)
          for (double c : {-1.0, 0.5, 2.0})
            plans.push_back({payoffs[i].id + "+" + std::to_string(c), add(payoffs[i].expr + c), {{base_idx[i], 1.0}}, c,
                             true});
        break;
      case Predicate::subadd:
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = (i + 1) % n;
          plans.push_back({payoffs[i].id + "+" + payoffs[j].id, add(payoffs[i].expr + payoffs[j].expr),
                           {{base_idx[i], 1.0}, {base_idx[j], 1.0}}, 0.0, false});
        }
        break;
      case Predicate::convex:
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t j = (i + 1) % n;
          for (double lam : {0.25, 0.5}) {
            plans.push_back({payoffs[i].id + "~" + payoffs[j].id + "@" + std::to_string(lam),
                             add(lam * payoffs[i].expr + (1.0 - lam) * payoffs[j].expr),
                             {{base_idx[i], lam}, {base_idx[j], 1.0 - lam}}, 0.0, false});
          }
        }
        break;
      case Predicate::poshom:
        for (std::size_t i = 0; i < n; ++i)
          for (double lam : {0.5, 2.0})
            plans.push_back({std::to_string(lam) + "*" + payoffs[i].id, add(lam * payoffs[i].expr),
                             {{base_idx[i], lam}}, 0.0, true});
        break;
      case Predicate::converse_gap: throw InputError("use crosscheck_comparison for the converse gap");
    }

    const auto y0 = detail::solve_all(base, terms, opt);
    rep.consistent = true;
    for (const auto& p : plans) {
      CrosscheckRow row;
      row.label = p.label;
      row.lhs = y0[p.combined];
      row.rhs = p.constant;
      for (const auto& [idx, w] : p.parts) row.rhs += w * y0[idx];
      row.violation = p.equality ? std::fabs(row.lhs - row.rhs) : std::max(0.0, row.lhs - row.rhs);
      if (row.violation > opt.tolerance) rep.consistent = false;
      rep.rows.push_back(row);
    }
    rep.detail = std::to_string(rep.rows.size()) + " solution-level checks on " + std::to_string(n) + " payoffs";
    return rep;
  }

  rep.direction = CrosscheckReport::Direction::converse;
  const PredicatePoint w = opt.witness_point ? *opt.witness_point : *rep.predicate_report.witness;
  std::vector<WitnessLeg> legs;
  bool two_sided = false;
  switch (pred) {
    case Predicate::translation:
      legs = {{0, w.y, w.z, 1.0}, {0, w.y2, w.z, -1.0}};
      two_sided = true;
      break;
    case Predicate::subadd:
      legs = {{0, w.y + w.y2, w.z + w.z2, 1.0}, {0, w.y, w.z, -1.0}, {0, w.y2, w.z2, -1.0}};
      break;
    case Predicate::convex: {
      const double l = w.lambda;
      legs = {{0, l * w.y + (1 - l) * w.y2, l * w.z + (1 - l) * w.z2, 1.0}, {0, w.y, w.z, -l}, {0, w.y2, w.z2, l - 1}};
      break;
    }
    case Predicate::poshom:
      legs = {{0, w.lambda * w.y, w.lambda * w.z, 1.0}, {0, w.y, w.z, -w.lambda}};
      two_sided = true;
      break;
    case Predicate::converse_gap: break;
  }
  detail::run_witness(rep, {&gen}, gamma, w.t, std::move(legs), two_sided, opt);
  return rep;
}

/// Comparison of two generators: if the converse gap is non-positive on the
/// grid, solutions must be ordered Y1 >= Y2 on every payoff; otherwise a
/// witness with E2 > E1 is constructed at the worst grid point.
inline CrosscheckReport crosscheck_comparison(const GeneratorSpec& gen1, const GeneratorSpec& gen2,
                                              const UncertaintySet& gamma, const std::vector<NamedPayoff>& payoffs,
                                              const CrosscheckOptions& opt = {},
                                              const std::optional<PredicateGrid>& grid_in = std::nullopt) {
  const PredicateGrid grid = grid_in ? *grid_in : PredicateGrid::for_horizon(1.0);
  CrosscheckReport rep;
  rep.predicate = Predicate::converse_gap;
  rep.predicate_report = check_converse_gap(gen1, gen2, gamma, grid);
  if (rep.predicate_report.holds) {
    rep.direction = CrosscheckReport::Direction::forward;
    const GBsdeProblem p1 = detail::crosscheck_problem(gen1, gamma, opt);
    const GBsdeProblem p2 = detail::crosscheck_problem(gen2, gamma, opt);
    const auto lip1 = generator_lipschitz(p1), lip2 = generator_lipschitz(p2);
    const GeneratorLipschitz lip{std::max(lip1.f, lip2.f), std::max(lip1.g, lip2.g)};
    const Grid1D grid1d = gbsde_grid(p1, opt.x0, opt.nx, kMaxCflSafety, &lip);
    GBsdeOptions gopt;
    gopt.threads = opt.threads;
    const auto cmp = compare_solutions(p1, p2, payoffs, opt.x0, grid1d, gopt);
    rep.consistent = cmp.total_violations() == 0;
    for (const auto& r : cmp.rows)
      rep.rows.push_back({r.payoff_id, r.y0_first, r.y0_second, static_cast<double>(r.violations)});
    rep.detail = std::to_string(cmp.total_violations()) + " order violations";
    return rep;
  }
  rep.direction = CrosscheckReport::Direction::converse;
  const PredicatePoint w = opt.witness_point ? *opt.witness_point : *rep.predicate_report.witness;
  detail::run_witness(rep, {&gen1, &gen2}, gamma, w.t, {{1, w.y, w.z, 1.0}, {0, w.y, w.z, -1.0}}, false, opt);
  return rep;
}

}  // namespace gxlab
