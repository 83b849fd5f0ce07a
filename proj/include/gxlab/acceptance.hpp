#pragma once

// End-to-end acceptance suite. Each criterion produces one pass/fail result
// plus plot-ready data files; the determinism criterion re-runs the suite
// and compares digests of those files.

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "gxlab/gbsde.hpp"
#include "gxlab/gcore.hpp"
#include "gxlab/genprops.hpp"
#include "gxlab/gheat.hpp"
#include "gxlab/io.hpp"
#include "gxlab/lattice.hpp"
#include "gxlab/repr.hpp"

namespace gxlab::acceptance {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
  double seconds = 0.0;  ///< not part of any digest
};

struct Options {
  double tolerance_scale = 1.0;
  int threads = 0;
  std::uint64_t seed = 0;
  bool check_determinism = true;
};

struct DataFile {
  std::string name;
  std::string content;
};

struct SuiteRun {
  std::vector<CriterionResult> results;
  std::vector<DataFile> files;

  bool all_passed() const {
    for (const auto& r : results)
      if (!r.passed) return false;
    return true;
  }

  std::string digest() const {
    std::string acc;
    for (const auto& f : files) acc += f.name + ":" + io::sha256_hex(f.content) + "\n";
    return io::sha256_hex(acc);
  }
};

using Reporter = std::function<void(const CriterionResult&)>;

namespace detail {

inline UncertaintySet pair_gamma(double s2max) { return UncertaintySet::interval(0.25, s2max); }

inline std::vector<NamedPayoff> payoffs(std::initializer_list<std::pair<const char*, const char*>> list) {
  std::vector<NamedPayoff> out;
  for (const auto& [id, e] : list) out.push_back({id, expr::parse(e)});
  return out;
}

inline std::string fmt(double v) { return io::fmt(v); }

// 1. G axioms on sampled inputs, interval and 2x2 matrix families.
inline CriterionResult g_axioms(const Options& opt) {
  const double tol = 1e-12 * opt.tolerance_scale;
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  long violations = 0;
  double worst = 0.0;
  auto check = [&](double slack) {
    worst = std::max(worst, slack);
    if (slack > tol) ++violations;
  };
  constexpr int kSamples = 1000;
  for (int s = 0; s < kSamples; ++s) {
    if (s % 2 == 0) {
      const double lo = 0.05 + 0.95 * u(rng);
      const auto gamma = UncertaintySet::interval(lo, lo + 2.0 * u(rng));
      double a = -5.0 + 10.0 * u(rng), b = -5.0 + 10.0 * u(rng);
      if (a < b) std::swap(a, b);
      const double lam = 5.0 * u(rng);
      check(g_value(gamma, b) - g_value(gamma, a));
      check(g_value(gamma, a + b) - g_value(gamma, a) - g_value(gamma, b));
      check(std::fabs(g_value(gamma, lam * a) - lam * g_value(gamma, a)));
      check(nondegeneracy_constant(gamma) * (a - b) - (g_value(gamma, a) - g_value(gamma, b)));
    } else {
      const double floor = 0.05 + 0.5 * u(rng);
      std::vector<Matrix> fam;
      for (int k = 0; k < 3; ++k) {
        Matrix r(2, 2);
        r << u(rng), u(rng), u(rng), u(rng);
        fam.push_back(floor * Matrix::Identity(2, 2) + r * r.transpose());
      }
      const auto gamma = UncertaintySet::family(fam, floor);
      Matrix a(2, 2), q(2, 2);
      a << -2 + 4 * u(rng), -2 + 4 * u(rng), 0, -2 + 4 * u(rng);
      a(1, 0) = a(0, 1);
      q << u(rng), u(rng), u(rng), u(rng);
      const Matrix b = a - q * q.transpose();
      const double lam = 5.0 * u(rng);
      check(g_value(gamma, b) - g_value(gamma, a));
      check(g_value(gamma, Matrix(a + b)) - g_value(gamma, a) - g_value(gamma, b));
      check(std::fabs(g_value(gamma, Matrix(lam * a)) - lam * g_value(gamma, a)));
      check(nondegeneracy_constant(gamma) * (a - b).trace() - (g_value(gamma, a) - g_value(gamma, b)));
    }
  }
  CriterionResult r{1, "G-function axioms", violations == 0, static_cast<double>(violations), 0.0, {}};
  r.detail = std::to_string(kSamples) + " samples x 4 axioms; worst slack " + fmt(worst);
  return r;
}

// 2. Closed forms for convex and concave payoffs.
inline CriterionResult heat_closed_forms(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(1.0);
  const double tol = 1e-3 * opt.tolerance_scale;
  struct Case {
    const char* id;
    const char* payoff;
    double exact;
  };
  const Case cases[] = {{"x^2", "x*x", 1.0}, {"-x^2", "-x*x", -0.25}, {"|x|", "abs(x)", std::sqrt(2.0 / std::numbers::pi)}};
  io::Csv csv({"payoff_id", "computed", "closed_form", "abs_err"});
  double worst = 0.0;
  for (const auto& c : cases) {
    const double v = g_expect(gamma, expr::parse(c.payoff), 1.0);
    worst = std::max(worst, std::fabs(v - c.exact));
    csv.row(c.id, v, c.exact, std::fabs(v - c.exact));
  }
  run.files.push_back({"heat_closed_forms.csv", csv.str()});
  CriterionResult r{2, "G-heat closed forms", worst <= tol, worst, tol, {}};
  r.detail = "max |g_expect - closed form| over x^2, -x^2, |x|";
  return r;
}

// 3. Lattice oracle against the PDE.
inline CriterionResult oracle_agreement(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(1.0);
  const double tol = 2e-2 * opt.tolerance_scale;
  const double linear_tol = 1e-12 * opt.tolerance_scale;
  const auto corpus = payoffs({{"x2", "x*x"},
                               {"neg_x2", "-x*x"},
                               {"abs", "abs(x)"},
                               {"call", "max(x,0)"},
                               {"put_short", "min(x,0)"},
                               {"sin", "sin(x)"},
                               {"cos", "cos(x)"},
                               {"lin", "x"},
                               {"affine", "3*x+1"},
                               {"const", "2"}});
  const auto report = oracle_vs_pde(gamma, corpus, 10, 1.0, heat_grid(gamma, 1.0), tol, opt.threads);
  io::Csv csv({"payoff_id", "oracle", "pde", "abs_diff"});
  double worst = 0.0, worst_linear = 0.0;
  for (const auto& row : report.rows) {
    csv.row(row.payoff_id, row.oracle, row.pde, row.abs_diff);
    const bool linear = row.payoff_id == "lin" || row.payoff_id == "affine" || row.payoff_id == "const";
    (linear ? worst_linear : worst) = std::max(linear ? worst_linear : worst, row.abs_diff);
  }
  run.files.push_back({"oracle_report.csv", csv.str()});
  CriterionResult r{3, "lattice oracle vs PDE", worst <= tol && worst_linear <= linear_tol, worst, tol, {}};
  r.detail = "10 payoffs, N=10; linear payoffs max diff " + fmt(worst_linear) + " (limit " + fmt(linear_tol) + ")";
  return r;
}

inline std::vector<NamedPayoff> translation_corpus() {
  return payoffs({{"x", "x"},
                  {"x2", "x*x"},
                  {"neg_x2", "-x*x"},
                  {"abs", "abs(x)"},
                  {"sin", "sin(x)"},
                  {"cos", "cos(x)"},
                  {"call", "max(x-0.5,0)"},
                  {"put", "max(-x-0.5,0)"},
                  {"affine", "2*x+1"},
                  {"bump", "exp(-x*x)"}});
}

// 4. Reductions of the backward solver.
inline CriterionResult bsde_reductions(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(1.0);
  GBsdeProblem p;
  p.forward = ForwardSpec::parse("0", "0", "1");
  p.generator = GeneratorSpec::parse("0", "0");
  p.terminal = expr::parse("x*x");
  p.gamma = gamma;
  const Grid1D grid = heat_grid(gamma, 1.0, 0.0, 401);

  GBsdeOptions gopt;
  gopt.store_z = false;
  const auto bsde = solve_gbsde(p, 0.0, grid, gopt);
  const auto heat = solve_gheat(gamma, p.terminal, 1.0, grid);
  long mismatched = 0;
  for (int k = 0; k <= grid.nt; ++k)
    for (int i = 0; i < grid.nx; ++i)
      if (bsde.field.at(grid.nt - k, i) != heat.at(k, i)) ++mismatched;

  p.generator = GeneratorSpec::parse("-0.1*y", "0");
  p.terminal = Expr::constant(1.0);
  const double discount = solve_gbsde(p, 0.0, gopt).y0;
  const double discount_err = std::fabs(discount - std::exp(-0.1));

  CrosscheckOptions co;
  co.horizon = 1.0;
  co.tolerance = 1e-8 * opt.tolerance_scale;
  co.threads = opt.threads;
  const auto shift = crosscheck_expectation(GeneratorSpec::parse("abs(z)", "0.5*z"), gamma, Predicate::translation,
                                            translation_corpus(), co);
  double shift_err = 0.0;
  for (const auto& row : shift.rows) shift_err = std::max(shift_err, row.violation);

  io::Csv csv({"check", "value", "limit"});
  csv.row("mismatched_nodes", static_cast<long>(mismatched), 0L);
  csv.row("discount_abs_err", discount_err, 1e-3 * opt.tolerance_scale);
  csv.row("translation_max_err", shift_err, co.tolerance);
  run.files.push_back({"bsde_reductions.csv", csv.str()});

  const bool ok = mismatched == 0 && discount_err <= 1e-3 * opt.tolerance_scale && shift.direction ==
                  CrosscheckReport::Direction::forward && shift.consistent;
  CriterionResult r{4, "G-BSDE reductions", ok, discount_err, 1e-3 * opt.tolerance_scale, {}};
  r.detail = std::to_string(mismatched) + " nodes differ from G-heat; y0 = " + fmt(discount) + "; translation err " +
             fmt(shift_err) + " over " + std::to_string(shift.rows.size()) + " shifts";
  return r;
}

inline std::vector<ReprCase> repr_suite() {
  auto mk = [](const char* id, const char* b, const char* h, const char* s, const char* f, const char* g,
               UncertaintySet gamma, ReprPoint pt) {
    ReprCase c;
    c.id = id;
    c.forward = ForwardSpec::parse(b, h, s);
    c.generator = GeneratorSpec::parse(f, g);
    c.gamma = gamma;
    c.point = pt;
    return c;
  };
  const auto gamma = pair_gamma(1.0);
  return {
      mk("pure_drift", "0.3+0.2*sin(x)", "0", "1", "0", "0", gamma, {0, 0, 0, 2, {}}),
      mk("pure_qv", "0", "1+0.5*sin(x)", "1", "0", "0", gamma, {0, 0, 0, 1, {}}),
      mk("coupled_fg", "0", "0", "1", "y+z", "0.5*z", gamma, {0, 0, 0, 1, {}}),
      mk("time_dependent_f", "0", "0", "1+0.25*cos(x)", "sin(t)+z", "0", gamma, {0.3, 0, 0, 1, {}}),
      mk("degenerate_gamma", "0", "0.5*x", "1", "0.5*y", "z", UncertaintySet::interval(0.5, 0.5), {0, 0, 1, 1, {}}),
      mk("negative_p", "0", "0", "1", "y+z", "0.5*z", gamma, {0, 0, 0, -1, {}}),
  };
}

// 5. Small-time slope against the generator formula.
inline CriterionResult representation(const Options& opt, SuiteRun& run) {
  io::Csv slopes({"case_id", "eps", "D_eps"});
  io::Csv summary({"case_id", "fitted_limit", "rhs", "abs_err", "limit", "decay_exponent", "passed"});
  int failures = 0;
  double worst_ratio = 0.0;
  SlopeOptions so;
  so.threads = opt.threads;
  for (const auto& c : repr_suite()) {
    const auto est = slope_estimate(c, so);
    const auto diag = convergence_diagnostics(est);
    const double limit = std::max(0.02 * std::fabs(est.rhs), 5e-3) * opt.tolerance_scale;
    const bool ok = est.abs_err <= limit && diag.rate_consistent;
    if (!ok) ++failures;
    worst_ratio = std::max(worst_ratio, limit > 0 ? est.abs_err / limit : std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < est.eps.size(); ++i) slopes.row(c.id, est.eps[i], est.d_eps[i]);
    summary.row(c.id, est.fitted_limit, est.rhs, est.abs_err, limit, diag.exponent_label(), ok ? "yes" : "no");
  }
  run.files.push_back({"repr_slopes.csv", slopes.str()});
  run.files.push_back({"repr_summary.csv", summary.str()});
  CriterionResult r{5, "representation", failures == 0, worst_ratio, 1.0, {}};
  r.detail = "6 cases; worst abs_err / limit = " + fmt(worst_ratio) + "; decay exponents in [0.4, 1.1] or exact";
  return r;
}

inline GeneratorSpec pair_first() { return GeneratorSpec::parse("10*abs(z)", "abs(z)"); }
inline GeneratorSpec pair_second() { return GeneratorSpec::parse("abs(z)", "2*abs(z)"); }

// 6. Ordering of solutions when the generator gap is non-positive.
inline CriterionResult comparison(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(1.0);
  GBsdeProblem p1, p2;
  p1.forward = p2.forward = ForwardSpec::parse("0", "0", "1");
  p1.generator = pair_first();
  p2.generator = pair_second();
  p1.gamma = p2.gamma = gamma;
  const auto l1 = generator_lipschitz(p1), l2 = generator_lipschitz(p2);
  const GeneratorLipschitz lip{std::max(l1.f, l2.f), std::max(l1.g, l2.g)};
  const Grid1D grid = gbsde_grid(p1, 0.0, kDefaultBsdeNx, kMaxCflSafety, &lip);
  GBsdeOptions gopt;
  gopt.threads = opt.threads;
  const auto rep = compare_solutions(
      p1, p2, payoffs({{"x", "x"}, {"x2", "x*x"}, {"abs", "abs(x)"}, {"sin", "sin(x)"}}), 0.0, grid, gopt);
  io::Csv csv({"payoff_id", "violations", "nodes_checked", "tau", "worst_gap", "y0_first", "y0_second"});
  long nodes = 0;
  for (const auto& row : rep.rows) {
    csv.row(row.payoff_id, row.violations, row.nodes_checked, row.tau, row.worst_gap, row.y0_first,
            row.y0_second);
    nodes += row.nodes_checked;
  }
  run.files.push_back({"comparison.csv", csv.str()});
  const double gap_max = check_converse_gap(pair_first(), pair_second(), gamma, PredicateGrid::for_horizon(1.0))
                             .worst_violation;
  CriterionResult r{6, "comparison", rep.total_violations() == 0 && nodes > 0 && gap_max <= kPredicateTolerance,
                    static_cast<double>(rep.total_violations()), 0.0, {}};
  r.detail = std::to_string(nodes) + " interior nodes over 4 payoffs; generator gap max " + fmt(gap_max);
  return r;
}

// 7. Converse comparison: a positive gap yields a witness with E2 > E1.
inline CriterionResult converse(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(16.0);
  const double gap = converse_gap(pair_first(), pair_second(), gamma, 0.0, 0.0, 1.0);
  CrosscheckOptions co;
  co.witness_point = PredicatePoint{0.0, 0.0, 0.0, 1.0, 1.0, 1.0};
  co.witness_rel_tol = 0.05 * opt.tolerance_scale;
  co.threads = opt.threads;
  const auto rep = crosscheck_comparison(pair_first(), pair_second(), gamma,
                                         payoffs({{"x", "x"}, {"x2", "x*x"}}), co);
  io::Csv csv({"leg", "generator", "y", "p", "weight", "predicted_slope", "measured_slope"});
  for (std::size_t i = 0; i < rep.legs.size(); ++i) {
    const auto& l = rep.legs[i];
    csv.row(static_cast<long>(i), static_cast<long>(l.generator + 1), l.y, l.p, l.weight, l.predicted_slope,
            l.measured_slope);
  }
  run.files.push_back({"converse_witness.csv", csv.str()});
  const double rel = std::fabs(rep.measured_gap - 7.0) / 7.0;
  const bool ok = gap == 7.0 && rep.direction == CrosscheckReport::Direction::converse && rep.consistent &&
                  rel <= 0.05 * opt.tolerance_scale && rep.small_eps_gap > 0.0;
  CriterionResult r{7, "converse comparison", ok, rel, 0.05 * opt.tolerance_scale, {}};
  r.detail = "gap(z=1) = " + fmt(gap) + "; slope2 - slope1 = " + fmt(rep.measured_gap);
  return r;
}

// 8. Generator identities and their solution-level counterparts.
inline CriterionResult generator_properties(const Options& opt, SuiteRun& run) {
  const auto gamma = pair_gamma(1.0);
  const auto corpus = payoffs(
      {{"x", "x"}, {"x2", "x*x"}, {"abs", "abs(x)"}, {"sin", "sin(x)"}, {"call", "max(x-0.5,0)"}});
  struct Case {
    Predicate pred;
    const char* f;
    const char* g;
    bool expect_holds;
  };
  const Case cases[] = {
      {Predicate::translation, "z", "abs(z)", true}, {Predicate::translation, "y", "0", false},
      {Predicate::subadd, "abs(z)", "0", true},      {Predicate::subadd, "-abs(z)", "0", false},
      {Predicate::convex, "max(z,0)", "0", true},    {Predicate::convex, "min(z,0)", "0", false},
      {Predicate::poshom, "z", "abs(z)", true},      {Predicate::poshom, "z*z", "0", false},
  };
  CrosscheckOptions co;
  co.tolerance = 1e-6 * opt.tolerance_scale;
  co.witness_rel_tol = 0.05 * opt.tolerance_scale;
  co.threads = opt.threads;
  io::Csv csv({"predicate", "f", "g", "verdict", "worst_violation", "direction", "consistent", "detail"});
  int failures = 0;
  for (const auto& c : cases) {
    const auto rep = crosscheck_expectation(GeneratorSpec::parse(c.f, c.g), gamma, c.pred, corpus, co);
    const bool ok = rep.predicate_report.holds == c.expect_holds && rep.consistent;
    if (!ok) ++failures;
    csv.row(predicate_name(c.pred), c.f, c.g, rep.predicate_report.verdict(), rep.predicate_report.worst_violation,
            rep.direction_name(), rep.consistent ? "yes" : "no", rep.detail);
  }

  // Classical case: f = -s g0, g = g0 satisfies the translation identity.
  const char* g0_corpus[] = {"y+z", "sin(y)*z", "abs(z)-y", "max(y,z)", "0.5*y+cos(z)", "exp(0.1*y)-z"};
  int family_failures = 0;
  for (double s : {1.0, 0.5}) {
    const auto classical = UncertaintySet::interval(s, s);
    for (const char* g0 : g0_corpus) {
      const Expr ge = expr::parse(g0);
      const auto gen = GeneratorSpec::scalar(Expr::constant(-s) * ge, ge);
      const auto rep = check_translation(gen, classical, PredicateGrid::for_horizon(1.0));
      if (!rep.holds) ++family_failures;
      csv.row("translation-family", io::fmt(-s) + "*g0", g0, rep.verdict(), rep.worst_violation, "-", "-", "-");
    }
  }
  run.files.push_back({"predicates.csv", csv.str()});
  CriterionResult r{8, "generator property suite", failures == 0 && family_failures == 0,
                    static_cast<double>(failures + family_failures), 0.0, {}};
  r.detail = "8 generator cases, " + std::to_string(std::size(g0_corpus) * 2) + " classical-family generators";
  return r;
}

template <class Fn>
void timed(SuiteRun& run, const Reporter& report, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  CriterionResult r;
  try {
    r = fn();
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.results.push_back(r);
  if (report) report(r);
}

}  // namespace detail

/// Runs criteria 1 to 8 and collects their data files.
inline SuiteRun run_criteria(const Options& opt, const Reporter& report = {}) {
  SuiteRun run;
  auto wrap = [&](int id, const char* name, auto fn) {
    detail::timed(run, report, [&] {
      CriterionResult r = fn();
      r.id = id;
      r.name = name;
      return r;
    });
    // Errors leave id and name unset; fill them in.
    run.results.back().id = id;
    run.results.back().name = name;
  };
  wrap(1, "G-function axioms", [&] { return detail::g_axioms(opt); });
  wrap(2, "G-heat closed forms", [&] { return detail::heat_closed_forms(opt, run); });
  wrap(3, "lattice oracle vs PDE", [&] { return detail::oracle_agreement(opt, run); });
  wrap(4, "G-BSDE reductions", [&] { return detail::bsde_reductions(opt, run); });
  wrap(5, "representation", [&] { return detail::representation(opt, run); });
  wrap(6, "comparison", [&] { return detail::comparison(opt, run); });
  wrap(7, "converse comparison", [&] { return detail::converse(opt, run); });
  wrap(8, "generator property suite", [&] { return detail::generator_properties(opt, run); });
  return run;
}

inline std::string results_csv(const std::vector<CriterionResult>& results) {
  io::Csv csv({"criterion", "name", "passed", "measured", "threshold", "detail"});
  for (const auto& r : results)
    csv.row(static_cast<long>(r.id), r.name, r.passed ? "pass" : "fail", r.measured, r.threshold, r.detail);
  return csv.str();
}

/// Full suite including the determinism re-run; writes every data file, the
/// pass/fail table and a manifest to `out`.
inline SuiteRun run_suite(const Options& opt, const std::filesystem::path& out, const Reporter& report = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  SuiteRun run = run_criteria(opt, report);

  if (opt.check_determinism) {
    const auto t1 = std::chrono::steady_clock::now();
    const SuiteRun again = run_criteria(opt);
    const std::string a = run.digest();
    const std::string b = again.digest();
    CriterionResult r{9, "determinism", a == b, a == b ? 0.0 : 1.0, 0.0, {}};
    r.detail = "digest " + a.substr(0, 16) + (a == b ? " reproduced" : " vs " + b.substr(0, 16));
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t1).count();
    run.results.push_back(r);
    if (report) report(r);
  }

  io::OutputDir dir(out);
  for (const auto& f : run.files) dir.write(f.name, f.content);
  dir.write("acceptance.csv", results_csv(run.results));
  io::RunManifest m;
  m.command = "acceptance";
  m.config_hash = io::sha256_hex("acceptance:" + io::fmt(opt.tolerance_scale));
  m.seed = opt.seed;
  m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  dir.finish(m);
  return run;
}

inline std::string format_line(const CriterionResult& r) {
  char head[96];
  std::snprintf(head, sizeof head, "[%s] criterion %d: %-26s", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str());
  char tail[64];
  std::snprintf(tail, sizeof tail, " (%.2fs)", r.seconds);
  return std::string(head) + " measured=" + io::fmt(r.measured) + " threshold=" + io::fmt(r.threshold) + "  " +
         r.detail + tail;
}

}  // namespace gxlab::acceptance
