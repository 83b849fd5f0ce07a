#pragma once

// Subcommand bodies for the gxlab tool. Each reads a JSON config, runs one
// experiment and writes CSV/JSON outputs plus a manifest into the output
// directory. Argument parsing lives in tools/gxlab.cpp.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "gxlab/acceptance.hpp"
#include "gxlab/config.hpp"
#include "gxlab/gbsde.hpp"
#include "gxlab/genprops.hpp"
#include "gxlab/gheat.hpp"
#include "gxlab/io.hpp"
#include "gxlab/lattice.hpp"
#include "gxlab/repr.hpp"

namespace gxlab::cli {

enum ExitCode : int { ok = 0, acceptance_failed = 1, config_error = 2, numeric_error = 3, usage = 64 };

struct Common {
  std::filesystem::path config;
  std::filesystem::path out = "gxlab_out";
  std::uint64_t seed = 0;
  int threads = 0;
  double tolerance_scale = 1.0;
};

namespace detail {

using config::json;
using config::Node;

class Run {
 public:
  Run(std::string command, const Common& c) : command_(std::move(command)), common_(c), dir_(c.out) {
    if (!c.config.empty()) {
      cfg_ = config::load(c.config);
      if (!cfg_.is_object()) throw ConfigError("/", "expected an object");
    }
  }

  Node root() const { return {cfg_, ""}; }
  io::OutputDir& dir() { return dir_; }

  void finish(const std::string& config_hash = {}) {
    io::RunManifest m;
    m.command = command_;
    m.config_hash = config_hash.empty() ? config::config_hash(cfg_) : config_hash;
    m.seed = common_.seed;
    m.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    dir_.finish(m);
  }

 private:
  std::string command_;
  Common common_;
  json cfg_ = json::object();
  io::OutputDir dir_;
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

/// Indices of `count` layers spread evenly over [0, last], endpoints included.
inline std::vector<int> sample_layers(int last, int count) {
  std::vector<int> out;
  if (count <= 1 || last == 0) return {0, last};
  for (int j = 0; j < count; ++j) {
    const int k = static_cast<int>(std::lround(static_cast<double>(j) * last / (count - 1)));
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  return out;
}

inline int output_layers(const Node& root) {
  const long n = root.integer_or("output_layers", 11);
  if (n < 2) throw ConfigError(root["output_layers"].at_path(), "must be >= 2");
  return static_cast<int>(n);
}

}  // namespace detail

/// heat: {"gamma", "payoff", "horizon", "x0", "grid", "output_layers"}.
inline int cmd_heat(const Common& c, std::ostream& log = std::cout) {
  detail::Run run("heat", c);
  const auto root = run.root();
  const auto gamma = config::parse_gamma(root["gamma"]);
  const Expr payoff = root["payoff"].expression();
  const double horizon = root.has("horizon") ? config::positive(root["horizon"]) : 1.0;
  const double x0 = root.number_or("x0", 0.0);
  const auto choice = config::parse_grid(root, horizon, kDefaultHeatNx);
  const Grid1D grid = choice.explicit_grid ? *choice.explicit_grid : heat_grid(gamma, horizon, x0, choice.nx_target);

  const auto field = solve_gheat(gamma, payoff, horizon, grid);
  io::Csv csv({"t", "x", "u"});
  for (int k : detail::sample_layers(grid.nt, detail::output_layers(root)))
    for (int i = 0; i < grid.nx; ++i) csv.row(field.times[k], grid.x(i), field.at(k, i));
  run.dir().write("u.csv", csv.str());
  run.finish();
  log << "u(T, x0) = " << io::fmt(field.interpolate(grid.nt, x0)) << "  (" << grid.nx << " x " << grid.nt + 1
      << " nodes)\n";
  return ok;
}

/// bsde: {"gamma", "forward", "generator", "terminal", "horizon", "start_time",
/// "x0", "grid", "scenarios", "output_layers"}.
inline int cmd_bsde(const Common& c, std::ostream& log = std::cout) {
  detail::Run run("bsde", c);
  const auto root = run.root();
  GBsdeProblem p;
  p.gamma = config::parse_gamma(root["gamma"]);
  p.forward = root.has("forward") ? config::parse_forward(root["forward"]) : ForwardSpec::parse("0", "0", "1");
  p.generator = root.has("generator") ? config::parse_generator(root["generator"]) : GeneratorSpec::parse("0", "0");
  p.terminal = root["terminal"].expression();
  p.horizon = root.has("horizon") ? config::positive(root["horizon"]) : 1.0;
  p.start_time = root.number_or("start_time", 0.0);
  try {
    p.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError("/", e.what());
  }
  const double x0 = root.number_or("x0", 0.0);

  GBsdeOptions opt;
  opt.seed = c.seed;
  opt.threads = c.threads;
  if (root.has("scenarios")) {
    const auto list = root["scenarios"];
    for (std::size_t i = 0; i < list.size(); ++i) opt.scenarios.push_back(config::parse_scenario(list[i]));
  } else {
    opt.scenarios.push_back(VolScenario::worst_case());
  }

  const auto choice = config::parse_grid(root, p.horizon, kDefaultBsdeNx);
  const Grid1D grid = choice.explicit_grid ? *choice.explicit_grid : gbsde_grid(p, x0, choice.nx_target);
  const auto sol = solve_gbsde(p, x0, grid, opt);

  io::Csv csv({"t", "x", "Y", "Z"});
  for (int k : detail::sample_layers(grid.nt, detail::output_layers(root)))
    for (int i = 0; i < grid.nx; ++i) csv.row(sol.field.times[k], grid.x(i), sol.field.at(k, i), sol.z_field.at(k, i));
  run.dir().write("bsde.csv", csv.str());

  io::Csv kcsv({"scenario_id", "t", "K"});
  for (const auto& path : sol.k_paths)
    for (std::size_t k = 0; k < path.times.size(); ++k) kcsv.row(path.scenario_id, path.times[k], path.k[k]);
  run.dir().write("k_report.csv", kcsv.str());
  run.finish();
  log << "Y0 = " << io::fmt(sol.y0) << "  (" << grid.nx << " x " << grid.nt + 1 << " nodes, L_f = "
      << io::fmt(sol.lipschitz.f) << ", L_g = " << io::fmt(sol.lipschitz.g) << ")\n";
  return ok;
}

/// repr: a single case {"id", "gamma", "forward", "generator", "point",
/// "eps_grid", "horizon"} plus optional "nx_per_eps".
inline int cmd_repr(const Common& c, std::ostream& log = std::cout) {
  detail::Run run("repr", c);
  const auto root = run.root();
  const ReprCase rc = config::parse_repr_case(root);
  SlopeOptions so;
  so.threads = c.threads;
  if (root.has("nx_per_eps")) {
    so.nx_per_eps = static_cast<int>(root["nx_per_eps"].integer());
    if (so.nx_per_eps < 16) throw ConfigError(root["nx_per_eps"].at_path(), "must be >= 16");
  }
  const auto est = slope_estimate(rc, so);
  const auto diag = convergence_diagnostics(est);

  io::Csv csv({"eps", "D_eps"});
  for (std::size_t i = 0; i < est.eps.size(); ++i) csv.row(est.eps[i], est.d_eps[i]);
  run.dir().write("slope.csv", csv.str());

  config::json s = {{"case_id", est.case_id},
                    {"fitted_limit", est.fitted_limit},
                    {"rhs", est.rhs},
                    {"abs_err", est.abs_err},
                    {"c_half", est.c_half},
                    {"c_one", est.c_one},
                    {"fit_residual", est.fit_residual},
                    {"decay_exponent", diag.exponent_label()},
                    {"rate_consistent", diag.rate_consistent}};
  run.dir().write("summary.json", s.dump(2) + "\n");
  run.finish();
  log << rc.id << ": D(0) = " << io::fmt(est.fitted_limit) << ", formula = " << io::fmt(est.rhs)
      << ", |diff| = " << io::fmt(est.abs_err) << ", decay " << diag.exponent_label() << "\n";
  return ok;
}

inline Predicate parse_predicate(const config::Node& n) {
  const std::string s = n.string();
  for (Predicate p : {Predicate::translation, Predicate::subadd, Predicate::convex, Predicate::poshom,
                      Predicate::converse_gap})
    if (s == predicate_name(p)) return p;
  throw ConfigError(n.at_path(), "unknown predicate '" + s + "'");
}

/// props: {"gamma", "generator", "predicates", "horizon"} for identities of one
/// generator, or {"gamma", "generators": [g1, g2]} for the converse gap.
inline int cmd_props(const Common& c, std::ostream& log = std::cout) {
  detail::Run run("props", c);
  const auto root = run.root();
  const auto gamma = config::parse_gamma(root["gamma"]);
  const double horizon = root.has("horizon") ? config::positive(root["horizon"]) : 1.0;
  const auto grid = PredicateGrid::for_horizon(horizon);

  std::vector<PredicateReport> reports;
  if (root.has("generator")) {
    const auto gen = config::parse_generator(root["generator"]);
    std::vector<Predicate> preds{Predicate::translation, Predicate::subadd, Predicate::convex, Predicate::poshom};
    if (root.has("predicates")) {
      preds.clear();
      const auto list = root["predicates"];
      for (std::size_t i = 0; i < list.size(); ++i) {
        const Predicate p = parse_predicate(list[i]);
        if (p == Predicate::converse_gap)
          throw ConfigError(list[i].at_path(), "converse-gap needs \"generators\": [first, second]");
        preds.push_back(p);
      }
    }
    for (Predicate p : preds) reports.push_back(check_predicate(p, gen, gamma, grid));
  }
  if (root.has("generators")) {
    const auto list = root["generators"];
    if (list.size() != 2) throw ConfigError(list.at_path(), "expected exactly two generators");
    reports.push_back(
        check_converse_gap(config::parse_generator(list[0]), config::parse_generator(list[1]), gamma, grid));
  }
  if (reports.empty()) throw ConfigError("/", "need \"generator\" or \"generators\"");

  io::Csv csv({"predicate", "point", "value", "verdict"});
  for (const auto& r : reports) {
    csv.row(predicate_name(r.predicate), r.witness ? r.witness->str() : "grid:" + r.sample_grid, r.worst_violation,
            r.verdict());
    log << predicate_name(r.predicate) << ": " << r.verdict() << " (worst " << io::fmt(r.worst_violation) << ")\n";
  }
  run.dir().write("predicates.csv", csv.str());
  run.finish();
  return ok;
}

/// oracle: {"gamma", "payoffs", "steps", "horizon", "tolerance", "grid"}.
inline int cmd_oracle(const Common& c, std::ostream& log = std::cout) {
  detail::Run run("oracle", c);
  const auto root = run.root();
  const auto gamma = config::parse_gamma(root["gamma"]);
  const auto payoffs = config::parse_payoffs(root["payoffs"]);
  const double horizon = root.has("horizon") ? config::positive(root["horizon"]) : 1.0;
  const long steps = root.integer_or("steps", 10);
  if (steps < 1 || steps > kMaxLatticeSteps)
    throw ConfigError(root["steps"].at_path(), "must be in [1, " + std::to_string(kMaxLatticeSteps) + "]");
  const double tol = (root.has("tolerance") ? config::positive(root["tolerance"]) : 2e-2) * c.tolerance_scale;
  const auto choice = config::parse_grid(root, horizon, kDefaultHeatNx);
  const Grid1D grid = choice.explicit_grid ? *choice.explicit_grid : heat_grid(gamma, horizon, 0.0, choice.nx_target);

  const auto report = oracle_vs_pde(gamma, payoffs, static_cast<int>(steps), horizon, grid, tol, c.threads);
  io::Csv csv({"payoff_id", "oracle", "pde", "abs_diff", "flagged"});
  long flagged = 0;
  for (const auto& r : report.rows) {
    csv.row(r.payoff_id, r.oracle, r.pde, r.abs_diff, r.flagged ? "yes" : "no");
    flagged += r.flagged;
  }
  run.dir().write("oracle_report.csv", csv.str());
  run.finish();
  log << report.rows.size() << " payoffs, " << flagged << " beyond tolerance " << io::fmt(tol) << "\n";
  return ok;
}

inline int cmd_acceptance(const Common& c, std::ostream& log = std::cout) {
  acceptance::Options opt;
  opt.tolerance_scale = c.tolerance_scale;
  opt.threads = c.threads;
  opt.seed = c.seed;
  const auto run = acceptance::run_suite(opt, c.out, [&](const acceptance::CriterionResult& r) {
    log << acceptance::format_line(r) << std::endl;
  });
  const bool passed = run.all_passed();
  log << (passed ? "all criteria passed" : "acceptance FAILED") << "; outputs in " << c.out.string() << "\n";
  return passed ? ok : acceptance_failed;
}

/// Maps the error hierarchy onto exit codes.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err = std::cerr) {
  try {
    return fn();
  } catch (const InputError& e) {  // ConfigError messages already lead with the JSON path
    err << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return numeric_error;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return numeric_error;
  }
}

}  // namespace gxlab::cli
