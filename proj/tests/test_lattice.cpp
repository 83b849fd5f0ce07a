#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gxlab/lattice.hpp"

using namespace gxlab;
using Catch::Approx;

namespace {

const auto kGamma = UncertaintySet::interval(0.25, 1.0);

// One-step value by hand: max over variances of the two-point mean.
double one_step(double x0, double horizon, double (*phi)(double)) {
  double best = -1e300;
  for (double v : {0.25, 1.0}) {
    const double s = std::sqrt(v * horizon);
    best = std::max(best, 0.5 * (phi(x0 + s) + phi(x0 - s)));
  }
  return best;
}

}  // namespace

TEST_CASE("two-step lattice values", "[lattice]") {
  const auto l = VolLattice::endpoints(kGamma, 2, 1.0);
  CHECK(l.dt() == 0.5);
  CHECK(oracle_expect(l, expr::parse("x*x")) == Approx(1.0).margin(1e-12));
  CHECK(oracle_expect(l, expr::parse("x")) == Approx(0.0).margin(1e-12));
  CHECK(oracle_expect(l, expr::parse("-x*x")) == Approx(-0.25).margin(1e-12));
}

TEST_CASE("one-step lattice matches hand computation", "[lattice]") {
  const auto l = VolLattice::endpoints(kGamma, 1, 0.8);
  auto check = [&](const char* src, double (*phi)(double)) {
    INFO(src);
    CHECK(oracle_expect(l, expr::parse(src)) == Approx(one_step(0.0, 0.8, phi)).margin(1e-15));
  };
  check("abs(x)", [](double x) { return std::fabs(x); });
  check("sin(x)", [](double x) { return std::sin(x); });
  check("cos(x)", [](double x) { return std::cos(x); });
  check("max(x-0.5,0)", [](double x) { return std::max(x - 0.5, 0.0); });
}

TEST_CASE("quadratic variation payoffs", "[lattice]") {
  const auto l = VolLattice::endpoints(kGamma, 6, 1.5);
  // x^2 - <B> is a martingale under every volatility path.
  CHECK(oracle_expect(l, expr::parse("x*x - y")) == Approx(0.0).margin(1e-12));
  CHECK(oracle_expect(l, expr::parse("y")) == Approx(1.5).margin(1e-12));
  CHECK(oracle_expect(l, expr::parse("-y")) == Approx(-0.375).margin(1e-12));
  // Lambda form of the same payoff.
  CHECK(oracle_expect(l, [](double x, double qv) { return x * x - qv; }) == Approx(0.0).margin(1e-12));
}

TEST_CASE("constants are preserved", "[lattice]") {
  for (int n : {1, 4, 9}) CHECK(oracle_expect(VolLattice::endpoints(kGamma, n, 1.0), expr::parse("2.5")) == 2.5);
}

TEST_CASE("lattice against the PDE", "[lattice][oracle]") {
  const std::vector<NamedPayoff> payoffs{{"x2", expr::parse("x*x")},
                                         {"abs", expr::parse("abs(x)")},
                                         {"const", expr::parse("3")},
                                         {"lin", expr::parse("2*x-1")}};
  const auto rep = oracle_vs_pde(kGamma, payoffs, 10, 1.0, heat_grid(kGamma, 1.0), 2e-2);
  CHECK(rep.all_within());
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.rows[0].abs_diff <= 2e-2);
  CHECK(rep.rows[1].abs_diff <= 2e-2);
  CHECK(rep.rows[2].oracle == 3.0);
  CHECK(rep.rows[2].pde == 3.0);
  CHECK(rep.rows[3].abs_diff <= 1e-12);

  // A tight tolerance flags the curved payoffs.
  const auto strict = oracle_vs_pde(kGamma, payoffs, 10, 1.0, heat_grid(kGamma, 1.0), 1e-9);
  CHECK_FALSE(strict.all_within());
  CHECK(strict.rows[1].flagged);
  CHECK_FALSE(strict.rows[3].flagged);

  CHECK_THROWS_AS(oracle_vs_pde(kGamma, {{"qv", expr::parse("y")}}, 4, 1.0, heat_grid(kGamma, 1.0), 1e-2),
                  InputError);
}

TEST_CASE("lattice validation and budget", "[lattice]") {
  CHECK_THROWS_AS(VolLattice::endpoints(kGamma, 0, 1.0), InputError);
  CHECK_THROWS_AS(VolLattice::endpoints(kGamma, kMaxLatticeSteps + 1, 1.0), InputError);
  CHECK_THROWS_AS(VolLattice::endpoints(kGamma, 3, 0.0), InputError);
  VolLattice bad{3, 1.0, {2.0}};
  CHECK_THROWS_AS(bad.validate(kGamma), InputError);

  const auto l = VolLattice::endpoints(kGamma, 8, 1.0);
  CHECK(l.cost() == 8 * std::pow(4.0, 8));
  CHECK_THROWS_AS(oracle_expect(l, expr::parse("x"), 1000), BudgetExceeded);

  // Degenerate interval collapses to a single choice.
  CHECK(VolLattice::endpoints(UncertaintySet::interval(0.5, 0.5), 3, 1.0).vol_choices.size() == 1);
}
