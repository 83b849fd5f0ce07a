#include <catch2/catch_amalgamated.hpp>

#include "gxlab/genprops.hpp"

using namespace gxlab;
using Catch::Approx;

namespace {

const auto kGamma = UncertaintySet::interval(0.25, 1.0);
const auto kWide = UncertaintySet::interval(0.25, 16.0);
const auto kGrid = PredicateGrid::for_horizon(1.0);

GeneratorSpec gen(const char* f, const char* g) { return GeneratorSpec::parse(f, g); }

std::vector<NamedPayoff> payoffs() {
  return {{"x", expr::parse("x")},
          {"x2", expr::parse("x*x")},
          {"abs", expr::parse("abs(x)")},
          {"sin", expr::parse("sin(x)")},
          {"call", expr::parse("max(x-0.5,0)")}};
}

}  // namespace

TEST_CASE("converse gap", "[genprops]") {
  const auto g1 = gen("10*abs(z)", "abs(z)");
  const auto g2 = gen("abs(z)", "2*abs(z)");
  CHECK(converse_gap(g1, g2, kGamma, 0, 0, 1) == -8.0);
  CHECK(converse_gap(g1, g1, kGamma, 0.3, 1.2, -0.7) == 0.0);
  CHECK(converse_gap(g1, g2, kWide, 0, 0, 1) == 7.0);

  CHECK(check_converse_gap(g1, g2, kGamma, kGrid).holds);
  const auto fails = check_converse_gap(g1, g2, kWide, kGrid);
  CHECK_FALSE(fails.holds);
  REQUIRE(fails.witness);
  // The gap 7|z| is largest at the edge of the z grid.
  CHECK(fails.worst_violation == 14.0);
  CHECK(std::fabs(fails.witness->z) == 2.0);
}

TEST_CASE("translation identity", "[genprops]") {
  const auto ok = check_translation(gen("z", "abs(z)"), kGamma, kGrid);
  CHECK(ok.holds);
  CHECK(ok.worst_violation == 0.0);

  const auto bad = check_translation(gen("y", "0"), kGamma, kGrid);
  CHECK_FALSE(bad.holds);
  REQUIRE(bad.witness);
  CHECK(bad.worst_violation >= std::fabs(bad.witness->y - bad.witness->y2));
  CHECK(bad.worst_violation == 4.0);

  // Classical case: f = -g0, g = g0 with 2G(1) = 1.
  const auto classical = UncertaintySet::interval(1.0, 1.0);
  CHECK(check_translation(gen("-(y+z)", "y+z"), classical, kGrid).holds);
  CHECK_FALSE(check_translation(gen("-(y+z)", "y+z"), kGamma, kGrid).holds);
}

TEST_CASE("sub-additivity", "[genprops]") {
  CHECK(check_subadd(gen("abs(z)", "0"), kGamma, kGrid).holds);
  CHECK(check_subadd(gen("0", "abs(z)"), kGamma, kGrid).holds);
  const auto bad = check_subadd(gen("-abs(z)", "0"), kGamma, kGrid);
  CHECK_FALSE(bad.holds);
  CHECK(subadd_lhs(gen("-abs(z)", "0"), kGamma, 0, 0, 0, 1, -1) == 2.0);
  // Largest on the grid: z = 2, z' = -2.
  CHECK(bad.worst_violation == 4.0);
}

TEST_CASE("convexity", "[genprops]") {
  CHECK(check_convex(gen("max(z,0)", "0"), kGamma, kGrid).holds);
  for (double lam : {0.0, 1.0})
    CHECK(convex_lhs(gen("sin(y)*z*z", "cos(z)"), kGamma, 0.1, 0.4, -1.3, 0.7, 2.0, lam) == Approx(0.0).margin(1e-15));
  const auto bad = check_convex(gen("min(z,0)", "0"), kGamma, kGrid);
  CHECK_FALSE(bad.holds);
  CHECK(convex_lhs(gen("min(z,0)", "0"), kGamma, 0, 0, 0, 1, -1, 0.5) == 0.5);
}

TEST_CASE("positive homogeneity", "[genprops]") {
  const auto ok = check_poshom(gen("z", "abs(z)"), kGamma, kGrid);
  CHECK(ok.holds);
  CHECK(ok.worst_violation == 0.0);
  CHECK(poshom_residual(gen("exp(y)*z*z", "sin(z)"), kGamma, 0, 0.5, 0.7, 1.0) == 0.0);
  CHECK(poshom_residual(gen("z*z", "0"), kGamma, 0, 0, 1, 2) == 2.0);
  CHECK_FALSE(check_poshom(gen("z*z", "0"), kGamma, kGrid).holds);
}

TEST_CASE("predicate dispatch", "[genprops]") {
  CHECK(check_predicate(Predicate::subadd, gen("abs(z)", "0"), kGamma, kGrid).predicate == Predicate::subadd);
  CHECK_THROWS_AS(check_predicate(Predicate::converse_gap, gen("0", "0"), kGamma, kGrid), InputError);
  CHECK(std::string(predicate_name(Predicate::converse_gap)) == "converse-gap");
}

TEST_CASE("forward consequences on solutions", "[genprops][solver]") {
  CrosscheckOptions opt;
  opt.horizon = 0.5;

  SECTION("terminal translation") {
    const auto rep = crosscheck_expectation(gen("abs(z)", "0.5*z"), kGamma, Predicate::translation, payoffs(), opt);
    CHECK(rep.direction == CrosscheckReport::Direction::forward);
    CHECK(rep.consistent);
    CHECK(rep.rows.size() == 15);
    for (const auto& r : rep.rows) CHECK(r.violation <= 1e-6);
  }
  SECTION("sub-additivity") {
    const auto rep = crosscheck_expectation(gen("abs(z)", "0"), kGamma, Predicate::subadd, payoffs(), opt);
    CHECK(rep.consistent);
  }
}

TEST_CASE("converse witness exhibits reversed ordering", "[genprops][solver]") {
  CrosscheckOptions opt;
  opt.witness_point = PredicatePoint{0, 0, 0, 1, 1, 1};
  const auto rep =
      crosscheck_comparison(gen("10*abs(z)", "abs(z)"), gen("abs(z)", "2*abs(z)"), kWide, payoffs(), opt);
  CHECK(rep.direction == CrosscheckReport::Direction::converse);
  CHECK(rep.consistent);
  CHECK(rep.predicted_gap == Approx(7.0));
  CHECK(rep.measured_gap == Approx(7.0).epsilon(0.05));
  CHECK(rep.small_eps_gap > 0.0);

  const auto forward =
      crosscheck_comparison(gen("10*abs(z)", "abs(z)"), gen("abs(z)", "2*abs(z)"), kGamma, payoffs(), opt);
  CHECK(forward.direction == CrosscheckReport::Direction::forward);
  CHECK(forward.consistent);
}

TEST_CASE("violated identities yield witnesses", "[genprops][solver]") {
  CrosscheckOptions opt;
  const auto rep = crosscheck_expectation(gen("y", "0"), kGamma, Predicate::translation, payoffs(), opt);
  CHECK(rep.direction == CrosscheckReport::Direction::converse);
  CHECK(rep.consistent);
  CHECK(std::fabs(rep.measured_gap - rep.predicted_gap) <= 0.05 * std::fabs(rep.predicted_gap));
}
