#include <catch2/catch_amalgamated.hpp>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <numbers>

#include "gxlab/gheat.hpp"

using namespace gxlab;
using Catch::Approx;

namespace {

// Classical expectation E[phi(x + sqrt(v t) N)] by adaptive Gauss-Kronrod,
// truncated at 40 standard deviations; the oracle for payoffs whose G-expectation reduces to a
// single volatility.
template <class Phi>
double gaussian_expect(Phi phi, double variance, double t, double x = 0.0) {
  const double s = std::sqrt(variance * t);
  auto integrand = [&](double z) { return phi(x + s * z) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, -40.0, 40.0, 15, 1e-13);
}

const auto kGamma = UncertaintySet::interval(0.25, 1.0);

}  // namespace

TEST_CASE("linear and constant data are preserved exactly", "[gheat]") {
  const Grid1D grid = heat_grid(kGamma, 1.0);
  const auto field = solve_gheat(kGamma, expr::parse("x"), 1.0, grid);
  for (int i = 0; i < grid.nx; ++i) CHECK(field.at(grid.nt, i) == grid.x(i));
  CHECK(g_expect(kGamma, expr::parse("2.5"), 1.0) == 2.5);
  CHECK(g_expect(kGamma, expr::parse("3*x - 1"), 0.7) == -1.0);
}

TEST_CASE("convex and concave payoffs reduce to the extreme volatility", "[gheat]") {
  CHECK(g_expect(kGamma, expr::parse("x*x"), 1.0) == Approx(1.0).margin(1e-3));
  CHECK(g_expect(kGamma, expr::parse("-x*x"), 1.0) == Approx(-0.25).margin(1e-3));

  const double abs_oracle = gaussian_expect([](double x) { return std::fabs(x); }, 1.0, 1.0);
  CHECK(abs_oracle == Approx(std::sqrt(2.0 / std::numbers::pi)).epsilon(1e-10));
  CHECK(g_expect(kGamma, expr::parse("abs(x)"), 1.0) == Approx(abs_oracle).margin(1e-3));

  const double call = gaussian_expect([](double x) { return std::max(x - 0.3, 0.0); }, 1.0, 0.5);
  CHECK(g_expect(kGamma, expr::parse("max(x-0.3,0)"), 0.5) == Approx(call).margin(1e-3));

  const double short_put = gaussian_expect([](double x) { return std::min(x + 0.2, 0.0); }, 0.25, 2.0);
  CHECK(g_expect(kGamma, expr::parse("min(x+0.2,0)"), 2.0) == Approx(short_put).margin(1e-3));

  const double expo = gaussian_expect([](double x) { return std::exp(0.5 * x); }, 1.0, 1.0);
  CHECK(expo == Approx(std::exp(0.125)).epsilon(1e-10));
  CHECK(g_expect(kGamma, expr::parse("exp(0.5*x)"), 1.0) == Approx(expo).epsilon(1e-3));
}

TEST_CASE("classical case: odd moments vanish", "[gheat]") {
  const auto classical = UncertaintySet::interval(1.0, 1.0);
  CHECK(g_expect(classical, expr::parse("x*x*x"), 1.0) == Approx(0.0).margin(1e-2));
  CHECK(g_expect(classical, expr::parse("x*x*x*x"), 1.0) == Approx(3.0).margin(1e-2));
}

TEST_CASE("G-expectation dominates every constant-volatility expectation", "[gheat][property]") {
  for (const char* src : {"sin(x)", "cos(2*x)", "max(abs(x)-1,0)-0.5*abs(x)", "x*x*x"}) {
    const Expr e = expr::parse(src);
    const double g = g_expect(kGamma, e, 1.0);
    for (double v : {0.25, 0.5, 0.75, 1.0}) {
      const double classical = gaussian_expect([&](double x) { return e.evaluate(expr::Bindings{}.set(expr::Var::x, x)); }, v, 1.0);
      INFO(src << " at variance " << v);
      CHECK(g >= classical - 1e-3);
    }
  }
}

TEST_CASE("sublinearity at the solution level", "[gheat][property]") {
  const Grid1D grid = heat_grid(kGamma, 1.0, 0.0, 401);
  const Expr a = expr::parse("sin(x)");
  const Expr b = expr::parse("-x*x/4 + cos(x)");
  const double ea = g_expect(kGamma, a, 1.0, grid);
  const double eb = g_expect(kGamma, b, 1.0, grid);
  CHECK(g_expect(kGamma, a + b, 1.0, grid) <= ea + eb + 1e-12);
  CHECK(g_expect(kGamma, 3.0 * a, 1.0, grid) == Approx(3.0 * ea).margin(1e-12));
  CHECK(g_expect(kGamma, a + 2.0, 1.0, grid) == Approx(ea + 2.0).margin(1e-12));
  // -E[-X] <= E[X]
  CHECK(-g_expect(kGamma, -a, 1.0, grid) <= ea + 1e-12);
}

TEST_CASE("the scheme is monotone", "[gheat][property]") {
  const Grid1D grid = heat_grid(kGamma, 0.5, 0.0, 257);
  const auto lo = solve_gheat(kGamma, expr::parse("min(sin(3*x), 0.5)"), 0.5, grid);
  const auto hi = solve_gheat(kGamma, expr::parse("sin(3*x)"), 0.5, grid);
  for (int k = 0; k <= grid.nt; ++k)
    for (int i = 0; i < grid.nx; ++i) REQUIRE(lo.at(k, i) <= hi.at(k, i));
}

TEST_CASE("CFL and grid checks", "[gheat]") {
  Grid1D grid = heat_grid(kGamma, 1.0, 0.0, 101);
  grid.nt /= 2;
  grid.dt *= 2;
  CHECK_THROWS_AS(solve_gheat(kGamma, expr::parse("x*x"), 1.0, grid), CflViolation);
  CHECK_THROWS_WITH(solve_gheat(kGamma, expr::parse("x*x"), 1.0, grid),
                    Catch::Matchers::ContainsSubstring("CflViolation"));
  CHECK_THROWS_AS(solve_gheat(kGamma, expr::parse("x*x"), 2.0, heat_grid(kGamma, 1.0)), InputError);

  const Grid1D d = heat_grid(kGamma, 1.0);
  CHECK(d.dx() == std::exp2(std::round(std::log2(d.dx()))));
  CHECK(d.x_min <= -8.0);
  CHECK(d.x_max >= 8.0);
  CHECK(d.dt <= 0.5 * d.dx() * d.dx() / kGamma.sigma2_max() * (1 + 1e-12));
}

TEST_CASE("conditional cylinder payoffs", "[gheat][cylinder]") {
  const auto mart = conditional_cylinder(kGamma, expr::parse("y"), {0.5, 1.0});
  for (std::size_t i = 0; i < mart.x1.size(); i += 37) CHECK(mart.psi[i] == Approx(mart.x1[i]).margin(1e-12));
  CHECK(mart.value == Approx(0.0).margin(1e-12));

  const auto incr = conditional_cylinder(kGamma, expr::parse("(y-x)*(y-x)"), {0.5, 1.0});
  for (std::size_t i = 0; i < incr.x1.size(); i += 29) CHECK(incr.psi[i] == Approx(0.5).margin(1e-3));

  const auto sum = conditional_cylinder(kGamma, expr::parse("x*x + (y-x)*(y-x)"), {0.5, 1.0});
  CHECK(sum.value == Approx(1.0).margin(2e-3));

  // A single time is the plain G-expectation.
  const auto single = conditional_cylinder(kGamma, expr::parse("x*x"), {1.0});
  CHECK(single.value == Approx(1.0).margin(1e-3));

  CHECK_THROWS_AS(conditional_cylinder(kGamma, expr::parse("x"), {1.0, 0.5}), InputError);
  CHECK_THROWS_AS(conditional_cylinder(kGamma, expr::parse("x"), {0.1, 0.2, 0.3}), UnsupportedArity);
}
