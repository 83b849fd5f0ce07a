#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "gxlab/repr.hpp"

using namespace gxlab;
using Catch::Approx;

namespace {

ReprCase make_case(const char* b, const char* h, const char* sigma, const char* f, const char* g, ReprPoint pt,
                   UncertaintySet gamma = UncertaintySet::interval(0.25, 1.0)) {
  ReprCase c;
  c.id = "test";
  c.forward = ForwardSpec::parse(b, h, sigma);
  c.generator = GeneratorSpec::parse(f, g);
  c.gamma = gamma;
  c.point = pt;
  return c;
}

}  // namespace

TEST_CASE("generator formula at a point", "[repr]") {
  CHECK(rhs_formula(make_case("0", "0", "1", "y+z", "0.5*z", {0, 0, 0, 1, {}})) == 1.5);
  CHECK(rhs_formula(make_case("0.3", "0", "1", "0", "0", {0, 0, 0, 2, {}})) == Approx(0.6));
  CHECK(rhs_formula(make_case("0", "1", "1", "0", "0", {0, 0, 0, 1, {}})) == 1.0);
  // Negative argument inside G picks the small variance.
  CHECK(rhs_formula(make_case("0", "1", "1", "0", "0", {0, 0, 0, -1, {}})) == -0.25);
  // sigma enters through z = sigma p.
  CHECK(rhs_formula(make_case("0", "0", "2", "z", "0", {0, 0, 0, 1.5, {}})) == 3.0);
}

TEST_CASE("least-squares fit recovers synthetic coefficients", "[repr][fit]") {
  SlopeEstimate est;
  est.eps = default_eps_grid();
  for (double e : est.eps) est.d_eps.push_back(1.5 + 0.3 * std::sqrt(e) - 0.2 * e);
  fit_slope(est);
  CHECK(est.fitted_limit == Approx(1.5).margin(1e-12));
  CHECK(est.c_half == Approx(0.3).margin(1e-11));
  CHECK(est.c_one == Approx(-0.2).margin(1e-11));
  CHECK(est.fit_residual <= 1e-13);

  SlopeEstimate clustered;
  clustered.eps = {0.1, 0.1 * (1 - 1e-12), 0.1 * (1 - 2e-12), 0.1 * (1 - 3e-12)};
  clustered.d_eps = {1, 1, 1, 1};
  CHECK_THROWS_AS(fit_slope(clustered), FitIllConditioned);

  SlopeEstimate few;
  few.eps = {0.1, 0.05, 0.025};
  few.d_eps = {1, 1, 1};
  CHECK_THROWS_AS(fit_slope(few), FitIllConditioned);
}

TEST_CASE("slope of a discounted constant matches the closed form", "[repr][oracle]") {
  // Y = e^{a eps} exactly, so D(eps) = (e^{a eps} - 1) / eps.
  auto c = make_case("0", "0", "1", "0.8*y", "0", {0, 0, 1, 0, {}});
  const auto est = slope_estimate(c);
  for (std::size_t i = 0; i < est.eps.size(); ++i)
    CHECK(est.d_eps[i] == Approx(std::expm1(0.8 * est.eps[i]) / est.eps[i]).epsilon(1e-4));
  // Extrapolation amplifies the per-point error by roughly ten.
  CHECK(est.fitted_limit == Approx(0.8).epsilon(5e-3));
  CHECK(est.rhs == Approx(0.8));
}

TEST_CASE("trivial and linear cases", "[repr]") {
  const auto zero = slope_estimate(make_case("0", "0", "1", "0", "0", {0, 0, 0, 0, {}}));
  for (double d : zero.d_eps) CHECK(d == 0.0);
  CHECK(zero.fitted_limit == Approx(0.0).margin(1e-14));
  const auto diag0 = convergence_diagnostics(zero);
  CHECK(diag0.exact);
  CHECK(diag0.exponent_label() == "exact");

  const auto qv = slope_estimate(make_case("0", "1", "1", "0", "0", {0, 0, 0, 1, {}}));
  for (double d : qv.d_eps) CHECK(d == Approx(1.0).epsilon(1e-9));
  CHECK(qv.fitted_limit == Approx(1.0).epsilon(1e-2));
}

TEST_CASE("coupled generator converges to the formula", "[repr]") {
  const auto est = slope_estimate(make_case("0", "0", "1", "y+z", "0.5*z", {0, 0, 0, 1, {}}));
  CHECK(est.rhs == 1.5);
  CHECK(est.fitted_limit == Approx(1.5).epsilon(0.02));
  const auto diag = convergence_diagnostics(est);
  CHECK_FALSE(diag.exact);
  CHECK(diag.exponent >= kMinDecayExponent);
  CHECK(diag.exponent <= kMaxDecayExponent);
  CHECK(diag.rate_consistent);
}

TEST_CASE("time-dependent generator", "[repr]") {
  auto c = make_case("0", "0", "1+0.25*cos(x)", "sin(t)+z", "0", {0.3, 0, 0, 1, {}});
  c.horizon = 1.0;
  const auto est = slope_estimate(c);
  CHECK(est.rhs == Approx(std::sin(0.3) + 1.25));
  CHECK(est.abs_err <= std::max(0.02 * std::fabs(est.rhs), 5e-3));
  CHECK(convergence_diagnostics(est).exponent >= kMinDecayExponent);
}

TEST_CASE("case validation", "[repr]") {
  auto c = make_case("0", "0", "1", "0", "0", {0, 0, 0, 1, {}});
  c.eps_grid = {0.2, 0.1, 0.1, 0.05};
  CHECK_THROWS_AS(c.validate(), InputError);
  c.eps_grid = {0.2, 0.1, 0.05};
  CHECK_THROWS_AS(c.validate(), InputError);
  c.eps_grid = default_eps_grid();
  c.point.t = 0.9;
  CHECK_THROWS_AS(c.validate(), InputError);
  c.horizon = 2.0;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("slope problems use linear terminal data", "[repr]") {
  const auto c = make_case("0", "0", "1", "0", "0", {0.1, 2.0, 0.5, -3.0, {}});
  const auto p = slope_problem(c, 0.05);
  CHECK(p.horizon == 0.05);
  CHECK(p.start_time == 0.1);
  CHECK(p.terminal.evaluate(expr::Bindings{}.set(expr::Var::x, 2.0)) == 0.5);
  CHECK(p.terminal.evaluate(expr::Bindings{}.set(expr::Var::x, 3.0)) == -2.5);
}
