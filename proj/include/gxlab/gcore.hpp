#pragma once

// The variance-uncertainty set, the sublinear function G, and the problem
// specification types shared by the solvers.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "gxlab/errors.hpp"
#include "gxlab/expr.hpp"

namespace gxlab {

using Matrix = Eigen::MatrixXd;
using expr::Expr;

/// Eigenvalue tolerance for Loewner-order comparisons.
inline constexpr double kLoewnerTolerance = 1e-10;

/// A >= B in the Loewner order, i.e. A - B is positive semidefinite.
inline bool loewner_geq(const Matrix& a, const Matrix& b, double tol = kLoewnerTolerance) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionMismatch("loewner_geq: shapes differ");
  const Matrix diff = 0.5 * ((a - b) + (a - b).transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff() >= -tol;
}

/// The set Gamma of admissible covariance matrices defining G.
class UncertaintySet {
 public:
  enum class Kind { interval, matrix_family };

  /// Interval [sigma2_min, sigma2_max] of variances (d = 1).
  static UncertaintySet interval(double sigma2_min, double sigma2_max) {
    if (!std::isfinite(sigma2_min) || !std::isfinite(sigma2_max))
      throw InputError("uncertainty interval must be finite");
    if (!(sigma2_min > 0.0))
      throw InputError("non-degeneracy requires sigma2_min > 0 (got " + std::to_string(sigma2_min) + ")");
    if (!(sigma2_min <= sigma2_max)) throw InputError("uncertainty interval requires sigma2_min <= sigma2_max");
    UncertaintySet s;
    s.kind_ = Kind::interval;
    s.dim_ = 1;
    s.lo_ = sigma2_min;
    s.hi_ = sigma2_max;
    return s;
  }

  /// Finite family of symmetric matrices, each >= floor * I with floor > 0.
  static UncertaintySet family(std::vector<Matrix> matrices, double floor) {
    if (matrices.empty()) throw InputError("matrix family must be non-empty");
    if (!(floor > 0.0)) throw InputError("non-degeneracy requires sigma2_min > 0");
    const auto d = matrices.front().rows();
    if (d < 1) throw DimensionMismatch("matrix family: empty matrix");
    UncertaintySet s;
    s.kind_ = Kind::matrix_family;
    s.dim_ = static_cast<int>(d);
    s.lo_ = floor;
    s.hi_ = 0.0;
    for (const auto& m : matrices) {
      if (m.rows() != d || m.cols() != d) throw DimensionMismatch("matrix family: inconsistent shapes");
      if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw InputError("matrix family: matrix not symmetric");
      if (!loewner_geq(m, floor * Matrix::Identity(d, d)))
        throw InputError("matrix family: matrix not >= sigma2_min * I (non-degeneracy)");
      Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
      s.hi_ = std::max(s.hi_, es.eigenvalues().maxCoeff());
    }
    s.matrices_ = std::move(matrices);
    return s;
  }

  Kind kind() const noexcept { return kind_; }
  int dim() const noexcept { return dim_; }
  /// Lower variance bound (interval endpoint, or the family's configured floor).
  double sigma2_min() const noexcept { return lo_; }
  /// Upper variance bound (interval endpoint, or largest eigenvalue in the family).
  double sigma2_max() const noexcept { return hi_; }
  const std::vector<Matrix>& matrices() const noexcept { return matrices_; }

 private:
  UncertaintySet() = default;

  Kind kind_ = Kind::interval;
  int dim_ = 1;
  double lo_ = 1.0;
  double hi_ = 1.0;
  std::vector<Matrix> matrices_;
};

/// G(alpha) = 1/2 (sigma2_max alpha^+ - sigma2_min alpha^-), d = 1 only.
inline double g_value(const UncertaintySet& gamma, double alpha) {
  if (gamma.dim() != 1) throw DimensionMismatch("scalar G requires d = 1");
  if (gamma.kind() == UncertaintySet::Kind::interval) {
    const double pos = alpha > 0.0 ? alpha : 0.0;
    const double neg = alpha < 0.0 ? -alpha : 0.0;
    return 0.5 * (gamma.sigma2_max() * pos - gamma.sigma2_min() * neg);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& m : gamma.matrices()) best = std::max(best, m(0, 0) * alpha);
  return 0.5 * best;
}

/// G(A) = 1/2 sup_{gamma in Gamma} tr[gamma A].
inline double g_value(const UncertaintySet& gamma, const Matrix& a) {
  if (a.rows() != gamma.dim() || a.cols() != gamma.dim())
    throw DimensionMismatch("G: matrix is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                            ", uncertainty set has d = " + std::to_string(gamma.dim()));
  if (gamma.dim() == 1) return g_value(gamma, a(0, 0));
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& m : gamma.matrices()) best = std::max(best, (m * a).trace());
  return 0.5 * best;
}

inline double two_g(const UncertaintySet& gamma, double alpha) { return 2.0 * g_value(gamma, alpha); }
inline double two_g(const UncertaintySet& gamma, const Matrix& a) { return 2.0 * g_value(gamma, a); }

/// The variance that attains the sup in G(alpha) for d = 1.
inline double argmax_variance(const UncertaintySet& gamma, double alpha) {
  if (gamma.dim() != 1) throw DimensionMismatch("argmax_variance requires d = 1");
  if (gamma.kind() == UncertaintySet::Kind::interval)
    return alpha >= 0.0 ? gamma.sigma2_max() : gamma.sigma2_min();
  double best = gamma.matrices().front()(0, 0);
  for (const auto& m : gamma.matrices())
    if (m(0, 0) * alpha > best * alpha) best = m(0, 0);
  return best;
}

/// Tight constant c with G(A) - G(B) >= c tr[A - B] for A >= B.
inline double nondegeneracy_constant(const UncertaintySet& gamma) { return 0.5 * gamma.sigma2_min(); }

// ---------------------------------------------------------------------------
// Problem specification

/// Symmetric d x d array of expressions; only the upper triangle is stored,
/// so g(i, j) and g(j, i) are the same object.
class SymExprMatrix {
 public:
  SymExprMatrix() : SymExprMatrix(1) {}
  explicit SymExprMatrix(int d) : d_(d), entries_(static_cast<std::size_t>(d * (d + 1) / 2)) {
    if (d < 1) throw DimensionMismatch("symmetric matrix dimension must be >= 1");
  }
  explicit SymExprMatrix(Expr scalar) : SymExprMatrix(1) { entries_[0] = std::move(scalar); }

  int dim() const noexcept { return d_; }
  const Expr& operator()(int i, int j) const { return entries_[index(i, j)]; }
  Expr& operator()(int i, int j) { return entries_[index(i, j)]; }

  Matrix evaluate(const expr::Bindings& b) const {
    Matrix m(d_, d_);
    for (int i = 0; i < d_; ++i)
      for (int j = i; j < d_; ++j) m(i, j) = m(j, i) = (*this)(i, j).evaluate(b);
    return m;
  }

  const std::vector<Expr>& entries() const noexcept { return entries_; }

 private:
  std::size_t index(int i, int j) const {
    if (i < 0 || j < 0 || i >= d_ || j >= d_) throw DimensionMismatch("symmetric matrix index out of range");
    if (i > j) std::swap(i, j);
    return static_cast<std::size_t>(i * d_ - i * (i - 1) / 2 + (j - i));
  }

  int d_;
  std::vector<Expr> entries_;
};

/// Generator pair (f, g) of the backward equation.
struct GeneratorSpec {
  Expr f;
  SymExprMatrix g;
  std::optional<expr::LipschitzEstimate> lipschitz;

  static GeneratorSpec scalar(Expr f, Expr g) { return {std::move(f), SymExprMatrix(std::move(g)), std::nullopt}; }
  static GeneratorSpec parse(std::string_view f, std::string_view g) {
    return scalar(expr::parse(f), expr::parse(g));
  }

  int dim() const noexcept { return g.dim(); }
  double f_at(double t, double y, double z) const { return f.evaluate(expr::Bindings::txyz(t, 0.0, y, z)); }
  Matrix g_at(double t, double y, double z) const { return g.evaluate(expr::Bindings::txyz(t, 0.0, y, z)); }
  double g_scalar(double t, double y, double z) const {
    if (dim() != 1) throw DimensionMismatch("scalar g requires d = 1");
    return g(0, 0).evaluate(expr::Bindings::txyz(t, 0.0, y, z));
  }
};

/// Forward coefficients b (n), h_ij (n each, symmetric in ij), sigma (n x d).
/// Expressions are functions of x; multi-dimensional states bind x to the
/// first state component.
class ForwardSpec {
 public:
  ForwardSpec() : ForwardSpec(1, 1) {}
  ForwardSpec(int n, int d) : n_(n), d_(d), b_(static_cast<std::size_t>(n)),
                              h_(static_cast<std::size_t>(d * (d + 1) / 2 * n)),
                              sigma_(static_cast<std::size_t>(n * d)) {
    if (n < 1 || d < 1) throw DimensionMismatch("forward spec dimensions must be >= 1");
  }

  static ForwardSpec scalar(Expr b, Expr h, Expr sigma) {
    ForwardSpec s(1, 1);
    s.b(0) = std::move(b);
    s.h(0, 0, 0) = std::move(h);
    s.sigma(0, 0) = std::move(sigma);
    return s;
  }
  static ForwardSpec parse(std::string_view b, std::string_view h, std::string_view sigma) {
    return scalar(expr::parse(b), expr::parse(h), expr::parse(sigma));
  }

  int n() const noexcept { return n_; }
  int d() const noexcept { return d_; }

  Expr& b(int k) { return b_.at(static_cast<std::size_t>(k)); }
  const Expr& b(int k) const { return b_.at(static_cast<std::size_t>(k)); }
  Expr& h(int i, int j, int k) { return h_.at(h_index(i, j, k)); }
  const Expr& h(int i, int j, int k) const { return h_.at(h_index(i, j, k)); }
  Expr& sigma(int k, int j) { return sigma_.at(static_cast<std::size_t>(k * d_ + j)); }
  const Expr& sigma(int k, int j) const { return sigma_.at(static_cast<std::size_t>(k * d_ + j)); }

  std::vector<Expr> all() const {
    std::vector<Expr> out(b_);
    out.insert(out.end(), h_.begin(), h_.end());
    out.insert(out.end(), sigma_.begin(), sigma_.end());
    return out;
  }

 private:
  std::size_t h_index(int i, int j, int k) const {
    if (i < 0 || j < 0 || k < 0 || i >= d_ || j >= d_ || k >= n_)
      throw DimensionMismatch("h index out of range");
    if (i > j) std::swap(i, j);
    const int pair = i * d_ - i * (i - 1) / 2 + (j - i);
    return static_cast<std::size_t>(pair * n_ + k);
  }

  int n_, d_;
  std::vector<Expr> b_;
  std::vector<Expr> h_;
  std::vector<Expr> sigma_;
};

/// Markovian forward-backward problem on [start_time, start_time + horizon]
/// with terminal payoff terminal(X_T).
struct GBsdeProblem {
  ForwardSpec forward;
  GeneratorSpec generator;
  Expr terminal;
  double horizon = 1.0;
  UncertaintySet gamma = UncertaintySet::interval(1.0, 1.0);
  double start_time = 0.0;

  void validate() const {
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw InputError("horizon T must be > 0");
    if (forward.d() != gamma.dim() || generator.dim() != gamma.dim())
      throw DimensionMismatch("problem: generator, forward and uncertainty set dimensions differ");
  }
};

// ---------------------------------------------------------------------------
// Assumption validation

enum class Assumption { H2, H3, H4, H5 };

inline const char* assumption_name(Assumption a) {
  switch (a) {
    case Assumption::H2: return "H2";
    case Assumption::H3: return "H3";
    case Assumption::H4: return "H4";
    case Assumption::H5: return "H5";
  }
  return "?";
}

struct Witness {
  double t = 0.0, y = 0.0, z = 0.0;
  double value = 0.0;
};

struct AssumptionCheck {
  Assumption assumption;
  bool passed = true;
  std::string detail;
  std::vector<Witness> witnesses;
};

struct AssumptionReport {
  std::vector<AssumptionCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const AssumptionCheck* find(Assumption a) const {
    for (const auto& c : checks)
      if (c.assumption == a) return &c;
    return nullptr;
  }
};

struct ValidationOptions {
  double box_half_width = 10.0;
  int lipschitz_samples = 4000;
  std::uint64_t seed = 0;
};

namespace detail {

inline std::vector<Expr> generator_entries(const GeneratorSpec& gen) {
  std::vector<Expr> out{gen.f};
  out.insert(out.end(), gen.g.entries().begin(), gen.g.entries().end());
  return out;
}

/// Sample ordering puts small magnitudes first so witnesses are simple.
inline const std::vector<double>& witness_levels() {
  static const std::vector<double> levels{0.0, 1.0, -1.0, 2.0, -2.0, 0.5, -0.5};
  return levels;
}

// Largest jump of t -> e(t, y, z) over a uniform grid with m cells.
inline double max_time_jump(const Expr& e, double t0, double t1, int m, double y, double z) {
  double worst = 0.0;
  double prev = e.evaluate(expr::Bindings::txyz(t0, 0.0, y, z));
  for (int k = 1; k <= m; ++k) {
    const double t = t0 + (t1 - t0) * k / m;
    const double cur = e.evaluate(expr::Bindings::txyz(t, 0.0, y, z));
    worst = std::max(worst, std::fabs(cur - prev));
    prev = cur;
  }
  return worst;
}

// (1/eps) * int_t^{t+eps} |e(u) - e(t)| du by the midpoint rule.
inline double mean_oscillation(const Expr& e, double t, double eps, double y, double z) {
  constexpr int kPoints = 32;
  const double base = e.evaluate(expr::Bindings::txyz(t, 0.0, y, z));
  double acc = 0.0;
  for (int k = 0; k < kPoints; ++k) {
    const double u = t + eps * (k + 0.5) / kPoints;
    acc += std::fabs(e.evaluate(expr::Bindings::txyz(u, 0.0, y, z)) - base);
  }
  return acc / kPoints;
}

}  // namespace detail

/// Checks the flagged assumptions on sampled points and returns a report;
/// never throws on a failed assumption.
inline AssumptionReport validate_assumptions(const GBsdeProblem& problem, const std::vector<Assumption>& flags,
                                             const ValidationOptions& opt = {}) {
  AssumptionReport report;
  const auto entries = detail::generator_entries(problem.generator);
  const double t0 = problem.start_time;
  const double t1 = problem.start_time + problem.horizon;
  const auto& levels = detail::witness_levels();

  for (Assumption a : flags) {
    AssumptionCheck check{a, true, {}, {}};
    switch (a) {
      case Assumption::H2: {
        expr::Box box;
        box.set(expr::Var::t, t0, t1)
            .set(expr::Var::y, -opt.box_half_width, opt.box_half_width)
            .set(expr::Var::z, -opt.box_half_width, opt.box_half_width);
        double total = 0.0;
        try {
          for (const auto& e : entries) {
            const auto est = expr::estimate_lipschitz(
                e, expr::var_bit(expr::Var::y) | expr::var_bit(expr::Var::z), box,
                {opt.lipschitz_samples, opt.seed, 1e6, 1.1});
            total += est.constant;
          }
          expr::Box xbox;
          xbox.set(expr::Var::x, -opt.box_half_width, opt.box_half_width);
          for (const auto& e : problem.forward.all())
            expr::estimate_lipschitz(e, expr::var_bit(expr::Var::x), xbox,
                                     {opt.lipschitz_samples, opt.seed, 1e6, 1.1});
          check.detail = "sampled L(f,g) = " + std::to_string(total);
        } catch (const UnboundedDetected& err) {
          check.passed = false;
          check.detail = err.what();
        }
        break;
      }
      case Assumption::H3: {
        for (const auto& e : entries) {
          for (double y : levels) {
            for (double z : levels) {
              const double coarse = detail::max_time_jump(e, t0, t1, 64, y, z);
              const double fine = detail::max_time_jump(e, t0, t1, 128, y, z);
              if (fine > 1e-9 && fine > 0.75 * coarse) {
                check.passed = false;
                check.witnesses.push_back({t0, y, z, fine});
              }
            }
          }
        }
        check.detail = check.passed ? "time jumps shrink under refinement" : "time jump does not shrink";
        break;
      }
      case Assumption::H4: {
        for (const auto& e : entries) {
          for (double y : levels) {
            for (double z : levels) {
              for (int k = 0; k < 4; ++k) {
                const double t = t0 + problem.horizon * k / 4.0;
                const double big = detail::mean_oscillation(e, t, problem.horizon / 8.0, y, z);
                const double small = detail::mean_oscillation(e, t, problem.horizon / 64.0, y, z);
                if (small > 1e-9 && small > 0.5 * big) {
                  check.passed = false;
                  check.witnesses.push_back({t, y, z, small});
                }
              }
            }
          }
        }
        check.detail = check.passed ? "mean oscillation vanishes as eps -> 0" : "mean oscillation does not vanish";
        break;
      }
      case Assumption::H5: {
        for (double t : {t0, 0.5 * (t0 + t1), t1}) {
          for (double y : levels) {
            for (const auto& e : entries) {
              const double v = e.evaluate(expr::Bindings::txyz(t, 0.0, y, 0.0));
              if (v != 0.0) {
                check.passed = false;
                check.witnesses.push_back({t, y, 0.0, v});
                break;
              }
            }
          }
        }
        check.detail = check.passed ? "f(t,y,0) = g(t,y,0) = 0 on samples" : "generator nonzero at z = 0";
        break;
      }
    }
    report.checks.push_back(std::move(check));
  }
  return report;
}

}  // namespace gxlab
