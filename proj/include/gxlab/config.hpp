#pragma once

// JSON run configurations. Every validation failure is reported as a
// ConfigError carrying the JSON pointer of the offending value.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gxlab/gbsde.hpp"
#include "gxlab/gcore.hpp"
#include "gxlab/io.hpp"
#include "gxlab/lattice.hpp"
#include "gxlab/repr.hpp"

namespace gxlab::config {

using nlohmann::json;

/// A JSON value together with its pointer, for error messages.
class Node {
 public:
  Node(const json& j, std::string path) : j_(&j), path_(std::move(path)) {}

  const json& raw() const noexcept { return *j_; }
  const std::string& path() const noexcept { return path_; }
  std::string at_path() const { return path_.empty() ? "/" : path_; }

  bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

  Node operator[](const std::string& key) const {
    require_object();
    if (!j_->contains(key)) throw ConfigError(path_ + "/" + key, "required key is missing");
    return {j_->at(key), path_ + "/" + key};
  }
  Node operator[](std::size_t i) const {
    if (!j_->is_array()) throw ConfigError(at_path(), "expected an array");
    if (i >= j_->size()) throw ConfigError(path_ + "/" + std::to_string(i), "index out of range");
    return {j_->at(i), path_ + "/" + std::to_string(i)};
  }
  std::size_t size() const {
    if (!j_->is_array()) throw ConfigError(at_path(), "expected an array");
    return j_->size();
  }

  double number() const {
    if (!j_->is_number()) throw ConfigError(at_path(), "expected a number");
    return j_->get<double>();
  }
  long integer() const {
    if (!j_->is_number_integer()) throw ConfigError(at_path(), "expected an integer");
    return j_->get<long>();
  }
  std::string string() const {
    if (!j_->is_string()) throw ConfigError(at_path(), "expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) throw ConfigError(at_path(), "expected true or false");
    return j_->get<bool>();
  }
  std::vector<double> numbers() const {
    std::vector<double> out;
    for (std::size_t i = 0; i < size(); ++i) out.push_back((*this)[i].number());
    return out;
  }

  double number_or(const std::string& key, double fallback) const { return has(key) ? (*this)[key].number() : fallback; }
  long integer_or(const std::string& key, long fallback) const { return has(key) ? (*this)[key].integer() : fallback; }
  std::string string_or(const std::string& key, std::string fallback) const {
    return has(key) ? (*this)[key].string() : fallback;
  }

  /// Expression field; parse failures are re-raised with this node's path.
  Expr expression() const {
    try {
      if (j_->is_number()) return Expr::constant(j_->get<double>());
      return expr::parse(string());
    } catch (const ConfigError&) {
      throw;
    } catch (const InputError& e) {
      throw ConfigError(at_path(), e.what());
    }
  }
  Expr expression_or(const std::string& key, double fallback) const {
    return has(key) ? (*this)[key].expression() : Expr::constant(fallback);
  }

  void require_object() const {
    if (!j_->is_object()) throw ConfigError(at_path(), "expected an object");
  }

 private:
  const json* j_;
  std::string path_;
};

inline json load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw ConfigError("/", e.what());
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("/", std::string("invalid JSON: ") + e.what());
  }
}

/// Digest of the canonical form; insensitive to key order and whitespace.
inline std::string config_hash(const json& j) { return io::sha256_hex(io::canonical(j)); }

/// {"sigma2_min": a, "sigma2_max": b} or {"matrices": [...], "sigma2_min": floor}.
inline UncertaintySet parse_gamma(const Node& n) {
  n.require_object();
  try {
    if (n.has("matrices")) {
      const Node ms = n["matrices"];
      std::vector<Matrix> mats;
      for (std::size_t k = 0; k < ms.size(); ++k) {
        const Node m = ms[k];
        const auto d = static_cast<Eigen::Index>(m.size());
        Matrix a(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
          const Node row = m[static_cast<std::size_t>(i)];
          if (static_cast<Eigen::Index>(row.size()) != d) throw ConfigError(row.at_path(), "matrix must be square");
          for (Eigen::Index j = 0; j < d; ++j) a(i, j) = row[static_cast<std::size_t>(j)].number();
        }
        mats.push_back(a);
      }
      return UncertaintySet::family(std::move(mats), n["sigma2_min"].number());
    }
    return UncertaintySet::interval(n["sigma2_min"].number(), n["sigma2_max"].number());
  } catch (const ConfigError&) {
    throw;
  } catch (const InputError& e) {
    throw ConfigError(n.at_path(), e.what());
  }
}

/// {"b": ..., "h": ..., "sigma": ...}; defaults b = h = 0, sigma = 1.
inline ForwardSpec parse_forward(const Node& n) {
  n.require_object();
  return ForwardSpec::scalar(n.expression_or("b", 0.0), n.expression_or("h", 0.0), n.expression_or("sigma", 1.0));
}

/// {"f": ..., "g": ..., "lipschitz": L (optional, declared)}.
inline GeneratorSpec parse_generator(const Node& n) {
  n.require_object();
  auto gen = GeneratorSpec::scalar(n.expression_or("f", 0.0), n.expression_or("g", 0.0));
  if (n.has("lipschitz")) {
    try {
      gen.lipschitz = expr::LipschitzEstimate::declared(n["lipschitz"].number());
    } catch (const InputError& e) {
      throw ConfigError(n["lipschitz"].at_path(), e.what());
    }
  }
  return gen;
}

/// Either {"nx": target} for the default policy or an explicit grid
/// {"x_min", "x_max", "nx", "nt"} spanning the horizon.
struct GridChoice {
  std::optional<Grid1D> explicit_grid;
  int nx_target = 0;
};

inline GridChoice parse_grid(const Node& parent, double horizon, int default_nx) {
  GridChoice g;
  g.nx_target = default_nx;
  if (!parent.has("grid")) return g;
  const Node n = parent["grid"];
  n.require_object();
  if (n.has("x_min") || n.has("x_max") || n.has("nt")) {
    Grid1D grid;
    grid.x_min = n["x_min"].number();
    grid.x_max = n["x_max"].number();
    grid.nx = static_cast<int>(n["nx"].integer());
    grid.nt = static_cast<int>(n["nt"].integer());
    grid.dt = grid.nt > 0 ? horizon / grid.nt : 0.0;
    try {
      grid.validate();
    } catch (const InputError& e) {
      throw ConfigError(n.at_path(), e.what());
    }
    g.explicit_grid = grid;
  } else {
    g.nx_target = static_cast<int>(n.integer_or("nx", default_nx));
    if (g.nx_target < 16) throw ConfigError(n["nx"].at_path(), "nx must be >= 16");
  }
  return g;
}

inline double positive(const Node& n) {
  const double v = n.number();
  if (!(v > 0.0)) throw ConfigError(n.at_path(), "must be > 0");
  return v;
}

inline std::vector<NamedPayoff> parse_payoffs(const Node& n) {
  std::vector<NamedPayoff> out;
  for (std::size_t i = 0; i < n.size(); ++i) {
    const Node p = n[i];
    if (p.raw().is_string()) {
      out.push_back({p.string(), p.expression()});
    } else {
      out.push_back({p["id"].string(), p["expr"].expression()});
    }
  }
  if (out.empty()) throw ConfigError(n.at_path(), "at least one payoff required");
  return out;
}

inline VolScenario parse_scenario(const Node& n) {
  const std::string kind = n.string_or("kind", "worst_case");
  const std::string id = n.string_or("id", kind);
  if (kind == "worst_case") return VolScenario::worst_case(id);
  if (kind == "piecewise") {
    std::vector<double> bp = n.has("breakpoints") ? n["breakpoints"].numbers() : std::vector<double>{};
    auto vals = n["values"].numbers();
    if (vals.size() != bp.size() + 1) throw ConfigError(n["values"].at_path(), "need one more value than breakpoints");
    return VolScenario::piecewise(id, std::move(bp), std::move(vals));
  }
  throw ConfigError(n["kind"].at_path(), "unknown scenario kind '" + kind + "'");
}

inline ReprCase parse_repr_case(const Node& n) {
  ReprCase c;
  c.id = n.string_or("id", "case");
  c.gamma = parse_gamma(n["gamma"]);
  c.forward = n.has("forward") ? parse_forward(n["forward"]) : ForwardSpec::parse("0", "0", "1");
  c.generator = n.has("generator") ? parse_generator(n["generator"]) : GeneratorSpec::parse("0", "0");
  const Node pt = n["point"];
  c.point.t = pt.number_or("t", 0.0);
  c.point.x = pt.number_or("x", 0.0);
  c.point.y = pt.number_or("y", 0.0);
  c.point.p = pt.number_or("p", 1.0);
  if (n.has("eps_grid")) c.eps_grid = n["eps_grid"].numbers();
  if (c.eps_grid.empty()) throw ConfigError(n["eps_grid"].at_path(), "eps grid is empty");
  c.horizon = n.has("horizon") ? positive(n["horizon"]) : c.point.t + c.eps_grid.front();
  try {
    c.validate();
  } catch (const InputError& e) {
    throw ConfigError(n.at_path(), e.what());
  }
  return c;
}

}  // namespace gxlab::config
