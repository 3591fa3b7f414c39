#pragma once

// Finite joint distributions over X x Y x Z and the marginal / conditional
// tables the kernel constructors read from.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "philox.hpp"

namespace blockgibbs {

inline constexpr std::size_t kDefaultStateCap = 4096;
inline constexpr double kNormTol = 1e-14;
inline constexpr double kRenormLimit = 1e-6;

enum class Var : std::uint8_t { X = 0, Y = 1, Z = 2 };

inline constexpr std::array<Var, 3> kAllVars{Var::X, Var::Y, Var::Z};

inline char var_letter(Var v) { return "xyz"[static_cast<int>(v)]; }

/// Subset of {X, Y, Z}; iteration order is always X, Y, Z.
class VarSet {
 public:
  constexpr VarSet() = default;
  constexpr VarSet(std::initializer_list<Var> vars) {
    for (Var v : vars) bits_ |= bit(v);
  }

  constexpr bool contains(Var v) const { return (bits_ & bit(v)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr bool disjoint(VarSet o) const { return (bits_ & o.bits_) == 0; }
  constexpr VarSet operator|(VarSet o) const { return from_bits(bits_ | o.bits_); }
  constexpr VarSet complement() const { return from_bits(~bits_ & 0x7u); }
  constexpr bool operator==(const VarSet&) const = default;

  std::vector<Var> vars() const {
    std::vector<Var> out;
    for (Var v : kAllVars)
      if (contains(v)) out.push_back(v);
    return out;
  }

  std::string name() const {
    std::string s;
    for (Var v : vars()) s += static_cast<char>(std::toupper(var_letter(v)));
    return s.empty() ? "{}" : s;
  }

 private:
  static constexpr std::uint8_t bit(Var v) { return std::uint8_t(1u << static_cast<int>(v)); }
  static constexpr VarSet from_bits(unsigned b) {
    VarSet s;
    s.bits_ = static_cast<std::uint8_t>(b);
    return s;
  }
  std::uint8_t bits_ = 0;
};

/// One point of X x Y x Z.
struct Cell {
  std::size_t x = 0, y = 0, z = 0;

  std::size_t operator[](Var v) const { return v == Var::X ? x : v == Var::Y ? y : z; }
  std::size_t& operator[](Var v) { return v == Var::X ? x : v == Var::Y ? y : z; }
  bool operator==(const Cell&) const = default;
};

struct Dims {
  std::size_t nx = 1, ny = 1, nz = 1;

  std::size_t size(Var v) const { return v == Var::X ? nx : v == Var::Y ? ny : nz; }
  std::size_t total() const { return nx * ny * nz; }
  std::size_t total(VarSet s) const {
    std::size_t n = 1;
    for (Var v : s.vars()) n *= size(v);
    return n;
  }

  /// Row-major, x-major flattening: (x * ny + y) * nz + z.
  std::size_t flat(const Cell& c) const { return (c.x * ny + c.y) * nz + c.z; }
  Cell cell(std::size_t i) const { return {i / (ny * nz), (i / nz) % ny, i % nz}; }

  /// Flat index of the projection of `c` onto `s`, variables in X, Y, Z order.
  std::size_t flat(VarSet s, const Cell& c) const {
    std::size_t i = 0;
    for (Var v : s.vars()) i = i * size(v) + c[v];
    return i;
  }

  void validate(std::size_t cap = kDefaultStateCap) const {
    if (nx == 0 || ny == 0 || nz == 0)
      throw std::invalid_argument("dims must all be >= 1");
    if (total() > cap)
      throw std::invalid_argument("state space " + std::to_string(total()) +
                                  " exceeds cap " + std::to_string(cap));
  }

  bool operator==(const Dims&) const = default;
};

namespace detail {

inline double accurate_sum(std::span<const double> v) {
  long double s = 0.0L;
  for (double x : v) s += x;
  return static_cast<double>(s);
}

inline void warn(const std::string& msg) { std::clog << "blockgibbs: warning: " << msg << '\n'; }

/// Enforces the normalization policy shared by every probability table:
/// within kNormTol accepted as-is, within kRenormLimit renormalized with a
/// warning, otherwise rejected.
inline void normalize_or_throw(std::vector<double>& p, const char* what) {
  for (double v : p)
    if (!std::isfinite(v) || v < 0.0)
      throw std::invalid_argument(std::string(what) + ": entries must be finite and >= 0");
  const double s = accurate_sum(p);
  const double off = std::abs(s - 1.0);
  if (off <= kNormTol) return;
  if (off > kRenormLimit)
    throw std::invalid_argument(std::string(what) + ": entries sum to " + std::to_string(s));
  warn(std::string(what) + ": renormalized (sum was off by " + std::to_string(off) + ")");
  for (double& v : p) v /= s;
}

}  // namespace detail

/// Probability tensor over X x Y x Z (the target distribution).
class JointPmf3 {
 public:
  JointPmf3(Dims dims, std::vector<double> p, std::size_t cap = kDefaultStateCap)
      : dims_(dims), p_(std::move(p)) {
    dims_.validate(cap);
    if (p_.size() != dims_.total())
      throw std::invalid_argument("pmf has " + std::to_string(p_.size()) + " entries, dims need " +
                                  std::to_string(dims_.total()));
    detail::normalize_or_throw(p_, "pmf");
  }

  const Dims& dims() const { return dims_; }
  std::span<const double> values() const { return p_; }
  double operator()(std::size_t x, std::size_t y, std::size_t z) const {
    return p_[dims_.flat({x, y, z})];
  }
  double operator()(const Cell& c) const { return p_[dims_.flat(c)]; }
  double min() const { return *std::min_element(p_.begin(), p_.end()); }

 private:
  Dims dims_;
  std::vector<double> p_;
};

/// Marginal distribution on a subset of the variables.
struct MarginalTable {
  Dims dims;
  VarSet vars;
  std::vector<double> values;  // flattened over `vars` in X, Y, Z order

  double at(const Cell& c) const { return values[dims.flat(vars, c)]; }
};

/// Conditional distribution of `target` given `given`; rows indexed by the
/// flat `given` assignment, columns by the flat `target` assignment.
struct ConditionalTable {
  Dims dims;
  VarSet target;
  VarSet given;
  std::vector<double> values;

  std::size_t target_size() const { return dims.total(target); }
  std::size_t given_size() const { return dims.total(given); }

  /// Reads the coordinates of `c` that belong to target and given.
  double at(const Cell& c) const {
    return values[dims.flat(given, c) * target_size() + dims.flat(target, c)];
  }
  std::span<const double> row(std::size_t given_flat) const {
    return std::span<const double>(values).subspan(given_flat * target_size(), target_size());
  }
};

inline MarginalTable marginal(const JointPmf3& pmf, VarSet vars) {
  if (vars.empty()) throw std::invalid_argument("marginal: variable subset must be nonempty");
  const Dims& d = pmf.dims();
  MarginalTable m{d, vars, std::vector<double>(d.total(vars), 0.0)};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell c = d.cell(i);
    m.values[d.flat(vars, c)] += pmf(c);
  }
  return m;
}

inline ConditionalTable conditional(const JointPmf3& pmf, VarSet target, VarSet given) {
  if (target.empty() || given.empty())
    throw std::invalid_argument("conditional: target and given must be nonempty");
  if (!target.disjoint(given))
    throw std::invalid_argument("conditional: target and given must be disjoint");
  const Dims& d = pmf.dims();
  const MarginalTable joint = marginal(pmf, target | given);
  const MarginalTable cond = marginal(pmf, given);
  ConditionalTable t{d, target, given, std::vector<double>(d.total(given) * d.total(target))};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell c = d.cell(i);
    const double denom = cond.at(c);
    if (!(denom > 0.0)) {
      std::string cell;
      for (Var v : given.vars())
        cell += std::string(1, var_letter(v)) + "=" + std::to_string(c[v]) + " ";
      throw std::domain_error("conditional: zero-probability conditioning cell " + cell);
    }
    t.values[d.flat(given, c) * t.target_size() + d.flat(target, c)] = joint.at(c) / denom;
  }
  return t;
}

/// Pi*(x, y, z) = Pi_{X|Z}(x | z) * Pi_{YZ}(y, z): the invariant law of the
/// out-of-order block sampler.
inline JointPmf3 pi_star(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const ConditionalTable x_given_z = conditional(pmf, {Var::X}, {Var::Z});
  const MarginalTable yz = marginal(pmf, {Var::Y, Var::Z});
  std::vector<double> q(d.total());
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell c = d.cell(i);
    q[i] = x_given_z.at(c) * yz.at(c);
  }
  return JointPmf3(d, std::move(q), d.total());
}

/// Seeded random pmf with every entry >= floor. Weights are Dirichlet(1)
/// draws from a dedicated Philox substream, then mixed with the floor.
inline JointPmf3 random_pmf(Dims dims, std::uint64_t seed, double floor,
                            std::size_t cap = kDefaultStateCap) {
  dims.validate(cap);
  const std::size_t n = dims.total();
  if (!(floor > 0.0) || !(floor < 1.0 / static_cast<double>(n)))
    throw std::invalid_argument("random_pmf: floor must lie in (0, 1/" + std::to_string(n) + ")");
  Substream stream(seed, n, 0xF1004u);
  std::vector<double> w(n);
  for (double& v : w) v = -std::log(stream.uniform());
  const double total = detail::accurate_sum(w);
  const double mass = 1.0 - static_cast<double>(n) * floor;
  std::vector<double> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = floor + mass * (w[i] / total);
  return JointPmf3(dims, std::move(p), cap);
}

inline JointPmf3 product_pmf(std::span<const double> px, std::span<const double> py,
                             std::span<const double> pz) {
  for (auto f : {px, py, pz}) {
    if (f.empty()) throw std::invalid_argument("product_pmf: empty factor");
    for (double v : f)
      if (!std::isfinite(v) || v < 0.0)
        throw std::invalid_argument("product_pmf: factor entries must be finite and >= 0");
    if (std::abs(detail::accurate_sum(f) - 1.0) > 1e-12)
      throw std::invalid_argument("product_pmf: factor is not normalized");
  }
  const Dims d{px.size(), py.size(), pz.size()};
  std::vector<double> p(d.total());
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell c = d.cell(i);
    p[i] = px[c.x] * py[c.y] * pz[c.z];
  }
  return JointPmf3(d, std::move(p));
}

/// Total variation distance on a finite space: half the L1 distance.
inline double tv(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size())
    throw std::invalid_argument("tv: shape mismatch (" + std::to_string(p.size()) + " vs " +
                                std::to_string(q.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

inline double tv(const MarginalTable& p, const MarginalTable& q) {
  if (!(p.vars == q.vars) || !(p.dims == q.dims))
    throw std::invalid_argument("tv: marginal tables over different variables");
  return tv(p.values, q.values);
}

inline double tv(const JointPmf3& p, const JointPmf3& q) {
  if (!(p.dims() == q.dims())) throw std::invalid_argument("tv: pmfs with different dims");
  return tv(p.values(), q.values());
}

}  // namespace blockgibbs
