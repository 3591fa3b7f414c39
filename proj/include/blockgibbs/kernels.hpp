#pragma once

// Dense transition matrices for the three-step Gibbs sampler, the block
// sampler, its rotation, the out-of-order sampler and the two marginal
// chains, plus the initial measures used to compare them.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "finite_model.hpp"

namespace blockgibbs {

using ProbVector = Eigen::RowVectorXd;

/// Bijection between tuples over an ordered list of variables and flat
/// indices; the first label is the most significant digit.
class StateCodec {
 public:
  StateCodec(Dims dims, std::vector<Var> labels) : dims_(dims), labels_(std::move(labels)) {
    if (labels_.empty() || labels_.size() > 3)
      throw std::invalid_argument("codec needs 1..3 variable labels");
    VarSet seen;
    for (Var v : labels_) {
      if (seen.contains(v)) throw std::invalid_argument("codec labels must be distinct");
      seen = seen | VarSet{v};
    }
  }

  const Dims& dims() const { return dims_; }
  const std::vector<Var>& labels() const { return labels_; }
  std::size_t size() const {
    std::size_t n = 1;
    for (Var v : labels_) n *= dims_.size(v);
    return n;
  }

  std::size_t encode(const Cell& c) const {
    std::size_t i = 0;
    for (Var v : labels_) i = i * dims_.size(v) + c[v];
    return i;
  }

  /// Coordinates not covered by the codec decode to 0.
  Cell decode(std::size_t i) const {
    Cell c;
    for (auto it = labels_.rbegin(); it != labels_.rend(); ++it) {
      c[*it] = i % dims_.size(*it);
      i /= dims_.size(*it);
    }
    return c;
  }

  std::string label(std::size_t i) const {
    const Cell c = decode(i);
    std::string s;
    for (Var v : labels_) {
      if (!s.empty()) s += '_';
      s += var_letter(v);
      s += std::to_string(c[v]);
    }
    return s;
  }

  std::string name() const {
    std::string s;
    for (Var v : labels_) s += static_cast<char>(std::toupper(var_letter(v)));
    return s;
  }

  bool operator==(const StateCodec&) const = default;

 private:
  Dims dims_;
  std::vector<Var> labels_;
};

inline StateCodec codec_xyz(const Dims& d) { return {d, {Var::X, Var::Y, Var::Z}}; }
inline StateCodec codec_yzx(const Dims& d) { return {d, {Var::Y, Var::Z, Var::X}}; }
inline StateCodec codec_zxy(const Dims& d) { return {d, {Var::Z, Var::X, Var::Y}}; }
inline StateCodec codec_xy(const Dims& d) { return {d, {Var::X, Var::Y}}; }
inline StateCodec codec_z(const Dims& d) { return {d, {Var::Z}}; }

struct Kernel {
  StateCodec codec;
  Eigen::MatrixXd matrix;  // rows: current state, columns: next state

  std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }

  double max_row_sum_error() const {
    return (matrix.rowwise().sum().array() - 1.0).abs().maxCoeff();
  }
};

struct InitialMeasure {
  StateCodec codec;
  ProbVector vector;
};

/// Distribution of the full joint pmf laid out in `codec` order.
inline ProbVector as_vector(const JointPmf3& pmf, const StateCodec& codec) {
  if (codec.labels().size() != 3) throw std::invalid_argument("as_vector: codec must cover X, Y, Z");
  const Dims& d = pmf.dims();
  ProbVector v(static_cast<Eigen::Index>(d.total()));
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell c = d.cell(i);
    v(static_cast<Eigen::Index>(codec.encode(c))) = pmf(c);
  }
  return v;
}

/// Marginal table laid out in `codec` order; the codec must cover exactly
/// the table's variables.
inline ProbVector as_vector(const MarginalTable& m, const StateCodec& codec) {
  VarSet covered;
  for (Var v : codec.labels()) covered = covered | VarSet{v};
  if (!(covered == m.vars)) throw std::invalid_argument("as_vector: codec does not match marginal");
  ProbVector v(static_cast<Eigen::Index>(codec.size()));
  for (std::size_t i = 0; i < codec.size(); ++i)
    v(static_cast<Eigen::Index>(i)) = m.at(codec.decode(i));
  return v;
}

namespace detail {

inline void check_permutation(const std::array<Var, 3>& ordering) {
  VarSet seen;
  for (Var v : ordering) {
    if (seen.contains(v)) throw std::invalid_argument("gibbs ordering must be a permutation of X, Y, Z");
    seen = seen | VarSet{v};
  }
}

/// Full conditional of `v` given the other two variables.
inline ConditionalTable full_conditional(const JointPmf3& pmf, Var v) {
  return conditional(pmf, {v}, VarSet{v}.complement());
}

// Conditional tables shared by the block-structured kernels.
struct BlockTables {
  ConditionalTable xy_given_z;
  ConditionalTable z_given_xy;
  explicit BlockTables(const JointPmf3& pmf)
      : xy_given_z(conditional(pmf, {Var::X, Var::Y}, {Var::Z})),
        z_given_xy(conditional(pmf, {Var::Z}, {Var::X, Var::Y})) {}
};

}  // namespace detail

/// Three-step systematic-scan Gibbs kernel; each step redraws one variable
/// from its full conditional given the freshest values of the other two.
/// The state codec is (X, Y, Z) whatever the update order.
inline Kernel gibbs_kernel(const JointPmf3& pmf, const std::array<Var, 3>& ordering) {
  detail::check_permutation(ordering);
  const Dims& d = pmf.dims();
  const std::array<ConditionalTable, 3> full{detail::full_conditional(pmf, Var::X),
                                             detail::full_conditional(pmf, Var::Y),
                                             detail::full_conditional(pmf, Var::Z)};
  Kernel k{codec_xyz(d), Eigen::MatrixXd::Zero(d.total(), d.total())};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell from = k.codec.decode(i);
    for (std::size_t j = 0; j < d.total(); ++j) {
      const Cell to = k.codec.decode(j);
      Cell cur = from;
      double prob = 1.0;
      for (Var v : ordering) {
        cur[v] = to[v];
        prob *= full[static_cast<int>(v)].at(cur);
      }
      k.matrix(i, j) = prob;
    }
  }
  return k;
}

/// K((x,y,z), (x',y',z')) = Pi_{XY|Z}(x',y' | z) Pi_{Z|XY}(z' | x',y').
inline Kernel block_kernel(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const detail::BlockTables t(pmf);
  Kernel k{codec_xyz(d), Eigen::MatrixXd(d.total(), d.total())};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell from = k.codec.decode(i);
    for (std::size_t j = 0; j < d.total(); ++j) {
      const Cell to = k.codec.decode(j);
      k.matrix(i, j) = t.xy_given_z.at({to.x, to.y, from.z}) * t.z_given_xy.at(to);
    }
  }
  return k;
}

/// K^dagger((z,x,y), (z',x',y')) = Pi_{Z|XY}(z' | x,y) Pi_{XY|Z}(x',y' | z').
inline Kernel rotated_block_kernel(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const detail::BlockTables t(pmf);
  Kernel k{codec_zxy(d), Eigen::MatrixXd(d.total(), d.total())};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell from = k.codec.decode(i);
    for (std::size_t j = 0; j < d.total(); ++j) {
      const Cell to = k.codec.decode(j);
      k.matrix(i, j) = t.z_given_xy.at({from.x, from.y, to.z}) * t.xy_given_z.at(to);
    }
  }
  return k;
}

/// Out-of-order kernel on (Y, Z, X):
/// K*((y,z,x), (y',z',x')) = Pi_{Y|XZ}(y' | x,z) Pi_{Z|XY}(z' | x,y') Pi_{X|Z}(x' | z').
/// Rows do not depend on y.
inline Kernel ooo_kernel(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const ConditionalTable y_given_xz = conditional(pmf, {Var::Y}, {Var::X, Var::Z});
  const ConditionalTable z_given_xy = conditional(pmf, {Var::Z}, {Var::X, Var::Y});
  const ConditionalTable x_given_z = conditional(pmf, {Var::X}, {Var::Z});
  Kernel k{codec_yzx(d), Eigen::MatrixXd(d.total(), d.total())};
  for (std::size_t i = 0; i < d.total(); ++i) {
    const Cell from = k.codec.decode(i);
    for (std::size_t j = 0; j < d.total(); ++j) {
      const Cell to = k.codec.decode(j);
      k.matrix(i, j) = y_given_xz.at({from.x, to.y, from.z}) *
                       z_given_xy.at({from.x, to.y, to.z}) * x_given_z.at(to);
    }
  }
  return k;
}

/// (X, Y)-marginal chain: sum_z Pi_{Z|XY}(z | x,y) Pi_{XY|Z}(x',y' | z).
inline Kernel marginal_xy_kernel(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const detail::BlockTables t(pmf);
  const StateCodec codec = codec_xy(d);
  Kernel k{codec, Eigen::MatrixXd::Zero(codec.size(), codec.size())};
  for (std::size_t i = 0; i < codec.size(); ++i) {
    const Cell from = codec.decode(i);
    for (std::size_t j = 0; j < codec.size(); ++j) {
      const Cell to = codec.decode(j);
      double s = 0.0;
      for (std::size_t z = 0; z < d.nz; ++z)
        s += t.z_given_xy.at({from.x, from.y, z}) * t.xy_given_z.at({to.x, to.y, z});
      k.matrix(i, j) = s;
    }
  }
  return k;
}

/// Z-marginal chain: sum_{x',y'} Pi_{XY|Z}(x',y' | z) Pi_{Z|XY}(z' | x',y').
inline Kernel marginal_z_kernel(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  const detail::BlockTables t(pmf);
  Kernel k{codec_z(d), Eigen::MatrixXd::Zero(d.nz, d.nz)};
  for (std::size_t z = 0; z < d.nz; ++z)
    for (std::size_t zn = 0; zn < d.nz; ++zn) {
      double s = 0.0;
      for (std::size_t x = 0; x < d.nx; ++x)
        for (std::size_t y = 0; y < d.ny; ++y)
          s += t.xy_given_z.at({x, y, z}) * t.z_given_xy.at({x, y, zn});
      k.matrix(z, zn) = s;
    }
  return k;
}

/// nu_z on codec (Y, Z, X): Z = z, X ~ Pi_{X|Z}(. | z), Y pinned at index 0
/// (the out-of-order kernel never reads Y).
inline InitialMeasure nu_z(const JointPmf3& pmf, std::size_t z) {
  const Dims& d = pmf.dims();
  if (z >= d.nz) throw std::invalid_argument("nu_z: z index " + std::to_string(z) + " out of range");
  const ConditionalTable x_given_z = conditional(pmf, {Var::X}, {Var::Z});
  InitialMeasure m{codec_yzx(d), ProbVector::Zero(d.total())};
  for (std::size_t x = 0; x < d.nx; ++x)
    m.vector(m.codec.encode({x, 0, z})) = x_given_z.at({x, 0, z});
  return m;
}

/// nu_{(x,z)} on codec (X, Y): X = x, Y ~ Pi_{Y|XZ}(. | x,z).
inline InitialMeasure nu_xz(const JointPmf3& pmf, std::size_t x, std::size_t z) {
  const Dims& d = pmf.dims();
  if (x >= d.nx || z >= d.nz)
    throw std::invalid_argument("nu_xz: index (" + std::to_string(x) + ", " + std::to_string(z) +
                                ") out of range");
  const ConditionalTable y_given_xz = conditional(pmf, {Var::Y}, {Var::X, Var::Z});
  InitialMeasure m{codec_xy(d), ProbVector::Zero(d.nx * d.ny)};
  for (std::size_t y = 0; y < d.ny; ++y) m.vector(m.codec.encode({x, y, z})) = y_given_xz.at({x, y, z});
  return m;
}

/// Lift of nu_{(x,z)} to codec (Z, X, Y) with Z pinned at index 0 (the
/// rotated kernel never reads Z).
inline InitialMeasure lift_to_zxy(const InitialMeasure& nu) {
  const Dims& d = nu.codec.dims();
  if (!(nu.codec == codec_xy(d))) throw std::invalid_argument("lift_to_zxy: expected an (X, Y) measure");
  InitialMeasure m{codec_zxy(d), ProbVector::Zero(d.total())};
  for (std::size_t i = 0; i < nu.codec.size(); ++i) {
    const Cell c = nu.codec.decode(i);  // z decodes to 0
    m.vector(m.codec.encode(c)) = nu.vector(i);
  }
  return m;
}

/// Dense CSV: header row of state labels, then one row per current state.
inline void write_csv(std::ostream& os, const Kernel& k) {
  char buf[32];
  os << "state";
  for (std::size_t j = 0; j < k.size(); ++j) os << ',' << k.codec.label(j);
  os << '\n';
  for (std::size_t i = 0; i < k.size(); ++i) {
    os << k.codec.label(i);
    for (std::size_t j = 0; j < k.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", k.matrix(i, j));
      os << ',' << buf;
    }
    os << '\n';
  }
}

}  // namespace blockgibbs
