#pragma once

// Exact analysis of the finite kernels: stationary laws, total variation
// curves, spectra, and checkers for the two inequality chains relating the
// block and out-of-order samplers and for their common convergence rate.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "finite_model.hpp"
#include "kernels.hpp"

namespace blockgibbs {

namespace tol {
inline constexpr double kUnitEigenvalue = 1e-9;
inline constexpr double kInequalitySlack = 1e-12;
inline constexpr double kSpectral = 1e-8;
// Eigenvalues past the common rank must vanish; defective zero eigenvalues
// are only resolved to about sqrt(machine epsilon) by a dense solver.
inline constexpr double kZeroEigenvalue = 1e-6;
inline constexpr double kStationaryResidual = 1e-12;
inline constexpr double kStationaryMatch = 1e-10;
inline constexpr double kMarginal = 1e-14;
inline constexpr double kRowSum = 1e-12;
}  // namespace tol

inline double l1(const ProbVector& a, const ProbVector& b) { return (a - b).cwiseAbs().sum(); }

inline double tv(const ProbVector& a, const ProbVector& b) {
  if (a.size() != b.size()) throw std::invalid_argument("tv: shape mismatch");
  return 0.5 * l1(a, b);
}

inline ProbVector point_mass(std::size_t n, std::size_t state) {
  ProbVector v = ProbVector::Zero(static_cast<Eigen::Index>(n));
  v(static_cast<Eigen::Index>(state)) = 1.0;
  return v;
}

/// Solves v^T M = v^T, sum(v) = 1 by least squares on (M^T - I) with the
/// normalization row appended. Throws when the unit eigenvalue is repeated.
inline ProbVector stationary(const Kernel& k) {
  const Eigen::Index n = k.matrix.rows();
  const Eigen::MatrixXd a = k.matrix.transpose() - Eigen::MatrixXd::Identity(n, n);
  if (n > 1) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> rank_probe(a);
    rank_probe.setThreshold(1e-10);
    if (rank_probe.rank() < n - 1)
      throw std::domain_error("stationary: unit eigenvalue has multiplicity " +
                              std::to_string(n - rank_probe.rank()) + " (reducible kernel)");
  }
  Eigen::MatrixXd aug(n + 1, n);
  aug.topRows(n) = a;
  aug.row(n).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs(n) = 1.0;
  Eigen::VectorXd v = aug.colPivHouseholderQr().solve(rhs);
  // Round-off can leave entries of order -1e-17 on states with tiny mass.
  v = v.cwiseMax(0.0);
  v /= v.sum();
  return v.transpose();
}

inline double stationary_residual(const Kernel& k, const ProbVector& v) {
  return l1(v * k.matrix, v);
}

/// tv(init M^n, target) for n = 0..nmax, by repeated vector-matrix products.
inline std::vector<double> tv_curve(const Kernel& k, const ProbVector& init, const ProbVector& target,
                                    std::size_t nmax) {
  if (nmax < 1) throw std::invalid_argument("tv_curve: nmax must be >= 1");
  if (init.size() != k.matrix.rows() || target.size() != k.matrix.rows())
    throw std::invalid_argument("tv_curve: measure does not match kernel size");
  std::vector<double> out;
  out.reserve(nmax + 1);
  ProbVector cur = init;
  out.push_back(tv(cur, target));
  for (std::size_t n = 1; n <= nmax; ++n) {
    cur = cur * k.matrix;
    out.push_back(tv(cur, target));
  }
  return out;
}

inline std::vector<double> tv_curve(const Kernel& k, std::size_t start_state, const ProbVector& target,
                                    std::size_t nmax) {
  return tv_curve(k, point_mass(k.size(), start_state), target, nmax);
}

struct SpectrumSummary {
  std::vector<std::complex<double>> eigenvalues;  // sorted by modulus, descending
  std::vector<double> moduli;
  double slem = 0.0;
  std::size_t unit_multiplicity = 0;
};

/// Full dense eigendecomposition. slem is the largest modulus among the
/// eigenvalues farther than `unit_tol` from 1.
inline SpectrumSummary spectrum(const Kernel& k, double unit_tol = tol::kUnitEigenvalue) {
  if (k.matrix.rows() != k.matrix.cols()) throw std::invalid_argument("spectrum: matrix not square");
  Eigen::EigenSolver<Eigen::MatrixXd> solver(k.matrix, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) throw std::runtime_error("spectrum: eigensolver failed");
  SpectrumSummary s;
  const auto& ev = solver.eigenvalues();
  s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
  std::stable_sort(s.eigenvalues.begin(), s.eigenvalues.end(),
                   [](auto a, auto b) { return std::abs(a) > std::abs(b); });
  for (auto lambda : s.eigenvalues) {
    s.moduli.push_back(std::abs(lambda));
    if (std::abs(lambda - 1.0) <= unit_tol)
      ++s.unit_multiplicity;
    else
      s.slem = std::max(s.slem, std::abs(lambda));
  }
  return s;
}

// ---------------------------------------------------------------------------
// Inequality chains

struct InequalityRow {
  std::size_t n = 0;
  double lhs = 0.0, mid = 0.0, rhs = 0.0;  // values at the start state closest to a violation
  std::string state;                        // label of that start state
  bool has_verdict = true;
  bool ok = true;
};

struct Violation {
  int chain = 0;        // 1 or 2
  int inequality = 0;   // 1 = lhs <= mid, 2 = mid <= rhs
  std::size_t n = 0;
  std::string state;
  double excess = 0.0;
};

struct Prop1Report {
  std::size_t nmax = 0;
  std::vector<InequalityRow> chain1;  // n = 2..nmax; verdicts for n >= 3
  std::vector<InequalityRow> chain2;  // n = 1..nmax
  bool chain1_ok = true;
  bool chain2_ok = true;
  double max_excess = -std::numeric_limits<double>::infinity();  // max over checked of the two gaps
  std::vector<Violation> violations;

  bool ok() const { return chain1_ok && chain2_ok; }
};

namespace detail {

// Folds one (start state, n) triple into the per-n row and the report.
inline void record_triple(Prop1Report& r, InequalityRow& row, int chain, const std::string& state,
                          double lhs, double mid, double rhs, bool checked, bool first) {
  const double excess = std::max(lhs - mid, mid - rhs);
  const double row_excess = std::max(row.lhs - row.mid, row.mid - row.rhs);
  if (first || excess > row_excess) {
    row.lhs = lhs;
    row.mid = mid;
    row.rhs = rhs;
    row.state = state;
  }
  if (!checked) return;
  r.max_excess = std::max(r.max_excess, excess);
  if (lhs - mid > tol::kInequalitySlack)
    r.violations.push_back({chain, 1, row.n, state, lhs - mid});
  if (mid - rhs > tol::kInequalitySlack)
    r.violations.push_back({chain, 2, row.n, state, mid - rhs});
  if (lhs - mid > tol::kInequalitySlack || mid - rhs > tol::kInequalitySlack) row.ok = false;
}

}  // namespace detail

/// Checks, from every start state,
///   chain 1:  |K^n(s) - Pi| <= |K_Z^{n-1}(z) - Pi_Z| <= |nu_z K*^{n-2} - Pi*|,   n = 3..nmax
///   chain 2:  |K*^n(s) - Pi*| <= |nu_(x,z) K_XY^{n-1} - Pi_XY| <= |nu_(x,z) Kdag^{n-1} - Pi|,  n = 1..nmax
/// Chain 1 at n = 2 is reported without a verdict.
inline Prop1Report check_prop1(const JointPmf3& pmf, std::size_t nmax) {
  if (nmax < 3) throw std::invalid_argument("check_prop1: nmax must be >= 3");
  const Dims& d = pmf.dims();
  const JointPmf3 star = pi_star(pmf);

  const Kernel k = block_kernel(pmf);
  const Kernel kz = marginal_z_kernel(pmf);
  const Kernel kstar = ooo_kernel(pmf);
  const Kernel kxy = marginal_xy_kernel(pmf);
  const Kernel kdag = rotated_block_kernel(pmf);

  const ProbVector pi_xyz = as_vector(pmf, k.codec);
  const ProbVector pi_z = as_vector(marginal(pmf, {Var::Z}), kz.codec);
  const ProbVector star_yzx = as_vector(star, kstar.codec);
  const ProbVector pi_xy = as_vector(marginal(pmf, {Var::X, Var::Y}), kxy.codec);
  const ProbVector pi_zxy = as_vector(pmf, kdag.codec);

  Prop1Report r;
  r.nmax = nmax;

  std::vector<std::vector<double>> kz_curves, nu_z_curves;
  for (std::size_t z = 0; z < d.nz; ++z) {
    kz_curves.push_back(tv_curve(kz, z, pi_z, nmax));
    nu_z_curves.push_back(tv_curve(kstar, nu_z(pmf, z).vector, star_yzx, nmax));
  }
  for (std::size_t n = 2; n <= nmax; ++n) r.chain1.push_back({.n = n, .has_verdict = n >= 3});
  for (std::size_t s = 0; s < k.size(); ++s) {
    const Cell c = k.codec.decode(s);
    const auto lhs = tv_curve(k, s, pi_xyz, nmax);
    for (auto& row : r.chain1)
      detail::record_triple(r, row, 1, k.codec.label(s), lhs[row.n], kz_curves[c.z][row.n - 1],
                            nu_z_curves[c.z][row.n - 2], row.has_verdict, s == 0);
  }

  std::vector<std::vector<double>> kxy_curves(d.nx * d.nz), kdag_curves(d.nx * d.nz);
  for (std::size_t x = 0; x < d.nx; ++x)
    for (std::size_t z = 0; z < d.nz; ++z) {
      const InitialMeasure nu = nu_xz(pmf, x, z);
      kxy_curves[x * d.nz + z] = tv_curve(kxy, nu.vector, pi_xy, nmax);
      kdag_curves[x * d.nz + z] = tv_curve(kdag, lift_to_zxy(nu).vector, pi_zxy, nmax);
    }
  for (std::size_t n = 1; n <= nmax; ++n) r.chain2.push_back({.n = n});
  for (std::size_t s = 0; s < kstar.size(); ++s) {
    const Cell c = kstar.codec.decode(s);
    const auto lhs = tv_curve(kstar, s, star_yzx, nmax);
    const std::size_t xz = c.x * d.nz + c.z;
    for (auto& row : r.chain2)
      detail::record_triple(r, row, 2, kstar.codec.label(s), lhs[row.n], kxy_curves[xz][row.n - 1],
                            kdag_curves[xz][row.n - 1], true, s == 0);
  }

  for (const auto& row : r.chain1) r.chain1_ok = r.chain1_ok && row.ok;
  for (const auto& row : r.chain2) r.chain2_ok = r.chain2_ok && row.ok;
  return r;
}

// ---------------------------------------------------------------------------
// Convergence rates

struct NamedSpectrum {
  std::string kernel;
  SpectrumSummary spectrum;
};

struct RateReport {
  std::vector<NamedSpectrum> spectra;  // K, Kdagger, K_XY, K_Z, K*
  std::size_t common_rank = 0;         // min(|Z|, |X||Y|)
  std::vector<double> common_nonzero;  // leading eigenvalue moduli of K_Z
  double max_nonzero_mismatch = 0.0;   // across K, Kdagger, K_XY, K_Z
  double max_residual_zero = 0.0;      // largest modulus past the common rank
  double slem_mismatch_ooo = 0.0;      // |slem(K*) - slem(K)|
  bool ok = false;

  double slem(const std::string& name) const {
    for (const auto& s : spectra)
      if (s.kernel == name) return s.spectrum.slem;
    throw std::out_of_range("no spectrum for kernel " + name);
  }
};

/// The four block-structured kernels factor through the same pair of
/// conditional operators, so their nonzero spectra coincide; the
/// out-of-order kernel shares their slem. The nonzero multiset is taken to
/// be the leading min(|Z|, |X||Y|) eigenvalues.
inline RateReport check_rate_equality(const JointPmf3& pmf) {
  const Dims& d = pmf.dims();
  RateReport r;
  r.spectra = {{"K", spectrum(block_kernel(pmf))},
               {"Kdagger", spectrum(rotated_block_kernel(pmf))},
               {"K_XY", spectrum(marginal_xy_kernel(pmf))},
               {"K_Z", spectrum(marginal_z_kernel(pmf))},
               {"Kstar", spectrum(ooo_kernel(pmf))}};
  r.common_rank = std::min(d.nz, d.nx * d.ny);
  const auto& reference = r.spectra[3].spectrum;
  r.common_nonzero.assign(reference.moduli.begin(), reference.moduli.begin() + r.common_rank);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto& s = r.spectra[i].spectrum;
    for (std::size_t j = 0; j < s.eigenvalues.size(); ++j) {
      if (j < r.common_rank)
        r.max_nonzero_mismatch =
            std::max(r.max_nonzero_mismatch, std::abs(s.eigenvalues[j] - reference.eigenvalues[j]));
      else
        r.max_residual_zero = std::max(r.max_residual_zero, s.moduli[j]);
    }
  }
  r.slem_mismatch_ooo = std::abs(r.spectra[4].spectrum.slem - r.spectra[0].spectrum.slem);
  r.ok = r.max_nonzero_mismatch <= tol::kSpectral && r.max_residual_zero <= tol::kZeroEigenvalue &&
         r.slem_mismatch_ooo <= tol::kSpectral;
  for (const auto& s : r.spectra) r.ok = r.ok && s.spectrum.unit_multiplicity == 1;
  return r;
}

// ---------------------------------------------------------------------------
// Invariance and marginals

struct InvarianceResiduals {
  double pi_star_residual = 0.0;  // |Pi* K* - Pi*|_1
  double pi_residual = 0.0;       // |Pi K* - Pi|_1

  bool ok() const { return pi_star_residual <= tol::kStationaryResidual; }
};

inline InvarianceResiduals check_pistar_invariance(const JointPmf3& pmf) {
  const Kernel kstar = ooo_kernel(pmf);
  const ProbVector star = as_vector(pi_star(pmf), kstar.codec);
  const ProbVector pi = as_vector(pmf, kstar.codec);
  return {l1(star * kstar.matrix, star), l1(pi * kstar.matrix, pi)};
}

struct MarginalAgreement {
  VarSet vars;
  double tv = 0.0;
};

inline const std::vector<VarSet>& agreement_subsets() {
  static const std::vector<VarSet> subsets{{Var::X},         {Var::Y},         {Var::Z},
                                           {Var::X, Var::Z}, {Var::Y, Var::Z}, {Var::X, Var::Y}};
  return subsets;
}

/// tv(Pi, Pi*) on X, Y, Z, XZ, YZ (all preserved) and XY (generally not).
inline std::vector<MarginalAgreement> check_marginal_agreement(const JointPmf3& pmf) {
  const JointPmf3 star = pi_star(pmf);
  std::vector<MarginalAgreement> out;
  for (VarSet s : agreement_subsets()) out.push_back({s, tv(marginal(pmf, s), marginal(star, s))});
  return out;
}

inline bool marginals_preserved(const std::vector<MarginalAgreement>& table) {
  for (const auto& m : table)
    if (!(m.vars == VarSet{Var::X, Var::Y}) && m.tv > tol::kMarginal) return false;
  return true;
}

inline const std::array<std::array<Var, 3>, 6>& all_orderings() {
  static const std::array<std::array<Var, 3>, 6> orders{{{Var::X, Var::Y, Var::Z},
                                                         {Var::X, Var::Z, Var::Y},
                                                         {Var::Y, Var::X, Var::Z},
                                                         {Var::Y, Var::Z, Var::X},
                                                         {Var::Z, Var::X, Var::Y},
                                                         {Var::Z, Var::Y, Var::X}}};
  return orders;
}

}  // namespace blockgibbs
