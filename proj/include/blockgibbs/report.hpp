#pragma once

// Per-pmf analysis bundle and its JSON / CSV renderings.

#include <algorithm>
#include <cstdint>
#include <future>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "analysis.hpp"
#include "finite_model.hpp"
#include "io.hpp"
#include "kernels.hpp"

namespace blockgibbs {

struct CheckSelection {
  bool prop1 = true;
  bool rates = true;
  bool invariance = true;
  bool marginals = true;

  bool operator==(const CheckSelection&) const = default;
};

struct KernelDiagnostics {
  std::string kernel;
  std::string codec;
  double row_sum_error = 0.0;
  double stationary_residual = 0.0;  // |v M - v|_1 at the solved stationary v
  std::string expected_law;          // "Pi" or "Pi*"
  double stationary_error = 0.0;     // |v - expected|_1
  bool ok = false;
};

struct ChainReport {
  Dims dims;
  CheckSelection checks;
  std::vector<KernelDiagnostics> kernels;
  std::optional<InvarianceResiduals> invariance;
  std::optional<Prop1Report> prop1;
  std::optional<RateReport> rates;
  std::optional<std::vector<MarginalAgreement>> marginals;

  /// Human-readable reasons the selected checks failed; empty when all pass.
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& k : kernels)
      if (!k.ok) out.push_back("stationary law of " + k.kernel + " does not match " + k.expected_law);
    if (invariance && !invariance->ok()) out.push_back("Pi* is not invariant under K*");
    if (prop1) {
      for (const auto& v : prop1->violations)
        out.push_back("inequality chain " + std::to_string(v.chain) + " (" +
                      (v.inequality == 1 ? "lhs <= mid" : "mid <= rhs") + ") fails at n=" +
                      std::to_string(v.n) + " from state " + v.state + " by " + format_double(v.excess));
    }
    if (rates && !rates->ok) out.push_back("spectra of the five kernels disagree");
    if (marginals && !marginals_preserved(*marginals)) out.push_back("Pi* changes a preserved marginal");
    return out;
  }
  bool ok() const { return failures().empty(); }
};

namespace detail {

inline KernelDiagnostics diagnose(const std::string& name, const Kernel& k, const ProbVector& expected,
                                  const std::string& law) {
  KernelDiagnostics d{name, k.codec.name(), k.max_row_sum_error()};
  const ProbVector v = stationary(k);
  d.stationary_residual = stationary_residual(k, v);
  d.expected_law = law;
  d.stationary_error = l1(v, expected);
  d.ok = d.row_sum_error <= tol::kRowSum && d.stationary_residual <= tol::kStationaryResidual &&
         d.stationary_error <= tol::kStationaryMatch;
  return d;
}

inline std::string ordering_name(const std::array<Var, 3>& o) {
  std::string s = "gibbs_";
  for (Var v : o) s += static_cast<char>(std::toupper(var_letter(v)));
  return s;
}

}  // namespace detail

inline ChainReport analyze(const JointPmf3& pmf, std::size_t nmax, const CheckSelection& checks) {
  ChainReport r;
  r.dims = pmf.dims();
  r.checks = checks;
  if (checks.invariance) {
    const JointPmf3 star = pi_star(pmf);
    const Kernel k = block_kernel(pmf);
    const Kernel kdag = rotated_block_kernel(pmf);
    const Kernel kstar = ooo_kernel(pmf);
    const Kernel kxy = marginal_xy_kernel(pmf);
    const Kernel kz = marginal_z_kernel(pmf);
    r.kernels.push_back(detail::diagnose("K", k, as_vector(pmf, k.codec), "Pi"));
    r.kernels.push_back(detail::diagnose("Kdagger", kdag, as_vector(pmf, kdag.codec), "Pi"));
    r.kernels.push_back(detail::diagnose("Kstar", kstar, as_vector(star, kstar.codec), "Pi*"));
    r.kernels.push_back(
        detail::diagnose("K_XY", kxy, as_vector(marginal(pmf, {Var::X, Var::Y}), kxy.codec), "Pi_XY"));
    r.kernels.push_back(detail::diagnose("K_Z", kz, as_vector(marginal(pmf, {Var::Z}), kz.codec), "Pi_Z"));
    for (const auto& o : all_orderings()) {
      const Kernel g = gibbs_kernel(pmf, o);
      r.kernels.push_back(detail::diagnose(detail::ordering_name(o), g, as_vector(pmf, g.codec), "Pi"));
    }
    r.invariance = check_pistar_invariance(pmf);
  }
  if (checks.prop1) r.prop1 = check_prop1(pmf, nmax);
  if (checks.rates) r.rates = check_rate_equality(pmf);
  if (checks.marginals) r.marginals = check_marginal_agreement(pmf);
  return r;
}

/// Analyzes independent pmfs on worker threads; results keep input order.
inline std::vector<ChainReport> analyze_all(const std::vector<JointPmf3>& pmfs, std::size_t nmax,
                                            const CheckSelection& checks, unsigned workers = 0) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<ChainReport> out(pmfs.size());
  for (std::size_t start = 0; start < pmfs.size(); start += workers) {
    std::vector<std::future<ChainReport>> batch;
    const std::size_t stop = std::min(pmfs.size(), start + workers);
    for (std::size_t i = start; i < stop; ++i)
      batch.push_back(std::async(std::launch::async, [&, i] { return analyze(pmfs[i], nmax, checks); }));
    for (std::size_t i = start; i < stop; ++i) out[i] = batch[i - start].get();
  }
  return out;
}

inline Json spectrum_to_json(const SpectrumSummary& s) {
  Json eig = Json::array();
  for (auto lambda : s.eigenvalues) eig.push_back({lambda.real(), lambda.imag()});
  return Json{{"slem", s.slem}, {"unit_multiplicity", s.unit_multiplicity}, {"moduli", s.moduli},
              {"eigenvalues", eig}};
}

inline Json row_to_json(const InequalityRow& row) {
  Json j{{"n", row.n}, {"lhs", row.lhs}, {"mid", row.mid}, {"rhs", row.rhs}, {"state", row.state}};
  j["ok"] = row.has_verdict ? Json(row.ok) : Json(nullptr);
  return j;
}

inline Json to_json(const ChainReport& r) {
  Json j;
  j["dims"] = {r.dims.nx, r.dims.ny, r.dims.nz};
  j["checks"] = {{"prop1", r.checks.prop1},
                 {"rates", r.checks.rates},
                 {"invariance", r.checks.invariance},
                 {"marginals", r.checks.marginals}};
  if (!r.kernels.empty()) {
    Json ks = Json::array();
    for (const auto& k : r.kernels)
      ks.push_back({{"kernel", k.kernel},
                    {"codec", k.codec},
                    {"row_sum_error", k.row_sum_error},
                    {"stationary_residual", k.stationary_residual},
                    {"expected_law", k.expected_law},
                    {"stationary_error_l1", k.stationary_error},
                    {"ok", k.ok}});
    j["kernels"] = ks;
  }
  if (r.invariance)
    j["invariance"] = {{"pi_star_residual_l1", r.invariance->pi_star_residual},
                       {"pi_residual_l1", r.invariance->pi_residual},
                       {"ok", r.invariance->ok()}};
  if (r.prop1) {
    Json c1 = Json::array(), c2 = Json::array(), viol = Json::array();
    for (const auto& row : r.prop1->chain1) c1.push_back(row_to_json(row));
    for (const auto& row : r.prop1->chain2) c2.push_back(row_to_json(row));
    for (const auto& v : r.prop1->violations)
      viol.push_back({{"chain", v.chain}, {"inequality", v.inequality}, {"n", v.n}, {"state", v.state},
                      {"excess", v.excess}});
    j["prop1"] = {{"nmax", r.prop1->nmax},
                  {"chain1_ok", r.prop1->chain1_ok},
                  {"chain2_ok", r.prop1->chain2_ok},
                  {"max_excess", r.prop1->max_excess},
                  {"slack", tol::kInequalitySlack},
                  {"violations", viol},
                  {"chain1", c1},
                  {"chain2", c2}};
  }
  if (r.rates) {
    Json spectra = Json::object();
    for (const auto& s : r.rates->spectra) spectra[s.kernel] = spectrum_to_json(s.spectrum);
    j["rates"] = {{"common_rank", r.rates->common_rank},
                  {"common_nonzero", r.rates->common_nonzero},
                  {"max_nonzero_mismatch", r.rates->max_nonzero_mismatch},
                  {"max_residual_zero", r.rates->max_residual_zero},
                  {"slem_mismatch_ooo", r.rates->slem_mismatch_ooo},
                  {"ok", r.rates->ok},
                  {"spectra", spectra}};
  }
  if (r.marginals) {
    Json m = Json::object();
    for (const auto& row : *r.marginals) m[row.vars.name()] = row.tv;
    j["marginals"] = {{"tv", m}, {"ok", marginals_preserved(*r.marginals)}};
  }
  j["failures"] = r.failures();
  j["ok"] = r.ok();
  return j;
}

/// Columns: n, tv_block_from_worst_state, tv_Kz, tv_ooo_from_nu_z, chain1_ok,
/// tv_ooo_from_state, tv_Kxy_from_nu, tv_Kdagger_from_nu, chain2_ok.
/// Chain 1 is undefined at n = 1 (blank) and unverified at n = 2 ("na").
/// With `pmf_index` set, a leading pmf column is written.
inline void write_tv_curves_csv(std::ostream& os, const Prop1Report& r, bool header = true,
                                std::optional<std::size_t> pmf_index = std::nullopt) {
  if (header) {
    if (pmf_index) os << "pmf,";
    os << "n,tv_block_from_worst_state,tv_Kz,tv_ooo_from_nu_z,chain1_ok,"
          "tv_ooo_from_state,tv_Kxy_from_nu,tv_Kdagger_from_nu,chain2_ok\n";
  }
  for (const auto& row2 : r.chain2) {
    if (pmf_index) os << *pmf_index << ',';
    os << row2.n << ',';
    const auto it = std::find_if(r.chain1.begin(), r.chain1.end(),
                                 [&](const InequalityRow& row) { return row.n == row2.n; });
    if (it == r.chain1.end())
      os << ",,,";
    else
      os << format_double(it->lhs) << ',' << format_double(it->mid) << ',' << format_double(it->rhs) << ','
         << (it->has_verdict ? (it->ok ? "true" : "false") : "na");
    os << ',' << format_double(row2.lhs) << ',' << format_double(row2.mid) << ','
       << format_double(row2.rhs) << ',' << (row2.ok ? "true" : "false") << '\n';
  }
}

}  // namespace blockgibbs
