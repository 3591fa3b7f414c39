#pragma once

#include <blockgibbs/corpus.hpp>
#include <blockgibbs/finite_model.hpp>

#include <vector>

#include "oracles.hpp"

namespace testing_helpers {

inline oracle::Raw raw(const blockgibbs::JointPmf3& p) {
  const auto& d = p.dims();
  return {d.nx, d.ny, d.nz, std::vector<double>(p.values().begin(), p.values().end())};
}

inline const std::vector<blockgibbs::CorpusEntry>& corpus() {
  static const auto c = blockgibbs::seeded_corpus();
  return c;
}

inline blockgibbs::JointPmf3 product_example() {
  const std::vector<double> px{0.3, 0.7}, py{0.2, 0.5, 0.3}, pz{0.6, 0.4};
  return blockgibbs::product_pmf(px, py, pz);
}

}  // namespace testing_helpers
