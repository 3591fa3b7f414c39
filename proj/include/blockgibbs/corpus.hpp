#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "finite_model.hpp"

namespace blockgibbs {

struct CorpusEntry {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  JointPmf3 pmf;
};

inline constexpr std::uint64_t kCorpusBaseSeed = 20190417;
inline constexpr double kCorpusFloor = 0.005;

/// Seeded test corpus; dims cycle through 2x2x2, 3x2x2, 3x3x3, 4x4x4 and
/// entry i uses seed base_seed + i.
inline std::vector<CorpusEntry> seeded_corpus(std::size_t count = 50,
                                              std::uint64_t base_seed = kCorpusBaseSeed,
                                              double floor = kCorpusFloor) {
  static constexpr std::array<Dims, 4> kShapes{{{2, 2, 2}, {3, 2, 2}, {3, 3, 3}, {4, 4, 4}}};
  std::vector<CorpusEntry> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back({i, base_seed + i, random_pmf(kShapes[i % kShapes.size()], base_seed + i, floor)});
  return out;
}

/// 2x2x1 pmf with p(x, y) = [[0.4, 0.1], [0.1, 0.4]]: X and Y dependent,
/// Z constant, so Pi* decouples X from Y.
inline JointPmf3 anti_example_pmf() { return JointPmf3({2, 2, 1}, {0.4, 0.1, 0.1, 0.4}); }

}  // namespace blockgibbs
