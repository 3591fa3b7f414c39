#include <blockgibbs/philox.hpp>

#include <gtest/gtest.h>

#include <set>

using blockgibbs::Philox4x32;
using blockgibbs::Substream;

// Known-answer vectors published with the Random123 distribution (philox4x32_10).
TEST(Philox, KnownAnswerZero) {
  const auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes) {
  const auto out = Philox4x32::apply({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                     {0xffffffffu, 0xffffffffu});
  EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi) {
  const auto out = Philox4x32::apply({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                     {0xa4093822u, 0x299f31d0u});
  EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(Philox, CompileTimeEvaluable) {
  constexpr auto out = Philox4x32::apply({0, 0, 0, 0}, {0, 0});
  static_assert(out[0] == 0x6627e8d5u);
}

TEST(Substream, SameAddressSameDraws) {
  Substream a(99, 5, 3), b(99, 5, 3);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Substream, DistinctAddressesDiffer) {
  std::set<std::uint64_t> first;
  for (std::uint64_t seed : {1, 2})
    for (std::uint64_t it : {1, 2})
      for (std::uint32_t tag : {1u, 2u}) first.insert(Substream(seed, it, tag).next_u64());
  EXPECT_EQ(first.size(), 8u);
}

TEST(Substream, UniformOpenInterval) {
  Substream s(7, 1, 1);
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    const double u = s.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.005);
}

TEST(Substream, NormalMoments) {
  Substream s(11, 1, 2);
  double m1 = 0, m2 = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = s.standard_normal();
    m1 += z;
    m2 += z * z;
  }
  EXPECT_NEAR(m1 / n, 0.0, 0.01);
  EXPECT_NEAR(m2 / n, 1.0, 0.02);
}
