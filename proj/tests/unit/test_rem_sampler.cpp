#include <blockgibbs/rem_sampler.hpp>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "oracles.hpp"

using namespace blockgibbs::rem;

namespace {

RemData six_obs() { return {{-1.2, 0.4, 2.1, 0.9, -0.3, 1.6}, 1.0}; }

double combined_z(const Estimate& a, const Estimate& b) {
  return std::abs(a.mean - b.mean) / std::sqrt(a.se * a.se + b.se * b.se);
}

}  // namespace

TEST(Params, IgWorkedExamples) {
  const std::vector<double> ones{1, 1, 1, 1};
  const IgParams p = ig_params(ones, {1, 1});
  EXPECT_EQ(p.shape, 2.5);
  EXPECT_EQ(p.rate, 1.0);
  const std::vector<double> two{0, 2};
  const IgParams q = ig_params(two, {2, 3});
  EXPECT_EQ(q.shape, 2.5);
  EXPECT_EQ(q.rate, 4.0);
}

TEST(Params, IgTranslationInvariant) {
  const std::vector<double> t{0.3, -1.1, 2.4, 0.8, 1.9};
  const IgParams base = ig_params(t, {1.5, 0.7});
  for (double c : {-10.0, 0.5, 3.0, 100.0}) {
    std::vector<double> s = t;
    for (double& v : s) v += c;
    const IgParams shifted = ig_params(s, {1.5, 0.7});
    EXPECT_EQ(shifted.shape, base.shape);
    EXPECT_NEAR(shifted.rate, base.rate, 1e-12 * base.rate);
  }
}

TEST(Params, IgRateNeverBelowB) {
  const std::vector<double> same{2, 2, 2};
  EXPECT_EQ(ig_params(same, {1, 0.25}).rate, 0.25);
  const std::vector<double> one{1};
  EXPECT_THROW(ig_params(one, {1, 1}), std::invalid_argument);
}

TEST(Params, MuWorkedExample) {
  const std::vector<double> ones{1, 1, 1, 1};
  const NormalParams p = mu_params(ones, 4);
  EXPECT_EQ(p.mean, 1.0);
  EXPECT_EQ(p.variance, 1.0);
  EXPECT_LT(mu_params(ones, 1e-200).variance, 1e-199);
}

TEST(Params, ThetaWorkedExamples) {
  const RemData d{{3.0, -2.0}, 1.5};
  const NormalParams p = theta_params(0.0, 1.5, d, 0);
  EXPECT_EQ(p.mean, 1.5);
  EXPECT_EQ(p.variance, 0.75);
  EXPECT_NEAR(theta_params(0.7, 1e12, d, 1).mean, -2.0, 1e-10);
  const NormalParams small = theta_params(0.7, 1e-12, d, 1);
  EXPECT_NEAR(small.mean, 0.7, 1e-10);
  EXPECT_LT(small.variance, 1e-11);
}

TEST(Params, ThetaConvexBounds) {
  const RemData d = six_obs();
  for (double mu : {-3.0, 0.0, 0.5, 4.0})
    for (double A : {1e-3, 0.2, 1.0, 7.0, 500.0})
      for (std::size_t i = 0; i < d.m(); ++i) {
        const NormalParams p = theta_params(mu, A, d, i);
        EXPECT_GE(p.mean, std::min(mu, d.y[i]) - 1e-15);
        EXPECT_LE(p.mean, std::max(mu, d.y[i]) + 1e-15);
        EXPECT_GT(p.variance, 0.0);
        EXPECT_LT(p.variance, std::min(A, d.V));
      }
}

TEST(SampleIg, MonteCarloMean) {
  // IG(3, 2) has mean 2 / (3 - 1) = 1 and variance 1.
  double sum = 0;
  const int n = 1000000;
  for (int i = 1; i <= n; ++i) sum += sample_ig(3.0, 2.0, {std::uint64_t(i), StepLabel::a()}, 17);
  EXPECT_NEAR(sum / n, 1.0, 0.01);
}

TEST(SampleIg, KolmogorovSmirnov) {
  for (auto [shape, rate] : {std::pair{3.0, 2.0}, std::pair{0.6, 1.3}, std::pair{12.5, 40.0}}) {
    std::vector<double> xs;
    for (int i = 1; i <= 100000; ++i) xs.push_back(sample_ig(shape, rate, {std::uint64_t(i), StepLabel::a()}, 5));
    // P(W <= w) = P(G >= rate / w) for G ~ Gamma(shape, 1)
    const double d =
        oracle::ks_statistic(xs, [&](double w) { return boost::math::gamma_q(shape, rate / w); });
    EXPECT_GT(oracle::ks_p_value(d, xs.size()), 0.001) << "shape " << shape << " D " << d;
  }
}

TEST(SampleIg, DeterministicAndKeyed) {
  const StreamKey k{7, StepLabel::a()};
  EXPECT_EQ(sample_ig(2.5, 1.0, k, 3), sample_ig(2.5, 1.0, k, 3));
  EXPECT_NE(sample_ig(2.5, 1.0, k, 3), sample_ig(2.5, 1.0, {8, StepLabel::a()}, 3));
  EXPECT_NE(sample_ig(2.5, 1.0, k, 3), sample_ig(2.5, 1.0, k, 4));
}

TEST(SampleIg, RejectsNonpositive) {
  EXPECT_THROW(sample_ig(0.0, 1.0, {1, StepLabel::a()}, 1), std::invalid_argument);
  EXPECT_THROW(sample_ig(1.0, -1.0, {1, StepLabel::a()}, 1), std::invalid_argument);
}

TEST(SampleNormal, Moments) {
  double m1 = 0, m2 = 0;
  const int n = 200000;
  for (int i = 1; i <= n; ++i) {
    const double v = sample_normal({2.0, 9.0}, {std::uint64_t(i), StepLabel::mu()}, 8);
    m1 += v;
    m2 += (v - 2.0) * (v - 2.0);
  }
  EXPECT_NEAR(m1 / n, 2.0, 0.03);
  EXPECT_NEAR(m2 / n, 9.0, 0.15);
}

TEST(Steps, BlockMedianModeHandComposition) {
  const RemData d{{1.0, 3.0}, 1.0};
  const RemHyper h{2.0, 2.0};
  const RemState s{0.5, 0.0, {0.0, 2.0}, Ordering::Block};
  MedianVariates med;
  const RemState out = block_step(s, d, h, 1, med);
  // A: IG(2 + 1/2, 2 + SS/2) with SS = 2, at its median
  const double A = 3.0 / boost::math::gamma_p_inv(2.5, 0.5);
  const double mu = (0.0 + 2.0) / 2;
  EXPECT_EQ(out.A, A);
  EXPECT_EQ(out.mu, mu);
  EXPECT_DOUBLE_EQ(out.theta[0], (1.0 * mu + A * 1.0) / (A + 1.0));
  EXPECT_DOUBLE_EQ(out.theta[1], (1.0 * mu + A * 3.0) / (A + 1.0));
}

TEST(Steps, OooMedianModeHandComposition) {
  const RemData d{{1.0, 3.0}, 1.0};
  const RemHyper h{2.0, 2.0};
  const RemState s{0.5, 0.0, {0.0, 2.0}, Ordering::Ooo};
  MedianVariates med;
  const RemState out = ooo_step(s, d, h, 1, med);
  const double mu = 1.0;  // mean of theta
  const double t0 = (1.0 * mu + 0.5 * 1.0) / 1.5, t1 = (1.0 * mu + 0.5 * 3.0) / 1.5;
  const double ss = (t0 - t1) * (t0 - t1) / 2;
  EXPECT_EQ(out.mu, mu);
  EXPECT_DOUBLE_EQ(out.theta[0], t0);
  EXPECT_DOUBLE_EQ(out.theta[1], t1);
  EXPECT_DOUBLE_EQ(out.A, (2.0 + ss / 2) / boost::math::gamma_p_inv(2.5, 0.5));
}

TEST(Steps, OooKeyAudit) {
  const RemData d = six_obs();
  const std::size_t n = 25;
  AuditedVariates<KeyedVariates> src{KeyedVariates(3)};
  run_chain(Ordering::Ooo, default_init(d, Ordering::Ooo), d, {2, 2}, n, src);
  std::set<StreamKey> expected;
  for (std::uint64_t it = 1; it <= n; ++it) {
    expected.insert({it, StepLabel::mu()});
    for (std::uint32_t i = 1; i <= d.m(); ++i) expected.insert({it, StepLabel::theta(i)});
    expected.insert({it + 1, StepLabel::a()});
  }
  EXPECT_TRUE(src.duplicates().empty());
  EXPECT_EQ(src.consumed().size(), expected.size());
  EXPECT_EQ(std::set<StreamKey>(src.consumed().begin(), src.consumed().end()), expected);
}

TEST(Steps, BlockKeysNeverRepeat) {
  const RemData d = six_obs();
  AuditedVariates<KeyedVariates> src{KeyedVariates(3)};
  run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 40, src);
  EXPECT_TRUE(src.duplicates().empty());
  EXPECT_EQ(src.consumed().size(), 40 * (d.m() + 2));
}

TEST(RunChain, DeterministicAndPositive) {
  const RemData d = six_obs();
  for (Ordering o : {Ordering::Block, Ordering::Ooo}) {
    const Trajectory a = run_chain(o, default_init(d, o), d, {2, 2}, 2000, 11);
    const Trajectory b = run_chain(o, default_init(d, o), d, {2, 2}, 2000, 11);
    EXPECT_EQ(a.size(), 2001u);
    EXPECT_EQ(first_mismatch(a, b), -1);
    for (const auto& s : a) ASSERT_GT(s.A, 0.0);
  }
}

TEST(RunChain, ChunkedEqualsMonolithic) {
  const RemData d = six_obs();
  for (Ordering o : {Ordering::Block, Ordering::Ooo}) {
    const Trajectory whole = run_chain(o, default_init(d, o), d, {2, 2}, 300, 21);
    Trajectory pieced = run_chain(o, default_init(d, o), d, {2, 2}, 120, 21);
    const Trajectory rest = run_chain(o, pieced.back(), d, {2, 2}, 180, 21, 121);
    pieced.insert(pieced.end(), rest.begin() + 1, rest.end());
    EXPECT_EQ(first_mismatch(whole, pieced), -1);
    // thinned statistics agree too
    auto thinned_mean = [](const Trajectory& t) {
      double s = 0;
      for (std::size_t i = 0; i < t.size(); i += 10) s += t[i].A;
      return s;
    };
    EXPECT_EQ(thinned_mean(whole), thinned_mean(pieced));
  }
}

TEST(RunChain, RejectsBadInput) {
  const RemData d = six_obs();
  EXPECT_THROW(run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 0, 1), std::invalid_argument);
  RemState bad = default_init(d, Ordering::Block);
  bad.theta.pop_back();
  EXPECT_THROW(run_chain(Ordering::Block, bad, d, {2, 2}, 5, 1), std::invalid_argument);
  EXPECT_THROW(run_chain(Ordering::Block, default_init(d, Ordering::Block), RemData{{1.0}, 1.0}, {2, 2}, 5, 1),
               std::invalid_argument);
  EXPECT_THROW(run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {0, 2}, 5, 1), std::invalid_argument);
}

TEST(RunChain, DefaultInit) {
  const RemState s = default_init({{1.0, 3.0}, 1.0}, Ordering::Block);
  EXPECT_EQ(s.mu, 2.0);
  EXPECT_EQ(s.A, 2.0);
  EXPECT_EQ(s.theta, (std::vector<double>{1.0, 3.0}));
  EXPECT_EQ(default_init({{5.0, 5.0}, 1.0}, Ordering::Block).A, 1e-6);
}

TEST(ShiftedView, LengthAndOffset) {
  const RemData d = six_obs();
  const Trajectory two = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 1, 5);
  EXPECT_EQ(shifted_view(two).size(), 1u);
  EXPECT_THROW(shifted_view(Trajectory(1)), std::invalid_argument);
  const Trajectory block = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 50, 5);
  const Trajectory view = shifted_view(block);
  for (std::size_t n = 0; n < view.size(); ++n) {
    EXPECT_EQ(view[n].A, block[n + 1].A);
    EXPECT_EQ(view[n].mu, block[n].mu);
  }
}

TEST(ShiftedView, ReplaysOooBitForBit) {
  const RemData d = six_obs();
  for (std::uint64_t seed : {1ull, 42ull, 977ull, 0xDEADBEEFull}) {
    const std::size_t n = 2000;
    const Trajectory block = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, n + 1, seed);
    const Trajectory view = shifted_view(block);
    const Trajectory ooo = run_chain(Ordering::Ooo, view.front(), d, {2, 2}, n, seed);
    ASSERT_EQ(view.size(), ooo.size());
    EXPECT_EQ(first_mismatch(view, ooo), -1) << "seed " << seed;
  }
}

TEST(Estimate, ConstantFunction) {
  const RemData d = six_obs();
  const Trajectory t = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 400, 1);
  const Estimate e = estimate(t, [](const RemState&) { return 2.5; }, 100);
  EXPECT_EQ(e.mean, 2.5);
  EXPECT_EQ(e.se, 0.0);
  EXPECT_EQ(e.samples, 301u);
  EXPECT_EQ(e.batches, 17u);
  EXPECT_THROW(estimate(t, [](const RemState&) { return 1.0; }, 350), std::invalid_argument);
}

TEST(Estimate, MuCentredOnSymmetricData) {
  const RemData d{{-2.0, -1.0, 0.0, 1.0, 2.0, 3.0, 4.0}, 1.0};  // mean 1, symmetric about it
  const Trajectory t = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 40000, 31);
  const Estimate e = estimate(t, [](const RemState& s) { return s.mu; }, 1000);
  EXPECT_LT(std::abs(e.mean - 1.0), 3 * e.se) << e.mean << " +- " << e.se;
}

TEST(Estimate, SingleCoordinateMarginalsAgreeAcrossChains) {
  const RemData d = six_obs();
  const Trajectory block = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 40000, 101);
  const Trajectory ooo = run_chain(Ordering::Ooo, default_init(d, Ordering::Ooo), d, {2, 2}, 40000, 202);
  std::vector<std::function<double(const RemState&)>> gs{[](const RemState& s) { return s.A; },
                                                          [](const RemState& s) { return s.mu; }};
  for (std::size_t i = 0; i < d.m(); ++i) gs.push_back([i](const RemState& s) { return s.theta[i]; });
  for (std::size_t k = 0; k < gs.size(); ++k)
    EXPECT_LT(combined_z(estimate(block, gs[k], 1000), estimate(ooo, gs[k], 1000)), 3.0) << "coordinate " << k;
}

TEST(TrajectoryCsv, Columns) {
  const RemData d{{1.0, 2.0, 4.0}, 1.0};
  const Trajectory t = run_chain(Ordering::Block, default_init(d, Ordering::Block), d, {2, 2}, 3, 1);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "iter,A,mu,theta_1,theta_2,theta_3");
  std::getline(in, line);
  EXPECT_EQ(line.substr(0, 2), "0,");
  int rows = 1;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
