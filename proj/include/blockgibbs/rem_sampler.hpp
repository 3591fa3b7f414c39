#pragma once

// One-way random effects model y_i = theta_i + e_i with theta_i ~ N(mu, A),
// e_i ~ N(0, V), flat prior on mu and A ~ IG(a, b). Two samplers:
//   block: A | theta, then mu | A, theta, then theta | A, mu
//   ooo:   mu | A, theta, then theta | A, mu, then A | theta
// Every draw comes from a substream keyed by (iteration, step), and the ooo
// sampler draws A with the *next* iteration's key, so a block trajectory
// read as (mu_n, theta_n, A_{n+1}) replays the ooo trajectory exactly.

#include <boost/math/special_functions/gamma.hpp>

#include <bit>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "philox.hpp"

namespace blockgibbs::rem {

struct RemData {
  std::vector<double> y;
  double V = 1.0;

  std::size_t m() const { return y.size(); }

  void validate() const {
    if (y.size() < 2) throw std::invalid_argument("random effects data needs m >= 2 observations");
    for (double v : y)
      if (!std::isfinite(v)) throw std::invalid_argument("observations must be finite");
    if (!(V > 0.0) || !std::isfinite(V)) throw std::invalid_argument("error variance V must be > 0");
  }
};

struct RemHyper {
  double a = 1.0;
  double b = 1.0;

  void validate() const {
    if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
      throw std::invalid_argument("inverse-gamma prior needs a > 0 and b > 0");
  }
};

enum class Ordering { Block, Ooo };

inline const char* to_string(Ordering o) { return o == Ordering::Block ? "block" : "ooo"; }

struct RemState {
  double A = 1.0;
  double mu = 0.0;
  std::vector<double> theta;
  Ordering ordering = Ordering::Block;
};

/// Exact equality of every coordinate's bit pattern.
inline bool bitwise_equal(const RemState& a, const RemState& b) {
  auto same = [](double u, double v) {
    return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v);
  };
  if (a.ordering != b.ordering || a.theta.size() != b.theta.size()) return false;
  if (!same(a.A, b.A) || !same(a.mu, b.mu)) return false;
  for (std::size_t i = 0; i < a.theta.size(); ++i)
    if (!same(a.theta[i], b.theta[i])) return false;
  return true;
}

struct StepLabel {
  enum class Kind : std::uint8_t { A, Mu, Theta };
  Kind kind = Kind::A;
  std::uint32_t index = 0;  // 1-based component for Theta

  static StepLabel a() { return {Kind::A, 0}; }
  static StepLabel mu() { return {Kind::Mu, 0}; }
  static StepLabel theta(std::uint32_t i) { return {Kind::Theta, i}; }

  std::uint32_t tag() const {
    return kind == Kind::A ? 0u : kind == Kind::Mu ? 1u : 1u + index;
  }
  std::string name() const {
    return kind == Kind::A ? "A" : kind == Kind::Mu ? "mu" : "theta_" + std::to_string(index);
  }
  auto operator<=>(const StepLabel&) const = default;
};

/// Address of one random substream.
struct StreamKey {
  std::uint64_t iteration = 0;
  StepLabel step;

  auto operator<=>(const StreamKey&) const = default;
  std::string name() const { return "(" + std::to_string(iteration) + "," + step.name() + ")"; }
};

struct IgParams {
  double shape = 1.0;
  double rate = 1.0;
};

struct NormalParams {
  double mean = 0.0;
  double variance = 1.0;
};

inline double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// A | theta ~ IG(a + (m-1)/2, b + SS/2), SS the centered sum of squares.
inline IgParams ig_params(std::span<const double> theta, const RemHyper& hyper) {
  if (theta.size() < 2) throw std::invalid_argument("ig_params: needs m >= 2");
  const double bar = mean_of(theta);
  double ss = 0.0;
  for (double t : theta) ss += (t - bar) * (t - bar);
  const double m = static_cast<double>(theta.size());
  return {hyper.a + 0.5 * (m - 1.0), hyper.b + 0.5 * ss};
}

/// mu | A, theta ~ N(theta_bar, A / m).
inline NormalParams mu_params(std::span<const double> theta, double A) {
  return {mean_of(theta), A / static_cast<double>(theta.size())};
}

/// theta_i | A, mu ~ N((V mu + A y_i) / (A + V), A V / (A + V)); i is 0-based.
inline NormalParams theta_params(double mu, double A, const RemData& data, std::size_t i) {
  const double V = data.V;
  return {(V * mu + A * data.y[i]) / (A + V), A * V / (A + V)};
}

/// Unit-scale gamma variate: Marsaglia-Tsang squeeze/rejection, boosted by
/// U^(1/shape) below shape 1.
inline double sample_gamma(double shape, Substream& s) {
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, s);
    return g * std::pow(s.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0, v = 0.0;
    do {
      x = s.standard_normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = s.uniform();
    if (u < 1.0 - 0.0331 * (x * x) * (x * x)) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

inline Substream substream(std::uint64_t seed, const StreamKey& key) {
  return Substream(seed, key.iteration, key.step.tag());
}

/// IG(shape, rate) variate (density proportional to w^(-shape-1) e^(-rate/w)).
inline double sample_ig(double shape, double rate, const StreamKey& key, std::uint64_t seed) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("sample_ig: shape and rate must be > 0");
  Substream s = substream(seed, key);
  return rate / sample_gamma(shape, s);
}

inline double sample_normal(const NormalParams& p, const StreamKey& key, std::uint64_t seed) {
  Substream s = substream(seed, key);
  return p.mean + std::sqrt(p.variance) * s.standard_normal();
}

template <class S>
concept VariateSource = requires(S& s, const StreamKey& k, NormalParams np, IgParams ip) {
  { s.normal(k, np) } -> std::convertible_to<double>;
  { s.inverse_gamma(k, ip) } -> std::convertible_to<double>;
};

/// Production source: keyed Philox substreams under one global seed.
class KeyedVariates {
 public:
  explicit KeyedVariates(std::uint64_t seed) : seed_(seed) {}
  double normal(const StreamKey& k, const NormalParams& p) const { return sample_normal(p, k, seed_); }
  double inverse_gamma(const StreamKey& k, const IgParams& p) const {
    return sample_ig(p.shape, p.rate, k, seed_);
  }
  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Deterministic test mode: every draw returns its distribution's median.
class MedianVariates {
 public:
  double normal(const StreamKey&, const NormalParams& p) const { return p.mean; }
  double inverse_gamma(const StreamKey&, const IgParams& p) const {
    return p.rate / boost::math::gamma_p_inv(p.shape, 0.5);
  }
};

/// Records every key drawn through the wrapped source.
template <VariateSource Inner>
class AuditedVariates {
 public:
  explicit AuditedVariates(Inner inner) : inner_(std::move(inner)) {}

  double normal(const StreamKey& k, const NormalParams& p) {
    note(k);
    return inner_.normal(k, p);
  }
  double inverse_gamma(const StreamKey& k, const IgParams& p) {
    note(k);
    return inner_.inverse_gamma(k, p);
  }

  const std::vector<StreamKey>& consumed() const { return consumed_; }
  const std::vector<StreamKey>& duplicates() const { return duplicates_; }

 private:
  void note(const StreamKey& k) {
    consumed_.push_back(k);
    if (!seen_.insert(k).second) duplicates_.push_back(k);
  }
  Inner inner_;
  std::vector<StreamKey> consumed_;
  std::vector<StreamKey> duplicates_;
  std::set<StreamKey> seen_;
};

inline constexpr double kMinVariance = 1e-300;

namespace detail {
inline double guard_variance(double A) {
  if (A < kMinVariance) {
    std::fprintf(stderr, "blockgibbs: warning: A = %g floored at %g\n", A, kMinVariance);
    return kMinVariance;
  }
  return A;
}
}  // namespace detail

/// One iteration of the block sampler (A, then mu, then theta), keyed by
/// `iteration`.
template <VariateSource Source>
RemState block_step(const RemState& s, const RemData& data, const RemHyper& hyper,
                    std::uint64_t iteration, Source& src) {
  RemState next;
  next.ordering = Ordering::Block;
  next.A = detail::guard_variance(
      src.inverse_gamma({iteration, StepLabel::a()}, ig_params(s.theta, hyper)));
  next.mu = src.normal({iteration, StepLabel::mu()}, mu_params(s.theta, next.A));
  next.theta.resize(data.m());
  for (std::size_t i = 0; i < data.m(); ++i)
    next.theta[i] = src.normal({iteration, StepLabel::theta(static_cast<std::uint32_t>(i + 1))},
                               theta_params(next.mu, next.A, data, i));
  return next;
}

/// One iteration of the out-of-order sampler (mu, then theta, then A). The
/// A draw uses key (iteration + 1, A).
template <VariateSource Source>
RemState ooo_step(const RemState& s, const RemData& data, const RemHyper& hyper,
                  std::uint64_t iteration, Source& src) {
  RemState next;
  next.ordering = Ordering::Ooo;
  next.mu = src.normal({iteration, StepLabel::mu()}, mu_params(s.theta, s.A));
  next.theta.resize(data.m());
  for (std::size_t i = 0; i < data.m(); ++i)
    next.theta[i] = src.normal({iteration, StepLabel::theta(static_cast<std::uint32_t>(i + 1))},
                               theta_params(next.mu, s.A, data, i));
  next.A = detail::guard_variance(
      src.inverse_gamma({iteration + 1, StepLabel::a()}, ig_params(next.theta, hyper)));
  return next;
}

using Trajectory = std::vector<RemState>;

/// mu = mean(y), theta = y, A = sample variance of y floored at 1e-6.
inline RemState default_init(const RemData& data, Ordering ordering) {
  data.validate();
  const double bar = mean_of(data.y);
  double ss = 0.0;
  for (double v : data.y) ss += (v - bar) * (v - bar);
  return {std::max(ss / static_cast<double>(data.m() - 1), 1e-6), bar, data.y, ordering};
}

/// Applies `n` steps starting at iteration `first_iteration`; the returned
/// trajectory holds the initial state followed by the n updates.
template <VariateSource Source>
Trajectory run_chain(Ordering variant, RemState init, const RemData& data, const RemHyper& hyper,
                     std::size_t n, Source& src, std::uint64_t first_iteration = 1) {
  if (n < 1) throw std::invalid_argument("run_chain: n must be >= 1");
  data.validate();
  hyper.validate();
  if (init.theta.size() != data.m()) throw std::invalid_argument("run_chain: theta length != m");
  if (!(init.A > 0.0)) throw std::invalid_argument("run_chain: initial A must be > 0");
  init.ordering = variant;
  Trajectory out;
  out.reserve(n + 1);
  out.push_back(std::move(init));
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t it = first_iteration + k;
    out.push_back(variant == Ordering::Block ? block_step(out.back(), data, hyper, it, src)
                                             : ooo_step(out.back(), data, hyper, it, src));
  }
  return out;
}

inline Trajectory run_chain(Ordering variant, RemState init, const RemData& data, const RemHyper& hyper,
                            std::size_t n, std::uint64_t seed, std::uint64_t first_iteration = 1) {
  KeyedVariates src(seed);
  return run_chain(variant, std::move(init), data, hyper, n, src, first_iteration);
}

/// Element n = (mu_n, theta_n, A_{n+1}) of a block trajectory.
inline Trajectory shifted_view(const Trajectory& block) {
  if (block.size() < 2) throw std::invalid_argument("shifted_view: trajectory needs >= 2 states");
  Trajectory out;
  out.reserve(block.size() - 1);
  for (std::size_t n = 0; n + 1 < block.size(); ++n)
    out.push_back({block[n + 1].A, block[n].mu, block[n].theta, Ordering::Ooo});
  return out;
}

/// Index of the first mismatching state, or -1 when the trajectories agree
/// bit for bit.
inline long first_mismatch(const Trajectory& a, const Trajectory& b) {
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i)
    if (!bitwise_equal(a[i], b[i])) return static_cast<long>(i);
  return a.size() == b.size() ? -1 : static_cast<long>(n);
}

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // batch-means standard error
  std::size_t samples = 0;
  std::size_t batches = 0;
  std::size_t batch_size = 0;
};

/// Ergodic average of g after burn-in, with floor(sqrt(N)) batch means.
inline Estimate estimate(const Trajectory& traj, const std::function<double(const RemState&)>& g,
                         std::size_t burn_in) {
  if (traj.size() < burn_in + 100)
    throw std::invalid_argument("estimate: need at least 100 states after burn-in (have " +
                                std::to_string(traj.size() > burn_in ? traj.size() - burn_in : 0) + ")");
  Estimate e;
  e.samples = traj.size() - burn_in;
  e.batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(e.samples)));
  e.batch_size = e.samples / e.batches;
  std::vector<double> values;
  values.reserve(e.samples);
  for (std::size_t i = burn_in; i < traj.size(); ++i) values.push_back(g(traj[i]));
  e.mean = mean_of(values);
  std::vector<double> batch_means(e.batches);
  for (std::size_t b = 0; b < e.batches; ++b)
    batch_means[b] = mean_of(std::span<const double>(values).subspan(b * e.batch_size, e.batch_size));
  const double bbar = mean_of(batch_means);
  double ss = 0.0;
  for (double v : batch_means) ss += (v - bbar) * (v - bbar);
  e.se = std::sqrt(ss / static_cast<double>(e.batches - 1) / static_cast<double>(e.batches));
  return e;
}

/// CSV columns: iter, A, mu, theta_1..theta_m.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const std::size_t m = traj.empty() ? 0 : traj.front().theta.size();
  os << "iter,A,mu";
  for (std::size_t i = 1; i <= m; ++i) os << ",theta_" << i;
  os << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    os << ',' << buf;
  };
  for (std::size_t n = 0; n < traj.size(); ++n) {
    os << n;
    put(traj[n].A);
    put(traj[n].mu);
    for (double t : traj[n].theta) put(t);
    os << '\n';
  }
}

}  // namespace blockgibbs::rem
