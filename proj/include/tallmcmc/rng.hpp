#pragma once

#include <cstdint>
#include <limits>
#include <random>

#include <Eigen/Core>

namespace tallmcmc {

/// Counter-based generator: output k is a SplitMix64 finalizer applied to
/// key + k * golden_gamma. Two generators with different keys never share
/// state, so streams can be split per purpose without coordination.
class CounterRng {
public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key = 0) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    return mix(key_ + (++counter_) * kGamma);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Purpose tags for stream splitting. Keep the numeric values stable: they
/// are part of the reproducibility contract of every recorded trace.
enum class Stream : std::uint64_t {
  proposal = 1,
  accept = 2,
  subsample = 3,
  noise = 4,
  auxiliary = 5,
  data = 6,
};

inline std::uint64_t stream_key(std::uint64_t seed, std::uint64_t chain,
                                Stream purpose) noexcept {
  std::uint64_t k = CounterRng::mix(seed ^ 0x5851f42d4c957f2dULL);
  k = CounterRng::mix(k ^ (chain * 0xd1b54a32d192ed03ULL));
  return CounterRng::mix(k ^ (static_cast<std::uint64_t>(purpose) *
                              0x8cb92ba72f3d8dd7ULL));
}

inline double uniform01(CounterRng& rng) {
  // 53 random mantissa bits, strictly inside (0, 1).
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

inline std::size_t uniform_index(CounterRng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline double standard_normal(CounterRng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline Eigen::VectorXd standard_normal_vector(CounterRng& rng, Eigen::Index d) {
  Eigen::VectorXd v(d);
  for (Eigen::Index j = 0; j < d; ++j) v[j] = standard_normal(rng);
  return v;
}

/// Every random draw a sampler makes comes from one of these. Samplers that
/// share a seed and chain id see identical proposal and uniform sequences,
/// which is what makes decision-by-decision comparisons possible.
struct RandomStreams {
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  CounterRng proposal;
  CounterRng accept;
  CounterRng subsample;
  CounterRng noise;
  CounterRng auxiliary;

  explicit RandomStreams(std::uint64_t seed_ = 0, std::uint64_t chain_ = 0)
      : seed(seed_),
        chain(chain_),
        proposal(stream_key(seed_, chain_, Stream::proposal)),
        accept(stream_key(seed_, chain_, Stream::accept)),
        subsample(stream_key(seed_, chain_, Stream::subsample)),
        noise(stream_key(seed_, chain_, Stream::noise)),
        auxiliary(stream_key(seed_, chain_, Stream::auxiliary)) {}
};

}  // namespace tallmcmc
