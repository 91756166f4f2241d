#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "tallmcmc/dataset.hpp"
#include "tallmcmc/models.hpp"
#include "tallmcmc/rng.hpp"

namespace tallmcmc {

/// log of the MH ratio. Every sampler that falls back to a full-data decision
/// goes through this one expression, which is what makes their decisions
/// bit-identical to mh_run under shared streams.
inline double mh_log_alpha(double lp_cur, double ll_cur, double lp_prop, double ll_prop, double log_q) {
  return (lp_prop - lp_cur) + (ll_prop - ll_cur) + log_q;
}

inline bool mh_accept(double log_u, double log_alpha) { return log_u < log_alpha; }

/// Full log-likelihood of the current state, kept until the chain moves.
/// When `full` is set, ll holds every l_i(theta) and ll_sum their index-order sum.
struct StateCache {
  bool full = false;
  double ll_sum = 0.0;
  std::vector<double> ll;

  void invalidate() noexcept { full = false; }

  template <class At>
  void fill(const At& a, const Dataset& data, double sum) {
    ll.resize(static_cast<std::size_t>(data.n()));
    for (Index i = 0; i < data.n(); ++i) ll[static_cast<std::size_t>(i)] = a.log_lik(data, i);
    ll_sum = sum;
    full = true;
  }
};

namespace detail {

/// Uniform index draws with per-iteration bookkeeping of which points are
/// spent. Marks are ticks from a monotone counter, so nothing is cleared
/// between iterations.
class SubsampleMarks {
public:
  void begin(Index n) {
    if (static_cast<Index>(seen_.size()) != n) {
      seen_.assign(static_cast<std::size_t>(n), 0);
      value_.assign(static_cast<std::size_t>(n), 0.0);
    }
    iter_start_ = ++tick_;
    retired_ = 0;
  }

  /// Opens a new batch; points drawn in earlier batches of this iteration are
  /// retired.
  void next_batch() { batch_ = ++tick_; }

  bool retired(Index i) const {
    const auto s = seen_[static_cast<std::size_t>(i)];
    return s > iter_start_ && s < batch_;
  }
  bool in_batch(Index i) const { return seen_[static_cast<std::size_t>(i)] == batch_; }
  void mark(Index i, double v = 0.0) {
    seen_[static_cast<std::size_t>(i)] = batch_;
    value_[static_cast<std::size_t>(i)] = v;
    ++retired_;
  }
  /// Value stored by mark() for a point of the current batch.
  double value(Index i) const { return value_[static_cast<std::size_t>(i)]; }
  /// Points drawn so far this iteration (distinct).
  Index distinct() const noexcept { return retired_; }

  /// Uniform over points not retired by earlier batches. With
  /// allow_repeat = false, points already in the current batch are skipped too.
  Index draw(CounterRng& rng, Index n, bool allow_repeat) const {
    for (;;) {
      const auto i = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
      if (retired(i)) continue;
      if (!allow_repeat && in_batch(i)) continue;
      return i;
    }
  }

private:
  std::vector<std::uint64_t> seen_;
  std::vector<double> value_;
  std::uint64_t tick_ = 0;
  std::uint64_t iter_start_ = 0;
  std::uint64_t batch_ = 0;
  Index retired_ = 0;
};

struct Welford {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double d = x - mean;
    mean += d / static_cast<double>(count);
    m2 += d * (x - mean);
  }
  /// 1/t normalisation.
  double sd_biased() const { return count ? std::sqrt(std::max(0.0, m2 / static_cast<double>(count))) : 0.0; }
  /// 1/(t-1) normalisation.
  double sd_unbiased() const {
    return count > 1 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(count - 1))) : 0.0;
  }
};

}  // namespace detail
}  // namespace tallmcmc
