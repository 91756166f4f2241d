#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/proxy.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

/// Empirical Bernstein half-width
/// c_t = sigma sqrt(2 log(3/delta) / t) + 6 C log(3/delta) / t.
inline double bernstein_bound(double sigma_hat, double range_C, std::uint64_t t, double delta_t) {
  if (t < 1) throw std::invalid_argument("bernstein_bound needs t >= 1");
  if (!(sigma_hat >= 0.0) || !(range_C >= 0.0)) throw std::invalid_argument("sigma and range must be >= 0");
  if (!(delta_t > 0.0 && delta_t < 3.0)) throw std::invalid_argument("delta_t must lie in (0, 3)");
  const double l = std::log(3.0 / delta_t);
  const double td = static_cast<double>(t);
  return sigma_hat * std::sqrt(2.0 * l / td) + 6.0 * range_C * l / td;
}

enum class DeltaSchedule {
  geometric,    // delta_k = delta / 2^(k+1), k = 0, 1, ...
  unreachable,  // c = +inf: every decision reads the whole dataset
};

enum class SubsampleScheme {
  replace_from_unused,  // with replacement among points unused by earlier batches
  without_replacement,
};

struct ConfidenceConfig {
  double delta = 0.1;
  DeltaSchedule schedule = DeltaSchedule::geometric;
  double gamma = 1.5;
  SubsampleScheme scheme = SubsampleScheme::replace_from_unused;
  /// Proxy control variates are used iff this is set.
  std::optional<ProxyPolicy> proxy;
  ProxyStoreOptions store;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("delta must lie in (0, 1)");
    if (!(gamma > 1.0) || !std::isfinite(gamma)) throw std::invalid_argument("batch growth gamma must be > 1");
    if (proxy) proxy->validate();
  }

  double delta_at(int look) const { return std::ldexp(delta, -(look + 1)); }

  /// Half-width for look number `look`; +inf under the unreachable schedule.
  double half_width(double sigma_hat, double range_C, std::uint64_t t, int look) const {
    if (schedule == DeltaSchedule::unreachable) return std::numeric_limits<double>::infinity();
    const double d = delta_at(look);
    if (!(d > 0.0)) return std::numeric_limits<double>::infinity();
    return bernstein_bound(sigma_hat, range_C, t, d);
  }
};

struct StopDecision {
  bool accepted = false;
  Index t_used = 0;
  bool exhausted = false;  // decided on the full data
};

namespace detail {

/// One accept/reject decision. Updates `cache` (current-state likelihood)
/// so that it describes whichever state the chain ends in; returns the
/// evaluations spent in `evals`.
template <class F>
StopDecision confidence_decide(const F& family, const Model& model, const Dataset& data,
                               const ConfidenceConfig& config, const TaylorProxy* proxy, const Theta& theta,
                               const Theta& theta_prime, double lp, double lp_prime, double log_u,
                               double log_q, StateCache& cache, SubsampleMarks& marks, CounterRng& rng,
                               std::uint64_t& evals) {
  const Index n = data.n();
  const double nd = static_cast<double>(n);
  const auto a_cur = family.at(theta);
  const auto a_prop = family.at(theta_prime);
  const bool cached = cache.full;
  const std::uint64_t per_point = cached ? 1 : 2;

  auto exact = [&]() {
    const double ll_prop = full_log_lik(model, data, theta_prime);
    const double ll_cur = cached ? cache.ll_sum : full_log_lik(model, data, theta);
    StopDecision d;
    d.accepted = mh_accept(log_u, mh_log_alpha(lp, ll_cur, lp_prime, ll_prop, log_q));
    d.t_used = n;
    d.exhausted = true;
    evals = per_point * static_cast<std::uint64_t>(n);
    if (d.accepted)
      cache.fill(a_prop, data, ll_prop);
    else if (!cached)
      cache.fill(a_cur, data, ll_cur);
    return d;
  };

  const bool use_proxy = proxy && proxy->covers(theta) && proxy->covers(theta_prime);
  if (proxy && !use_proxy) return exact();

  const double psi = (log_u + lp - lp_prime - log_q) / nd;
  auto l_cur = [&](Index i) { return cached ? cache.ll[static_cast<std::size_t>(i)] : a_cur.log_lik(data, i); };

  double shift = 0.0;  // (1/n) sum_i proxy_i
  double range_C = 0.0;
  std::optional<ProxyPair> pair;
  if (use_proxy) {
    pair.emplace(*proxy, theta, theta_prime);
    shift = proxy_sum(*proxy, theta, theta_prime);
    range_C = 2.0 * remainder_bound(*proxy, theta, theta_prime);
  } else if (config.schedule != DeltaSchedule::unreachable) {
    // Exact range of the ratios, not charged.
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (Index i = 0; i < n; ++i) {
      const double r = a_prop.log_lik(data, i) - l_cur(i);
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    range_C = hi - lo;
  }

  auto corrected = [&](Index i) {
    const double r = a_prop.log_lik(data, i) - l_cur(i);
    return pair ? r - (*pair)(data, i) : r;
  };

  const bool repeat = config.scheme == SubsampleScheme::replace_from_unused;
  marks.begin(n);
  Welford acc;
  std::uint64_t t = 0, b = 1;
  int look = 0;
  for (;;) {
    marks.next_batch();
    for (std::uint64_t k = t; k < b; ++k) {
      const Index i = marks.draw(rng, n, repeat);
      double r;
      if (marks.in_batch(i)) {
        r = marks.value(i);
      } else {
        r = corrected(i);
        marks.mark(i, r);
      }
      acc.add(r);
    }
    t = b;
    if (t >= static_cast<std::uint64_t>(n)) return exact();
    const double c = config.half_width(acc.sd_biased(), range_C, t, look);
    ++look;
    b = std::min<std::uint64_t>(static_cast<std::uint64_t>(n),
                                static_cast<std::uint64_t>(std::ceil(config.gamma * static_cast<double>(t))));
    if (std::abs(acc.mean + shift - psi) >= c) {
      StopDecision d;
      d.accepted = acc.mean > psi - shift;
      d.t_used = static_cast<Index>(t);
      evals = per_point * static_cast<std::uint64_t>(marks.distinct());
      if (d.accepted) cache.invalidate();
      return d;
    }
  }
}

}  // namespace detail

/// Result of one confidence-sampler iteration.
struct ConfidenceStep {
  StopDecision decision;
  Theta theta_next;
  std::uint64_t evals = 0;
  bool refreshed = false;
};

/// Stateful confidence sampler: proposal, streams, the current proxy and the
/// current-state likelihood cache. Iterations are numbered from 1.
template <RandomWalk Proposal = ProposalRW>
class ConfidenceSampler {
public:
  ConfidenceSampler(const Model& model, const Dataset& data, ConfidenceConfig config, Proposal proposal,
                    const Theta& theta0, std::uint64_t seed, std::uint64_t chain = 0,
                    std::optional<TaylorProxy> proxy = std::nullopt)
      : model_(model),
        data_(data),
        config_(std::move(config)),
        proposal_(std::move(proposal)),
        rs_(seed, chain),
        theta_(theta0) {
    config_.validate();
    model_.check(data_);
    model_.check_theta(data_, theta_);
    if constexpr (requires { proposal_.validate(); }) proposal_.validate();
    lp_ = log_prior(model_, theta_);
    if (config_.proxy) {
      if (proxy) {
        proxy_ = std::move(proxy);
      } else {
        EvalCounter setup;
        proxy_ = build_proxy(model_, data_, theta_, config_.store, &setup);
        setup_evals_ += setup.count;
      }
    }
  }

  const Theta& theta() const noexcept { return theta_; }
  const std::optional<TaylorProxy>& proxy() const noexcept { return proxy_; }
  std::uint64_t setup_evals() const noexcept { return setup_evals_; }
  long iteration() const noexcept { return k_; }
  const Proposal& proposal() const noexcept { return proposal_; }

  ConfidenceStep step() {
    ++k_;
    Theta prop = proposal_.propose(theta_, rs_.proposal);
    const double log_u = std::log(uniform01(rs_.accept));
    const double lp_prop = log_prior(model_, prop);
    const double log_q = proposal_.log_ratio(theta_, prop);

    ConfidenceStep out;
    if (config_.proxy && refresh_due(*config_.proxy, k_)) {
      proxy_ = build_proxy(model_, data_, theta_, config_.store);
      out.refreshed = true;
      // A plain MH iteration on the full data; reported as 2n.
      const double ll_prop = full_log_lik(model_, data_, prop);
      const double ll_cur = cache_.full ? cache_.ll_sum : full_log_lik(model_, data_, theta_);
      out.decision.accepted = mh_accept(log_u, mh_log_alpha(lp_, ll_cur, lp_prop, ll_prop, log_q));
      out.decision.t_used = data_.n();
      out.decision.exhausted = true;
      out.evals = 2 * static_cast<std::uint64_t>(data_.n());
      model_.visit([&](const auto& f) {
        if (out.decision.accepted)
          cache_.fill(f.at(prop), data_, ll_prop);
        else
          cache_.fill(f.at(theta_), data_, ll_cur);
      });
    } else {
      const TaylorProxy* px = proxy_ ? &*proxy_ : nullptr;
      out.decision = model_.visit([&](const auto& f) {
        return detail::confidence_decide(f, model_, data_, config_, px, theta_, prop, lp_, lp_prop, log_u, log_q,
                                         cache_, marks_, rs_.subsample, out.evals);
      });
    }
    if (out.decision.accepted) {
      theta_ = std::move(prop);
      lp_ = lp_prop;
    }
    proposal_.update(k_, out.decision.accepted);
    out.theta_next = theta_;
    return out;
  }

private:
  Model model_;
  const Dataset& data_;
  ConfidenceConfig config_;
  Proposal proposal_;
  RandomStreams rs_;
  Theta theta_;
  double lp_ = 0.0;
  std::optional<TaylorProxy> proxy_;
  StateCache cache_;
  detail::SubsampleMarks marks_;
  long k_ = 0;
  std::uint64_t setup_evals_ = 0;
};

/// One decision for a given (theta, theta', u): the bare loop, without
/// proposal or refresh handling. The current-state cache starts empty.
inline std::pair<StopDecision, Theta> confidence_step(const Model& model, const Dataset& data,
                                                      const ConfidenceConfig& config, const Theta& theta,
                                                      const Theta& theta_prime, double u, CounterRng& rng,
                                                      const TaylorProxy* proxy = nullptr,
                                                      std::uint64_t* evals = nullptr, double log_q = 0.0) {
  config.validate();
  model.check(data);
  model.check_theta(data, theta);
  model.check_theta(data, theta_prime);
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("u must lie in (0, 1)");
  StateCache cache;
  detail::SubsampleMarks marks;
  std::uint64_t spent = 0;
  const auto d = model.visit([&](const auto& f) {
    return detail::confidence_decide(f, model, data, config, proxy, theta, theta_prime, log_prior(model, theta),
                                     log_prior(model, theta_prime), std::log(u), log_q, cache, marks, rng, spent);
  });
  if (evals) *evals = spent;
  return {d, d.accepted ? theta_prime : theta};
}

template <RandomWalk Proposal>
ChainTrace confidence_run(const Model& model, const Dataset& data, const ConfidenceConfig& config,
                          Proposal proposal, const Theta& theta0, long n_iter, std::uint64_t seed,
                          std::uint64_t chain = 0, std::optional<TaylorProxy> proxy = std::nullopt) {
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  ConfidenceSampler<Proposal> sampler(model, data, config, std::move(proposal), theta0, seed, chain,
                                      std::move(proxy));
  ChainTrace trace;
  trace.sampler_tag = config.proxy ? "confidence_proxy" : "confidence";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.setup_evals = sampler.setup_evals();
  trace.reserve(static_cast<std::size_t>(n_iter));
  for (long k = 1; k <= n_iter; ++k) {
    auto s = sampler.step();
    trace.push(s.theta_next, s.decision.accepted, s.evals);
  }
  return trace;
}

}  // namespace tallmcmc
