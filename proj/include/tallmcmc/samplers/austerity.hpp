#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

struct AusterityConfig {
  double eps = 0.05;   // p-value threshold
  Index t_init = 100;  // first subsample size
  double growth = 2.0;

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("austerity eps must lie in (0, 1)");
    if (t_init < 2) throw std::invalid_argument("austerity t_init must be >= 2");
    if (!(growth > 1.0) || !std::isfinite(growth)) throw std::invalid_argument("austerity growth must be > 1");
  }
};

struct AusterityDecision {
  bool accepted = false;
  Index t_used = 0;
  bool exhausted = false;
};

/// Two-sided p-value of the sequential t-test on the mean log-likelihood
/// ratio against psi, with the finite-population correction.
inline double austerity_pvalue(double mean, double sd, Index t, Index n, double psi) {
  const double fpc = std::sqrt(1.0 - static_cast<double>(t - 1) / static_cast<double>(n - 1));
  const double se = sd / std::sqrt(static_cast<double>(t)) * fpc;
  const double stat = std::abs(mean - psi) / se;
  boost::math::students_t dist(static_cast<double>(t - 1));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, stat));
}

namespace detail {

template <class F>
AusterityDecision austerity_decide(const F& family, const Model& model, const Dataset& data,
                                   const AusterityConfig& cfg, const Theta& theta, const Theta& theta_prime,
                                   double lp, double lp_prime, double log_u, double log_q, StateCache& cache,
                                   SubsampleMarks& marks, CounterRng& rng, std::uint64_t& evals) {
  const Index n = data.n();
  const auto a_cur = family.at(theta);
  const auto a_prop = family.at(theta_prime);
  const bool cached = cache.full;
  const std::uint64_t per_point = cached ? 1 : 2;
  const double psi = (log_u + lp - lp_prime - log_q) / static_cast<double>(n);

  marks.begin(n);
  Welford acc;
  Index t = std::min(cfg.t_init, n);
  for (;;) {
    if (t >= n) {
      const double ll_prop = full_log_lik(model, data, theta_prime);
      const double ll_cur = cached ? cache.ll_sum : full_log_lik(model, data, theta);
      AusterityDecision d;
      d.accepted = mh_accept(log_u, mh_log_alpha(lp, ll_cur, lp_prime, ll_prop, log_q));
      d.t_used = n;
      d.exhausted = true;
      evals = per_point * static_cast<std::uint64_t>(n);
      if (d.accepted)
        cache.fill(a_prop, data, ll_prop);
      else if (!cached)
        cache.fill(a_cur, data, ll_cur);
      return d;
    }
    marks.next_batch();
    while (static_cast<Index>(acc.count) < t) {
      const Index i = marks.draw(rng, n, false);
      marks.mark(i);
      const double l_cur = cached ? cache.ll[static_cast<std::size_t>(i)] : a_cur.log_lik(data, i);
      acc.add(a_prop.log_lik(data, i) - l_cur);
    }
    const double sd = acc.sd_unbiased();
    // Zero spread: the subsample mean is the decision.
    const bool decide = sd == 0.0 || austerity_pvalue(acc.mean, sd, t, n, psi) < cfg.eps;
    if (decide) {
      AusterityDecision d;
      d.accepted = acc.mean > psi;
      d.t_used = t;
      evals = per_point * static_cast<std::uint64_t>(t);
      if (d.accepted) cache.invalidate();
      return d;
    }
    t = std::min<Index>(n, static_cast<Index>(std::ceil(cfg.growth * static_cast<double>(t))));
  }
}

}  // namespace detail

/// One Austerity decision for a given (theta, theta', u).
inline AusterityDecision austerity_step(const Model& model, const Dataset& data, const AusterityConfig& cfg,
                                        const Theta& theta, const Theta& theta_prime, double u, CounterRng& rng,
                                        std::uint64_t* evals = nullptr, double log_q = 0.0) {
  cfg.validate();
  model.check(data);
  model.check_theta(data, theta);
  model.check_theta(data, theta_prime);
  if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("u must lie in (0, 1)");
  StateCache cache;
  detail::SubsampleMarks marks;
  std::uint64_t spent = 0;
  const auto d = model.visit([&](const auto& f) {
    return detail::austerity_decide(f, model, data, cfg, theta, theta_prime, log_prior(model, theta),
                                    log_prior(model, theta_prime), std::log(u), log_q, cache, marks, rng, spent);
  });
  if (evals) *evals = spent;
  return d;
}

template <RandomWalk Proposal>
ChainTrace austerity_run(const Model& model, const Dataset& data, const AusterityConfig& cfg, Proposal proposal,
                         const Theta& theta0, long n_iter, std::uint64_t seed, std::uint64_t chain = 0) {
  cfg.validate();
  model.check(data);
  model.check_theta(data, theta0);
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if constexpr (requires { proposal.validate(); }) proposal.validate();

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "austerity";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.reserve(static_cast<std::size_t>(n_iter));

  Theta theta = theta0;
  double lp = log_prior(model, theta);
  StateCache cache;
  detail::SubsampleMarks marks;
  for (long k = 1; k <= n_iter; ++k) {
    Theta prop = proposal.propose(theta, rs.proposal);
    const double log_u = std::log(uniform01(rs.accept));
    const double lp_prop = log_prior(model, prop);
    std::uint64_t evals = 0;
    const auto d = model.visit([&](const auto& f) {
      return detail::austerity_decide(f, model, data, cfg, theta, prop, lp, lp_prop, log_u,
                                      proposal.log_ratio(theta, prop), cache, marks, rs.subsample, evals);
    });
    if (d.accepted) {
      theta = std::move(prop);
      lp = lp_prop;
    }
    proposal.update(k, d.accepted);
    trace.push(theta, d.accepted, evals);
  }
  return trace;
}

}  // namespace tallmcmc
