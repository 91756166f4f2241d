#pragma once

#include <cstdint>
#include <stdexcept>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

/// Random-walk MH on the full posterior. The current state's log-likelihood
/// is kept, so each iteration charges n evaluations (the proposed point).
template <RandomWalk Proposal>
ChainTrace mh_run(const Model& model, const Dataset& data, Proposal proposal, const Theta& theta0,
                  long n_iter, std::uint64_t seed, std::uint64_t chain = 0) {
  model.check(data);
  model.check_theta(data, theta0);
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if constexpr (requires { proposal.validate(); }) proposal.validate();

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "mh";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.reserve(static_cast<std::size_t>(n_iter));

  Theta theta = theta0;
  double lp = log_prior(model, theta);
  double ll = full_log_lik(model, data, theta);
  trace.setup_evals = static_cast<std::uint64_t>(data.n());

  for (long k = 1; k <= n_iter; ++k) {
    Theta prop = proposal.propose(theta, rs.proposal);
    const double log_u = std::log(uniform01(rs.accept));
    EvalCounter counter;
    const double lp_prop = log_prior(model, prop);
    const double ll_prop = full_log_lik(model, data, prop, &counter);
    const bool acc = mh_accept(log_u, mh_log_alpha(lp, ll, lp_prop, ll_prop, proposal.log_ratio(theta, prop)));
    if (acc) {
      theta = std::move(prop);
      lp = lp_prop;
      ll = ll_prop;
    }
    proposal.update(k, acc);
    trace.push(theta, acc, counter.count);
  }
  return trace;
}

}  // namespace tallmcmc
