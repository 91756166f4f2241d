#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

/// Start offsets of B contiguous, nearly equal batches (size B + 1).
inline std::vector<Index> contiguous_batches(Index n, int n_batches) {
  if (n_batches < 1 || n_batches > n) throw std::invalid_argument("need 1 <= batches <= n");
  std::vector<Index> starts(static_cast<std::size_t>(n_batches) + 1);
  for (int b = 0; b <= n_batches; ++b) starts[static_cast<std::size_t>(b)] = n * b / n_batches;
  return starts;
}

/// Factorised MH: stage b accepts with min(1, rho_b), where rho_b carries
/// p(theta)^{1/B}, q^{1/B} and the likelihood ratio of batch b. Stops at the
/// first failing stage. Batch log-likelihoods of the current state are kept,
/// so L_k is the number of data evaluated at the proposal.
template <RandomWalk Proposal>
ChainTrace delayed_acceptance_run(const Model& model, const Dataset& data, int n_batches, Proposal proposal,
                                  const Theta& theta0, long n_iter, std::uint64_t seed, std::uint64_t chain = 0) {
  model.check(data);
  model.check_theta(data, theta0);
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if constexpr (requires { proposal.validate(); }) proposal.validate();
  const auto starts = contiguous_batches(data.n(), n_batches);
  const double inv_b = 1.0 / static_cast<double>(n_batches);

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "delayed_acceptance";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.reserve(static_cast<std::size_t>(n_iter));

  auto batch_ll = [&](const Theta& th, int b) {
    return model.visit([&](const auto& f) {
      const auto a = f.at(th);
      double acc = 0.0;
      for (Index i = starts[static_cast<std::size_t>(b)]; i < starts[static_cast<std::size_t>(b) + 1]; ++i)
        acc += a.log_lik(data, i);
      return acc;
    });
  };

  Theta theta = theta0;
  double lp = log_prior(model, theta);
  std::vector<double> ll(static_cast<std::size_t>(n_batches)), ll_prop(ll.size());
  for (int b = 0; b < n_batches; ++b) ll[static_cast<std::size_t>(b)] = batch_ll(theta, b);
  trace.setup_evals = static_cast<std::uint64_t>(data.n());

  for (long k = 1; k <= n_iter; ++k) {
    Theta prop = proposal.propose(theta, rs.proposal);
    const double lp_prop = log_prior(model, prop);
    const double log_q = proposal.log_ratio(theta, prop);
    std::uint64_t evals = 0;
    bool acc = true;
    for (int b = 0; b < n_batches && acc; ++b) {
      const double log_u = std::log(uniform01(rs.accept));
      ll_prop[static_cast<std::size_t>(b)] = batch_ll(prop, b);
      evals += static_cast<std::uint64_t>(starts[static_cast<std::size_t>(b) + 1] - starts[static_cast<std::size_t>(b)]);
      acc = mh_accept(log_u, mh_log_alpha(lp * inv_b, ll[static_cast<std::size_t>(b)], lp_prop * inv_b,
                                          ll_prop[static_cast<std::size_t>(b)], log_q * inv_b));
    }
    if (acc) {
      theta = std::move(prop);
      lp = lp_prop;
      ll.swap(ll_prop);
    }
    proposal.update(k, acc);
    trace.push(theta, acc, evals);
  }
  return trace;
}

}  // namespace tallmcmc
