#pragma once

#include <cmath>
#include <concepts>
#include <stdexcept>

#include "tallmcmc/dataset.hpp"
#include "tallmcmc/rng.hpp"

namespace tallmcmc {

/// Isotropic Gaussian random walk with optional Robbins-Monro tuning of
/// log(scale) toward a target acceptance rate over the first `horizon`
/// iterations. Symmetric, so log_ratio is always 0.
struct ProposalRW {
  double scale = 1.0;
  bool adapt = true;
  double target_rate = 0.5;
  long horizon = 1000;

  /// Initial scale c / sqrt(n).
  static ProposalRW for_data_size(Index n, double c = 1.0, bool adapt = true) {
    ProposalRW p;
    p.scale = c / std::sqrt(static_cast<double>(n));
    p.adapt = adapt;
    return p;
  }

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw std::invalid_argument("proposal scale must be positive");
    if (adapt && !(target_rate > 0.0 && target_rate < 1.0))
      throw std::invalid_argument("target acceptance rate must lie in (0, 1)");
    if (horizon < 0) throw std::invalid_argument("adaptation horizon must be >= 0");
  }

  Theta propose(const Theta& theta, CounterRng& rng) const {
    return theta + scale * standard_normal_vector(rng, theta.size());
  }

  double log_ratio(const Theta&, const Theta&) const { return 0.0; }

  /// Called once per iteration k = 1, 2, ... with the decision just made.
  void update(long k, bool accepted) {
    if (!adapt || k > horizon) return;
    const double gain = 1.0 / std::pow(static_cast<double>(k), 0.6);
    scale *= std::exp(gain * ((accepted ? 1.0 : 0.0) - target_rate));
  }
};

/// Proposals used by the samplers: propose(theta, rng), log_ratio(theta, theta')
/// = log q(theta | theta') - log q(theta' | theta), update(k, accepted).
template <class P>
concept RandomWalk = requires(P p, const Theta& t, CounterRng& rng) {
  { p.propose(t, rng) };
  { p.log_ratio(t, t) } -> std::convertible_to<double>;
  p.update(1L, true);
};

/// Proposes the current state back. Handy for degenerate-limit checks.
struct StayProposal {
  Theta propose(const Theta& theta, CounterRng&) const { return theta; }
  double log_ratio(const Theta&, const Theta&) const { return 0.0; }
  void update(long, bool) {}
};

}  // namespace tallmcmc
