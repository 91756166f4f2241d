#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

struct RheeGlynnConfig {
  Index t = 100;     // subsample size of each D*_j
  double eps = 1.0;  // N ~ Geometric(eps / (1 + eps)), P(N >= k) = (1 + eps)^-k

  void validate() const {
    if (t < 1) throw std::invalid_argument("Rhee-Glynn subsample size must be >= 1");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw std::invalid_argument("Rhee-Glynn eps must be > 0");
  }
};

struct RheeGlynnDraw {
  double log_y = 0.0;  // log Y (-inf when Y = 0)
  long terms = 0;      // N
  std::uint64_t evals = 0;
};

namespace detail {

inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

}  // namespace detail

/// Draws Y = e^{n a}[1 + sum_{k=1}^N (1+eps)^k / k! prod_{j<=k} D*_j] in log
/// space, with D*_j = (n/t) sum of (l_i - a) over a fresh with-replacement
/// subsample. Throws when a sampled l_i falls below a_theta.
inline RheeGlynnDraw rhee_glynn_draw(const Model& model, const Dataset& data, const Theta& theta, double a_theta,
                                     const RheeGlynnConfig& cfg, CounterRng& rng) {
  cfg.validate();
  model.check_theta(data, theta);
  if (!std::isfinite(a_theta)) throw std::invalid_argument("a_theta must be finite");
  const Index n = data.n();
  const double nd = static_cast<double>(n);
  std::geometric_distribution<long> geo(cfg.eps / (1.0 + cfg.eps));

  RheeGlynnDraw out;
  out.terms = geo(rng);
  const double log_growth = std::log1p(cfg.eps);
  double log_prod = 0.0;  // log of prod_{j<=k} (1+eps) D*_j / j
  double log_series = 0.0;  // log(1 + ...)
  model.visit([&](const auto& f) {
    const auto at = f.at(theta);
    for (long k = 1; k <= out.terms; ++k) {
      double s = 0.0;
      for (Index r = 0; r < cfg.t; ++r) {
        const auto i = static_cast<Index>(uniform_index(rng, static_cast<std::size_t>(n)));
        const double d = at.log_lik(data, i) - a_theta;
        if (d < 0.0) throw std::domain_error("a_theta is not a lower bound: l_i < a at datum " + std::to_string(i));
        s += d;
      }
      out.evals += static_cast<std::uint64_t>(cfg.t);
      const double dj = nd / static_cast<double>(cfg.t) * s;
      log_prod += log_growth + std::log(dj) - std::log(static_cast<double>(k));
      log_series = detail::log_add_exp(log_series, log_prod);
    }
  });
  out.log_y = nd * a_theta + log_series;
  return out;
}

/// Y itself; may overflow to +inf for large n (use rhee_glynn_draw then).
inline double rhee_glynn_estimate(const Model& model, const Dataset& data, const Theta& theta, double a_theta,
                                  Index t, double eps, CounterRng& rng) {
  return std::exp(rhee_glynn_draw(model, data, theta, a_theta, RheeGlynnConfig{t, eps}, rng).log_y);
}

/// Leading term of the lower bound on Var(Y) / e^{2 n l(theta)}:
/// exp(-2n gap + 2n s) / (n s), s = sqrt((1 + eps)(sigma_t^2 + gap^2)).
/// Returned in log space to survive large n.
inline double rhee_glynn_log_variance_lower_bound(Index n, double sigma_t, double gap, double eps) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  if (!(sigma_t >= 0.0) || !(gap >= 0.0) || !(eps > 0.0))
    throw std::invalid_argument("need sigma_t >= 0, gap >= 0, eps > 0");
  const double s = std::sqrt((1.0 + eps) * (sigma_t * sigma_t + gap * gap));
  if (!(s > 0.0)) throw std::domain_error("bound undefined for sigma_t = gap = 0");
  const double nd = static_cast<double>(n);
  return -2.0 * nd * gap + 2.0 * nd * s - std::log(nd * s);
}

inline double rhee_glynn_variance_lower_bound(Index n, double sigma_t, double gap, double eps) {
  return std::exp(rhee_glynn_log_variance_lower_bound(n, sigma_t, gap, eps));
}

/// Pseudo-marginal MH on p(theta) Y(theta), with a(theta) from the model's
/// constant-time uniform lower bound. The estimate at the current state is
/// kept until the chain moves; L_k counts the proposal's subsample draws.
template <RandomWalk Proposal>
ChainTrace rhee_glynn_pm_run(const Model& model, const Dataset& data, const RheeGlynnConfig& cfg,
                             Proposal proposal, const Theta& theta0, long n_iter, std::uint64_t seed,
                             std::uint64_t chain = 0) {
  cfg.validate();
  model.check(data);
  model.check_theta(data, theta0);
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if constexpr (requires { proposal.validate(); }) proposal.validate();

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "rhee_glynn_pm";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.reserve(static_cast<std::size_t>(n_iter));
  trace.bounded_evals = false;

  Theta theta = theta0;
  auto first = rhee_glynn_draw(model, data, theta, uniform_lower_bound(model, data, theta), cfg, rs.subsample);
  double log_target = log_prior(model, theta) + first.log_y;
  trace.setup_evals = first.evals;
  for (long k = 1; k <= n_iter; ++k) {
    Theta prop = proposal.propose(theta, rs.proposal);
    const double log_u = std::log(uniform01(rs.accept));
    const auto d = rhee_glynn_draw(model, data, prop, uniform_lower_bound(model, data, prop), cfg, rs.subsample);
    const double log_target_prop = log_prior(model, prop) + d.log_y;
    const bool acc = log_u < log_target_prop - log_target + proposal.log_ratio(theta, prop);
    if (acc) {
      theta = std::move(prop);
      log_target = log_target_prop;
    }
    proposal.update(k, acc);
    trace.push(theta, acc, d.evals);
  }
  return trace;
}

}  // namespace tallmcmc
