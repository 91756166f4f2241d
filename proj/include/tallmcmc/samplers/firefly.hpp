#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "tallmcmc/models.hpp"
#include "tallmcmc/proposal.hpp"
#include "tallmcmc/proxy.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

/// What Firefly needs from a posterior: per-datum log-likelihoods, lower
/// bounds b_i <= l_i, and the sum of the bounds in closed form.
template <class T>
concept FireflyTarget = requires(const T& t, Index i, const Theta& theta) {
  { t.size() } -> std::convertible_to<Index>;
  { t.log_prior(theta) } -> std::convertible_to<double>;
  { t.log_lik(i, theta) } -> std::convertible_to<double>;
  { t.lower_bound(i, theta) } -> std::convertible_to<double>;
  { t.lower_bound_sum(theta) } -> std::convertible_to<double>;
};

/// Taylor lower bounds b_i(theta) = taylor2_i(theta) - (M/6)||theta - theta_star||^3
/// read from a proxy's per-datum store. Outside the proxy's trust region the
/// bound is not valid and the target density is taken to be zero there.
class TaylorFireflyTarget {
public:
  TaylorFireflyTarget(const Model& model, const Dataset& data, TaylorProxy proxy)
      : model_(model), data_(data), proxy_(std::move(proxy)) {
    model_.check(data_);
    if (!proxy_.store || proxy_.store->n() != data_.n())
      throw std::invalid_argument("proxy store does not match the dataset");
  }

  Index size() const { return data_.n(); }
  const TaylorProxy& proxy() const noexcept { return proxy_; }

  double log_prior(const Theta& theta) const {
    if (!proxy_.covers(theta)) return -std::numeric_limits<double>::infinity();
    return tallmcmc::log_prior(model_, theta);
  }

  double log_lik(Index i, const Theta& theta) const {
    return model_.visit([&](const auto& f) { return f.at(theta).log_lik(data_, i); });
  }

  double lower_bound(Index i, const Theta& theta) const {
    const Eigen::VectorXd a = theta - proxy_.theta_star;
    const auto& s = *proxy_.store;
    return s.log_lik(i) + s.grad(i).dot(a) + 0.5 * s.quad(data_, i, a) - remainder(a);
  }

  double lower_bound_sum(const Theta& theta) const {
    const Eigen::VectorXd a = theta - proxy_.theta_star;
    const double nd = static_cast<double>(data_.n());
    return nd * (proxy_.mean_log_lik + proxy_.mu_hat.dot(a) + 0.5 * a.dot(proxy_.S_hat * a) - remainder(a));
  }

private:
  double remainder(const Eigen::VectorXd& a) const {
    const double r = remainder_norm(proxy_.norm, a);
    return proxy_.remainder_M / 6.0 * r * r * r;
  }

  Model model_;
  const Dataset& data_;
  TaylorProxy proxy_;
};

struct FireflyConfig {
  double resample_fraction = 0.1;
  /// b_i - l_i up to this (relative) size is rounding and treated as b_i = l_i.
  double bound_slack = 1e-12;

  void validate() const {
    if (!(resample_fraction > 0.0 && resample_fraction <= 1.0))
      throw std::invalid_argument("resample fraction must lie in (0, 1]");
    if (!(bound_slack >= 0.0)) throw std::invalid_argument("bound slack must be >= 0");
  }
};

namespace detail {

/// log(e^{l - b} - 1) for a bright point; throws when b > l beyond slack.
inline double bright_log_weight(double l, double b, double slack, Index i) {
  const double gap = l - b;
  if (gap < 0.0) {
    if (-gap > slack * (1.0 + std::abs(l)))
      throw std::domain_error("invalid Firefly bound at datum " + std::to_string(i) + ": b_i > l_i");
    return -std::numeric_limits<double>::infinity();
  }
  return std::log(std::expm1(gap));
}

/// P(z_i = 1 | theta) = 1 - exp(b_i - l_i), clamped at 0 within the slack.
inline double bright_probability(double l, double b, double slack, Index i) {
  const double gap = l - b;
  if (gap < 0.0) {
    if (-gap > slack * (1.0 + std::abs(l)))
      throw std::domain_error("invalid Firefly bound at datum " + std::to_string(i) + ": b_i > l_i");
    return 0.0;
  }
  return -std::expm1(-gap);
}

}  // namespace detail

/// Firefly state beyond theta: the brightness vector and the cached
/// l_i(theta) of the bright points.
struct FireflyState {
  std::vector<char> z;
  std::vector<Index> bright;    // indices with z_i = 1
  std::vector<Index> position;  // index into `bright`, or -1
  std::vector<double> ll;       // l_i(theta), valid for bright points

  void resize(Index n) {
    z.assign(static_cast<std::size_t>(n), 0);
    bright.clear();
    position.assign(static_cast<std::size_t>(n), -1);
    ll.assign(static_cast<std::size_t>(n), 0.0);
  }
  void set(Index i, bool on) {
    auto& zi = z[static_cast<std::size_t>(i)];
    if (static_cast<bool>(zi) == on) return;
    zi = on;
    if (on) {
      position[static_cast<std::size_t>(i)] = static_cast<Index>(bright.size());
      bright.push_back(i);
    } else {
      const Index p = position[static_cast<std::size_t>(i)];
      const Index last = bright.back();
      bright[static_cast<std::size_t>(p)] = last;
      position[static_cast<std::size_t>(last)] = p;
      bright.pop_back();
      position[static_cast<std::size_t>(i)] = -1;
    }
  }
};

/// MH-within-Gibbs on (theta, z). Each sweep: a theta move under the
/// extended target, then a refresh of max(1, round(f n)) brightness
/// variables chosen without replacement. L_k = resampled + bright points.
/// z starts from its conditional at theta0 (n evaluations, reported as setup).
/// `on_sweep(theta, z)` is called after every sweep when given.
template <FireflyTarget Target, RandomWalk Proposal, class OnSweep = std::nullptr_t>
ChainTrace firefly_run_target(const Target& target, const FireflyConfig& cfg, Proposal proposal,
                              const Theta& theta0, long n_iter, std::uint64_t seed, std::uint64_t chain = 0,
                              OnSweep on_sweep = nullptr) {
  cfg.validate();
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  detail::require_finite(theta0);
  if constexpr (requires { proposal.validate(); }) proposal.validate();
  const Index n = target.size();
  if (n < 1) throw std::invalid_argument("Firefly needs a nonempty dataset");
  const Index m = std::clamp<Index>(
      static_cast<Index>(std::llround(cfg.resample_fraction * static_cast<double>(n))), 1, n);

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "firefly";
  trace.rng_seed = seed;
  trace.n_data = n;
  trace.reserve(static_cast<std::size_t>(n_iter));

  Theta theta = theta0;
  double lp = target.log_prior(theta);
  if (!std::isfinite(lp)) throw std::domain_error("Firefly start lies outside the bound's validity region");

  FireflyState st;
  st.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double l = target.log_lik(i, theta);
    const double p1 = detail::bright_probability(l, target.lower_bound(i, theta), cfg.bound_slack, i);
    if (uniform01(rs.auxiliary) < p1) {
      st.set(i, true);
      st.ll[static_cast<std::size_t>(i)] = l;
    }
  }
  trace.setup_evals = static_cast<std::uint64_t>(n);

  auto bright_sum = [&](const Theta& th, const std::vector<double>& lls) {
    double s = 0.0;
    for (Index i : st.bright)
      s += detail::bright_log_weight(lls[static_cast<std::size_t>(i)], target.lower_bound(i, th), cfg.bound_slack,
                                     i);
    return s;
  };

  double log_tgt = lp + target.lower_bound_sum(theta) + bright_sum(theta, st.ll);
  std::vector<double> ll_prop(static_cast<std::size_t>(n), 0.0);
  detail::SubsampleMarks marks;

  for (long k = 1; k <= n_iter; ++k) {
    // theta | z
    Theta prop = proposal.propose(theta, rs.proposal);
    const double log_u = std::log(uniform01(rs.accept));
    const double lp_prop = target.log_prior(prop);
    const std::uint64_t n_bright = st.bright.size();
    bool acc = false;
    if (std::isfinite(lp_prop)) {
      for (Index i : st.bright) ll_prop[static_cast<std::size_t>(i)] = target.log_lik(i, prop);
      const double log_tgt_prop = lp_prop + target.lower_bound_sum(prop) + bright_sum(prop, ll_prop);
      acc = log_u < log_tgt_prop - log_tgt + proposal.log_ratio(theta, prop);
      if (acc) {
        theta = std::move(prop);
        lp = lp_prop;
        for (Index i : st.bright) st.ll[static_cast<std::size_t>(i)] = ll_prop[static_cast<std::size_t>(i)];
      }
    }
    proposal.update(k, acc);

    // z | theta on a random subset
    marks.begin(n);
    marks.next_batch();
    for (Index r = 0; r < m; ++r) {
      const Index i = marks.draw(rs.subsample, n, false);
      marks.mark(i);
      const double l = target.log_lik(i, theta);
      const double p1 = detail::bright_probability(l, target.lower_bound(i, theta), cfg.bound_slack, i);
      const bool on = uniform01(rs.auxiliary) < p1;
      st.set(i, on);
      if (on) st.ll[static_cast<std::size_t>(i)] = l;
    }
    log_tgt = lp + target.lower_bound_sum(theta) + bright_sum(theta, st.ll);

    if constexpr (!std::is_same_v<OnSweep, std::nullptr_t>) on_sweep(theta, st.z);
    trace.push(theta, acc, static_cast<std::uint64_t>(m) + n_bright);
  }
  return trace;
}

/// Firefly on a model with Taylor bounds built at theta_star.
template <RandomWalk Proposal>
ChainTrace firefly_run(const Model& model, const Dataset& data, const TaylorProxy& bounds, const FireflyConfig& cfg,
                       Proposal proposal, const Theta& theta0, long n_iter, std::uint64_t seed,
                       std::uint64_t chain = 0) {
  model.check_theta(data, theta0);
  TaylorFireflyTarget target(model, data, bounds);
  return firefly_run_target(target, cfg, std::move(proposal), theta0, n_iter, seed, chain);
}

// ---------------------------------------------------------------------------
// Pseudo-marginal view of the Firefly construction

struct FireflyVariance {
  double value = 0.0;
  bool infinite = false;  // some l_i = b_i with I_theta interior
};

/// Var_z[sum_i log p(x_i | theta, z_i)] with z_i = 1 w.p. 1 - I_theta:
/// I(1 - I) sum_i log^2[(I / (1 - I)) (e^{l_i - b_i} - 1)].
inline FireflyVariance firefly_pm_variance(const Eigen::VectorXd& ell, const Eigen::VectorXd& b, double I_theta) {
  if (ell.size() != b.size()) throw std::invalid_argument("ell and b differ in length");
  if (!(I_theta > 0.0 && I_theta < 1.0)) throw std::invalid_argument("I_theta must lie in (0, 1)");
  const double odds = std::log(I_theta) - std::log1p(-I_theta);
  double s = 0.0;
  for (Index i = 0; i < ell.size(); ++i) {
    const double gap = ell[i] - b[i];
    if (gap < 0.0) throw std::invalid_argument("firefly_pm_variance needs b_i <= l_i");
    if (gap == 0.0) return {std::numeric_limits<double>::infinity(), true};
    const double v = odds + std::log(std::expm1(gap));
    s += v * v;
  }
  return {I_theta * (1.0 - I_theta) * s, false};
}

/// log of the unbiased estimate p(theta) prod_i p(x_i | theta, z_i) for a
/// given brightness vector, without the log prior.
inline double firefly_pm_log_estimate(const Eigen::VectorXd& ell, const Eigen::VectorXd& b, double I_theta,
                                      const std::vector<char>& z) {
  if (ell.size() != b.size() || static_cast<std::size_t>(ell.size()) != z.size())
    throw std::invalid_argument("ell, b and z differ in length");
  if (!(I_theta > 0.0 && I_theta < 1.0)) throw std::invalid_argument("I_theta must lie in (0, 1)");
  double s = 0.0;
  for (Index i = 0; i < ell.size(); ++i) {
    if (z[static_cast<std::size_t>(i)]) {
      const double gap = ell[i] - b[i];
      if (gap < 0.0) throw std::invalid_argument("firefly_pm_log_estimate needs b_i <= l_i");
      s += b[i] + std::log(std::expm1(gap)) - std::log1p(-I_theta);
    } else {
      s += b[i] - std::log(I_theta);
    }
  }
  return s;
}

}  // namespace tallmcmc
