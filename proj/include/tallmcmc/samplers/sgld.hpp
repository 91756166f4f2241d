#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "tallmcmc/models.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

/// eps_k = eps0 * k^-exponent; exponent 0 gives a constant step.
struct StepSchedule {
  double eps0 = 1e-4;
  double exponent = 1.0 / 3.0;

  bool constant() const noexcept { return exponent == 0.0; }
  double at(long k) const { return eps0 * std::pow(static_cast<double>(k), -exponent); }

  /// eps0 = scale^2, so the first step's noise sd equals a random-walk scale.
  static StepSchedule matching_rw_scale(double scale, double exponent = 1.0 / 3.0) {
    return {scale * scale, exponent};
  }

  void validate() const {
    if (!(eps0 > 0.0) || !std::isfinite(eps0)) throw std::invalid_argument("SGLD eps0 must be > 0");
    if (!(exponent >= 0.0)) throw std::invalid_argument("SGLD step exponent must be >= 0");
  }
};

struct SgldConfig {
  Index t_sub = 100;
  StepSchedule schedule;
  bool inject_noise = true;

  void validate() const {
    if (t_sub < 1) throw std::invalid_argument("SGLD subsample size must be >= 1");
    schedule.validate();
  }
};

/// theta_k = theta_{k-1} + (eps_k / 2)[grad log p + (n/t) sum_{x in batch} grad l_x]
///           + sqrt(eps_k) eta, batch drawn without replacement.
/// Weights are eps_k; accepted is always true; L_k = t_sub.
inline ChainTrace sgld_run(const Model& model, const Dataset& data, const SgldConfig& cfg, const Theta& theta0,
                           long n_iter, std::uint64_t seed, std::uint64_t chain = 0) {
  cfg.validate();
  model.check(data);
  model.check_theta(data, theta0);
  if (n_iter < 0) throw std::invalid_argument("n_iter must be >= 0");
  if (cfg.t_sub > data.n()) throw std::invalid_argument("SGLD subsample larger than the dataset");

  RandomStreams rs(seed, chain);
  ChainTrace trace;
  trace.sampler_tag = "sgld";
  trace.rng_seed = seed;
  trace.n_data = data.n();
  trace.reserve(static_cast<std::size_t>(n_iter));
  trace.weights.reserve(static_cast<std::size_t>(n_iter));

  const Index n = data.n();
  const double scale = static_cast<double>(n) / static_cast<double>(cfg.t_sub);
  Theta theta = theta0;
  detail::SubsampleMarks marks;
  for (long k = 1; k <= n_iter; ++k) {
    const double eps = cfg.schedule.at(k);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
    model.visit([&](const auto& f) {
      const auto a = f.at(theta);
      if (cfg.t_sub == n) {
        for (Index i = 0; i < n; ++i) g += a.grad(data, i);
      } else {
        marks.begin(n);
        marks.next_batch();
        for (Index r = 0; r < cfg.t_sub; ++r) {
          const Index i = marks.draw(rs.subsample, n, false);
          marks.mark(i);
          g += a.grad(data, i);
        }
      }
    });
    Theta next = theta + (0.5 * eps) * (grad_log_prior(model, theta) + scale * g);
    if (cfg.inject_noise) next += std::sqrt(eps) * standard_normal_vector(rs.noise, theta.size());
    if (!next.allFinite())
      throw std::runtime_error("SGLD update became non-finite at iteration " + std::to_string(k) +
                               " (step " + std::to_string(eps) + ")");
    theta = std::move(next);
    trace.push(theta, true, static_cast<std::uint64_t>(cfg.t_sub));
    trace.weights.push_back(eps);
  }
  return trace;
}

}  // namespace tallmcmc
