#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "tallmcmc/models.hpp"

namespace tallmcmc {

struct MapResult {
  Theta theta;
  double log_posterior = 0.0;
  double grad_inf_norm = 0.0;
  int iterations = 0;
  bool converged = false;  // false: best iterate returned, treat as a warning
};

struct MapOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

/// Damped Newton ascent on the log posterior, falling back to a
/// backtracking gradient step where the Hessian is not negative definite.
inline MapResult find_map(const Model& model, const Dataset& data, const Theta& theta_init,
                          const MapOptions& opt = {}) {
  model.check(data);
  model.check_theta(data, theta_init);
  if (!(opt.tolerance > 0.0)) throw std::invalid_argument("MAP tolerance must be > 0");

  auto objective = [&](const Theta& th) {
    const double v = log_posterior(model, data, th);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  auto derivs = [&](const Theta& th) {
    auto [g, h] = full_grad_hess(model, data, th);
    g += grad_log_prior(model, th);
    h += hess_log_prior(model, th);
    return std::make_pair(g, h);
  };

  MapResult res;
  res.theta = theta_init;
  res.log_posterior = objective(res.theta);
  if (!std::isfinite(res.log_posterior)) throw std::domain_error("log posterior is not finite at the start point");

  for (res.iterations = 0; res.iterations < opt.max_iterations; ++res.iterations) {
    auto [g, h] = derivs(res.theta);
    res.grad_inf_norm = g.lpNorm<Eigen::Infinity>();
    if (res.grad_inf_norm < opt.tolerance) {
      res.converged = true;
      return res;
    }
    Eigen::VectorXd dir = g;
    bool newton = false;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(-h);
    if (ldlt.info() == Eigen::Success && (ldlt.vectorD().array() > 0.0).all()) {
      Eigen::VectorXd d = ldlt.solve(g);
      if (d.allFinite() && d.dot(g) > 0.0) {
        dir = std::move(d);
        newton = true;
      }
    }
    double step = newton ? 1.0 : 1.0 / std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    // Rounding noise in a sum of n terms; lets Newton finish at the optimum.
    const double slack = 1e-13 * (1.0 + std::abs(res.log_posterior));
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      const Theta cand = res.theta + step * dir;
      const double v = objective(cand);
      if (v >= res.log_posterior - (newton && ls == 0 ? slack : 0.0)) {
        res.theta = cand;
        res.log_posterior = v;
        moved = true;
        break;
      }
    }
    if (!moved) break;  // no ascent possible at working precision
  }
  auto [g, h] = derivs(res.theta);
  res.grad_inf_norm = g.lpNorm<Eigen::Infinity>();
  res.converged = res.grad_inf_norm < opt.tolerance;
  return res;
}

}  // namespace tallmcmc
