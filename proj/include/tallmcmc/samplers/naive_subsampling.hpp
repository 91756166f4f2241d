#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "tallmcmc/models.hpp"
#include "tallmcmc/samplers/common.hpp"
#include "tallmcmc/samplers/rhee_glynn.hpp"

namespace tallmcmc {

/// unbiased: l_hat = (1/n) sum z_i l_i / lambda;  biased: l_tilde = (1/n) sum z_i l_i,
/// with z_i ~ Bernoulli(lambda).
enum class NaiveEstimator { unbiased, biased };

struct NaiveRow {
  Theta theta;
  double log_lik = 0.0;           // sum_i l_i(theta)
  double log_expect_exact = 0.0;  // log E e^{n l_hat}: sum_i log(lambda e^{l_i / lambda} + 1 - lambda) or biased analogue
  double log_expect_mc = 0.0;     // Monte Carlo estimate of the same
  double log_expect_mc_se = 0.0;  // relative standard error of the MC mean
  double target = 0.0;            // pi on the grid, normalised
  double induced = 0.0;           // p(theta) E e^{...} on the grid, normalised (exact product)
};

/// log E e^{n l_hat(theta)} in closed form from the per-datum values.
inline double naive_log_expectation(const std::vector<double>& ell, double lambda, NaiveEstimator est) {
  const double log_l = std::log(lambda);
  const double log_1ml = lambda < 1.0 ? std::log1p(-lambda) : -std::numeric_limits<double>::infinity();
  double s = 0.0;
  for (double l : ell) {
    const double x = est == NaiveEstimator::unbiased ? l / lambda : l;
    s += detail::log_add_exp(log_l + x, log_1ml);
  }
  return s;
}

/// Evaluates, on each grid point, the exact and Monte-Carlo expectation of the
/// exponentiated naive estimator and the normalised target it induces,
/// next to the true posterior on the same grid.
inline std::vector<NaiveRow> naive_subsample_demo(const Model& model, const Dataset& data, double lambda,
                                                  NaiveEstimator est, const std::vector<Theta>& grid, long n_mc,
                                                  CounterRng& rng) {
  model.check(data);
  if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("lambda must lie in (0, 1]");
  if (n_mc < 1) throw std::invalid_argument("need at least one Monte Carlo replicate");
  if (grid.empty()) throw std::invalid_argument("empty theta grid");
  std::vector<NaiveRow> rows;
  rows.reserve(grid.size());
  std::vector<double> ell(static_cast<std::size_t>(data.n()));
  for (const auto& theta : grid) {
    model.check_theta(data, theta);
    NaiveRow r;
    r.theta = theta;
    model.visit([&](const auto& f) {
      const auto a = f.at(theta);
      for (Index i = 0; i < data.n(); ++i) ell[static_cast<std::size_t>(i)] = a.log_lik(data, i);
    });
    for (double l : ell) r.log_lik += l;
    r.log_expect_exact = naive_log_expectation(ell, lambda, est);

    // log-mean-exp over replicates, plus the relative standard error
    std::vector<double> logs(static_cast<std::size_t>(n_mc));
    double mx = -std::numeric_limits<double>::infinity();
    for (auto& v : logs) {
      double s = 0.0;
      for (double l : ell)
        if (uniform01(rng) < lambda) s += est == NaiveEstimator::unbiased ? l / lambda : l;
      v = s;
      mx = std::max(mx, s);
    }
    double m1 = 0.0, m2 = 0.0;
    for (double v : logs) {
      const double e = std::exp(v - mx);
      m1 += e;
      m2 += e * e;
    }
    const double nm = static_cast<double>(n_mc);
    m1 /= nm;
    m2 /= nm;
    r.log_expect_mc = mx + std::log(m1);
    r.log_expect_mc_se = n_mc > 1 ? std::sqrt(std::max(0.0, m2 - m1 * m1) / (nm - 1.0)) / m1 : 0.0;
    rows.push_back(std::move(r));
  }

  auto normalise = [&](auto get, auto set) {
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) mx = std::max(mx, get(r));
    double z = 0.0;
    for (const auto& r : rows) z += std::exp(get(r) - mx);
    for (auto& r : rows) set(r, std::exp(get(r) - mx) / z);
  };
  normalise([&](const NaiveRow& r) { return log_prior(model, r.theta) + r.log_lik; },
            [](NaiveRow& r, double v) { r.target = v; });
  normalise([&](const NaiveRow& r) { return log_prior(model, r.theta) + r.log_expect_exact; },
            [](NaiveRow& r, double v) { r.induced = v; });
  return rows;
}

}  // namespace tallmcmc
