// Gaussian running example: vanilla MH against the confidence sampler with a
// Taylor proxy at the MAP, then Firefly and SGLD on the same data.

#include <cstdio>

#include "tallmcmc/tallmcmc.hpp"

using namespace tallmcmc;

int main() {
  SyntheticSpec spec;
  spec.n = 100000;
  spec.seed = 42;
  const Dataset data = generate(spec);
  const Model model(GaussianLocationScale{});

  const auto map = find_map(model, data, Theta::Zero(2));
  std::printf("MAP mu=%.5f log_sigma=%.5f (%d Newton steps)\n", map.theta[0], map.theta[1], map.iterations);
  const auto bvm = bvm_reference(model, data, Theta::Zero(2));
  std::printf("BvM sd: mu %.5f, log_sigma %.5f\n\n", std::sqrt(bvm.covariance(0, 0)),
              std::sqrt(bvm.covariance(1, 1)));

  const auto prop = ProposalRW::for_data_size(data.n());
  const long iters = 3000;

  const auto mh = mh_run(model, data, prop, map.theta, iters, 1);

  ConfidenceConfig cfg;
  cfg.delta = 0.1;
  cfg.proxy = ProxyPolicy{ProxyMode::single_at_map};
  const auto cs = confidence_run(model, data, cfg, prop, map.theta, iters, 1);

  const auto bounds = build_proxy(model, data, map.theta);
  const auto ff = firefly_run(model, data, bounds, FireflyConfig{0.1}, prop, map.theta, iters, 1);

  const auto sg = sgld_run(model, data, SgldConfig{1000, StepSchedule::matching_rw_scale(prop.scale), true},
                           map.theta, iters, 1);

  std::printf("%-17s %8s %10s %10s %12s %12s\n", "sampler", "accept", "mean L/n", "med L/n", "mean mu", "sd mu");
  for (const auto* t : {&mh, &cs, &ff, &sg}) {
    const auto e = eval_summary(*t);
    const auto [x, w] = trace_marginal(*t, 0, 300);
    const auto m = weighted_moments(x, w);
    std::printf("%-17s %8.3f %10.4f %10.4f %12.6f %12.6f\n", t->sampler_tag.c_str(), t->acceptance_rate(),
                e.mean_fraction, e.median_fraction, m.mean, m.sd);
  }

  std::size_t same = 0;
  for (std::size_t k = 0; k < mh.size(); ++k) same += mh.accepted[k] == cs.accepted[k];
  std::printf("\nsame seed, shared streams: confidence and MH agree on %zu of %zu decisions\n", same, mh.size());

  const auto cmp = compare_posteriors(cs, mh, 300, 300);
  std::printf("confidence vs MH: |mean gap| mu %.2e (mcse %.2e), log_sigma %.2e (mcse %.2e)\n",
              std::abs(cmp[0].mean_diff), std::hypot(cmp[0].mcse_a, cmp[0].mcse_b), std::abs(cmp[1].mean_diff),
              std::hypot(cmp[1].mcse_a, cmp[1].mcse_b));
  const auto acf = autocorrelation(trace_marginal(cs, 1, 300).first, 20);
  std::printf("confidence sampler log_sigma autocorrelation at lag 1, 10, 20: %.3f %.3f %.3f\n", acf.rho[1],
              acf.rho[10], acf.rho[20]);
  return 0;
}
