// Acceptance suite: one line per criterion, nonzero exit if any fails.
// Usage: acceptance [criterion numbers...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "tallmcmc/tallmcmc.hpp"

using namespace tallmcmc;

namespace {

// Pinned tolerances.
constexpr long kExactIters = 100;
constexpr double kMeanSeBand = 3.0;
constexpr double kGaussMedianFraction = 0.1;
constexpr double kSaturationRatioLo = 0.5, kSaturationRatioHi = 2.0;
constexpr double kSaturationSlope = 0.7;
constexpr double kFireflyVarianceRelTol = 1e-10;
constexpr double kRgSeBand = 3.0;
constexpr double kRgAcceptMax = 0.05;
constexpr double kFireflyTv = 0.02;
constexpr double kFireflyLo = 0.08, kFireflyHi = 0.2;
constexpr double kAusterityUsage = 0.2;
constexpr double kGradTol = 1e-5, kHessTol = 1e-4;
constexpr double kCovLo = 0.2, kCovHi = 0.7, kRhatMax = 1.05;
constexpr double kSgldAbs = 0.05, kSgldWRatio = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Dataset synth(SyntheticKind kind, Index n, std::uint64_t seed, Index d = 2) {
  SyntheticSpec s;
  s.kind = kind;
  s.n = n;
  s.seed = seed;
  s.d = d;
  return generate(s);
}
Dataset gaussian_data(Index n, std::uint64_t seed) { return synth(SyntheticKind::gaussian_1d, n, seed); }
Dataset lognormal_data(Index n, std::uint64_t seed) { return synth(SyntheticKind::lognormal_1d, n, seed); }
Dataset logistic_data(Index n, std::uint64_t seed, Index d = 2) {
  return synth(SyntheticKind::logistic_two_gaussians, n, seed, d);
}
Dataset gamma_data(Index n, std::uint64_t seed, Index d = 3) {
  return synth(SyntheticKind::gamma_from_covariates, n, seed, d);
}

Model gaussian_model() { return Model(GaussianLocationScale{}); }
Model logistic_model(Index d) { return Model(LogisticRegression{}, CauchyPrior::standard(d)); }
Model gamma_model(Index d, double kappa = 2.0, double radius = 0.5) {
  return Model(GammaRegression{kappa}, CauchyPrior::standard(d, 2.5, 10.0, true), radius);
}

Theta map_of(const Model& m, const Dataset& data, Theta init) {
  const auto r = find_map(m, data, init);
  if (!r.converged) std::fprintf(stderr, "warning: MAP search did not converge\n");
  return r.theta;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, 0.5);
}

struct Case {
  std::string name;
  Model model;
  Dataset data;
  Theta start;
};

std::vector<Case> three_models() {
  std::vector<Case> cs;
  {
    auto d = gaussian_data(1000, 11);
    auto m = gaussian_model();
    auto s = map_of(m, d, Theta::Zero(2));
    cs.push_back({"gaussian", m, std::move(d), s});
  }
  {
    auto d = logistic_data(1000, 12);
    auto m = logistic_model(2);
    auto s = map_of(m, d, Theta::Zero(2));
    cs.push_back({"logistic", m, std::move(d), s});
  }
  {
    auto d = gamma_data(1000, 13);
    auto m = gamma_model(3);
    auto s = map_of(m, d, Theta::Zero(3));
    cs.push_back({"gamma", m, std::move(d), s});
  }
  return cs;
}

// ---------------------------------------------------------------------------

Outcome criterion_1() {
  Outcome out{true, ""};
  for (const auto& c : three_models()) {
    const auto prop = ProposalRW::for_data_size(c.data.n());
    const auto mh = mh_run(c.model, c.data, prop, c.start, kExactIters, 101);
    ConfidenceConfig plain;
    plain.schedule = DeltaSchedule::unreachable;
    ConfidenceConfig proxied = plain;
    proxied.proxy = ProxyPolicy{ProxyMode::drop_every_alpha, 10};
    int mismatches = 0;
    for (const auto& cfg : {plain, proxied}) {
      const auto cf = confidence_run(c.model, c.data, cfg, prop, c.start, kExactIters, 101);
      for (long k = 0; k < kExactIters; ++k)
        if (cf.accepted[static_cast<std::size_t>(k)] != mh.accepted[static_cast<std::size_t>(k)] ||
            (cf.states[static_cast<std::size_t>(k)].array() != mh.states[static_cast<std::size_t>(k)].array()).any())
          ++mismatches;
    }
    const double rate = mh.acceptance_rate();
    out.pass = out.pass && mismatches == 0;
    out.detail += fmt("%s: %d mismatches (MH accept %.2f); ", c.name.c_str(), mismatches, rate);
  }
  return out;
}

Outcome criterion_2() {
  const Index n = 100000;
  const auto data = gaussian_data(n, 2);
  const auto model = gaussian_model();
  const Theta map = map_of(model, data, Theta::Zero(2));
  const long n_conf = 10000, n_mh = 5 * n_conf, burn = 1000;
  ConfidenceConfig cfg;
  cfg.proxy = ProxyPolicy{ProxyMode::single_at_map};
  const auto prop = ProposalRW::for_data_size(n);
  const auto conf = confidence_run(model, data, cfg, prop, map, n_conf, 21);
  const auto mh = mh_run(model, data, prop, map, n_mh, 22);
  const auto cmp = compare_posteriors(conf, mh, burn, burn);
  Outcome out{true, ""};
  const char* names[] = {"mu", "log sigma"};
  for (std::size_t j = 0; j < 2; ++j) {
    const double band = kMeanSeBand * std::hypot(cmp[j].mcse_a, cmp[j].mcse_b);
    out.pass = out.pass && std::abs(cmp[j].mean_diff) <= band;
    out.detail += fmt("%s gap %.2e (band %.2e); ", names[j], std::abs(cmp[j].mean_diff), band);
  }
  const auto s = eval_summary(conf);
  out.pass = out.pass && s.median_fraction < kGaussMedianFraction;
  out.detail += fmt("median L/n %.4f, mean L/n %.4f", s.median_fraction, s.mean_fraction);
  return out;
}

Outcome criterion_3() {
  const std::vector<Index> sizes{1000, 10000, 100000};
  const auto full = logistic_data(sizes.back(), 3);
  const auto model = logistic_model(2);
  std::vector<double> med_l, med_log_frac;
  Outcome out{true, ""};
  for (Index n : sizes) {
    const Dataset data = n == full.n() ? full : subset(full, n, 31);
    const Theta map = map_of(model, data, Theta::Zero(2));
    ConfidenceConfig cfg;
    cfg.proxy = ProxyPolicy{ProxyMode::single_at_map};
    const auto tr = confidence_run(model, data, cfg, ProposalRW::for_data_size(n), map, 3000, 32);
    std::vector<double> l, lf;
    for (auto e : tr.evals) {
      l.push_back(static_cast<double>(e));
      lf.push_back(std::log10(static_cast<double>(std::max<std::uint64_t>(e, 1)) / static_cast<double>(n)));
    }
    med_l.push_back(median(l));
    med_log_frac.push_back(median(lf));
    out.detail += fmt("n=%ld median L %.0f log10(L/n) %.2f; ", static_cast<long>(n), med_l.back(), med_log_frac.back());
  }
  const double ratio = med_l[2] / med_l[1];
  const double slope = (med_log_frac.front() - med_log_frac.back()) / 2.0;
  out.pass = ratio >= kSaturationRatioLo && ratio <= kSaturationRatioHi && slope >= kSaturationSlope;
  out.detail += fmt("ratio %.2f, decrease per decade %.2f", ratio, slope);
  return out;
}

Outcome criterion_4() {
  const Index n = 10000;
  const auto data = gaussian_data(n, 4);
  const auto model = gaussian_model();
  const Theta map = map_of(model, data, Theta::Zero(2));
  const auto proxy = build_proxy(model, data, map);
  const Theta th = map + Theta{{0.004, -0.006}};
  const Theta tp = map + Theta{{-0.011, 0.007}};
  // Proxy-corrected ratios and raw ratios, each with its own range constant.
  std::vector<double> corr(static_cast<std::size_t>(n)), raw(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    raw[static_cast<std::size_t>(i)] = log_lik_i(model, data, i, tp) - log_lik_i(model, data, i, th);
    corr[static_cast<std::size_t>(i)] =
        raw[static_cast<std::size_t>(i)] - proxy_pair_i(proxy, model, data, i, th, tp);
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  struct Series {
    const char* name;
    const std::vector<double>* r;
    double C;
  } series[] = {{"proxy", &corr, 2.0 * remainder_bound(proxy, th, tp)}, {"raw", &raw, *hi - *lo}};

  CounterRng rng(stream_key(4, 0, Stream::subsample));
  Outcome out{true, ""};
  for (const auto& s : series) {
    const double full_mean = std::accumulate(s.r->begin(), s.r->end(), 0.0) / static_cast<double>(n);
    for (double delta : {0.1, 0.01}) {
      for (std::uint64_t t : {10u, 100u, 1000u}) {
        const int reps = 10000;
        int covered = 0;
        for (int rep = 0; rep < reps; ++rep) {
          double m = 0.0, m2 = 0.0;
          for (std::uint64_t k = 0; k < t; ++k) {
            const double v = (*s.r)[uniform_index(rng, static_cast<std::size_t>(n))];
            const double d = v - m;
            m += d / static_cast<double>(k + 1);
            m2 += d * (v - m);
          }
          const double sd = std::sqrt(m2 / static_cast<double>(t));
          if (std::abs(m - full_mean) <= bernstein_bound(sd, s.C, t, delta)) ++covered;
        }
        const double freq = static_cast<double>(covered) / reps;
        out.pass = out.pass && freq >= 1.0 - delta;
        if (t == 10) out.detail += fmt("%s d=%.2f:", s.name, delta);
        out.detail += fmt(" %.4f", freq);
        if (t == 1000) out.detail += "; ";
      }
    }
  }
  return out;
}

Outcome criterion_5() {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> size(1, 12);
  std::normal_distribution<double> normal;
  std::exponential_distribution<double> expo(1.0);
  std::uniform_real_distribution<double> unif(0.05, 0.95);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const int n = size(gen);
    Eigen::VectorXd ell(n), b(n);
    for (int i = 0; i < n; ++i) {
      ell[i] = normal(gen);
      b[i] = ell[i] - (0.01 + expo(gen));
    }
    const double I = unif(gen);
    // Enumerate all z in {0,1}^n with P(z_i = 1) = 1 - I.
    std::vector<double> w, x;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      double logw = 0.0, s = 0.0;
      for (int i = 0; i < n; ++i) {
        if (mask >> i & 1u) {
          logw += std::log(1.0 - I);
          s += std::log((std::exp(ell[i]) - std::exp(b[i])) / (1.0 - I));
        } else {
          logw += std::log(I);
          s += b[i] - std::log(I);
        }
      }
      w.push_back(std::exp(logw));
      x.push_back(s);
    }
    double mean = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) mean += w[k] * x[k];
    double var = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) var += w[k] * (x[k] - mean) * (x[k] - mean);
    const auto got = firefly_pm_variance(ell, b, I);
    const double rel = got.infinite ? INFINITY : std::abs(got.value - var) / std::abs(var);
    worst = std::max(worst, rel);
  }
  return {worst <= kFireflyVarianceRelTol, fmt("50 instances, worst relative error %.2e", worst)};
}

/// E[(Y e^{-na})^2] for D_j iid with mean m and second moment s2:
/// sum_{k<=l} c_kl (1+eps)^{-l} w_k w_l s2^k m^(l-k), w_k = (1+eps)^k / k!, in log space.
double rg_log_second_moment(double m, double s2, double eps, int kmax) {
  double acc = -INFINITY;
  const double le = std::log1p(eps);
  for (int k = 0; k <= kmax; ++k)
    for (int l = k; l <= kmax; ++l) {
      const double lw = (k + l) * le - std::lgamma(k + 1.0) - std::lgamma(l + 1.0) - l * le + k * std::log(s2) +
                        (l > k ? (l - k) * std::log(m) : 0.0) + (l > k ? std::log(2.0) : 0.0);
      acc = detail::log_add_exp(acc, lw);
    }
  return acc;
}

Outcome criterion_6() {
  // Hand-written toy, so the estimator's tails are reachable by 1e5 replicates.
  RowMatrix x(5, 1);
  x << -0.8, -0.3, 0.1, 0.5, 0.9;
  const Dataset toy(x);
  const auto model = gaussian_model();
  const Theta th{{0.2, 0.1}};
  const Index t = 5;
  const double eps = 1.0;
  const double a = uniform_lower_bound(model, toy, th);
  std::vector<double> gaps;
  for (Index i = 0; i < toy.n(); ++i) gaps.push_back(log_lik_i(model, toy, i, th) - a);
  const double nl = full_log_lik(model, toy, th);
  const double gap = nl - 5.0 * a;
  // Exact standard error of the Monte-Carlo mean of Y / e^{nl}.
  double v = 0.0;
  for (double g : gaps) v += (g - gap / 5.0) * (g - gap / 5.0) / 5.0;
  const double var_d = 25.0 / static_cast<double>(t) * v;
  const double rel_var = std::exp(rg_log_second_moment(gap, var_d + gap * gap, eps, 150) - 2.0 * gap) - 1.0;
  const int reps = 100000;
  const double se_exact = std::sqrt(rel_var / reps);

  CounterRng rng(stream_key(6, 0, Stream::subsample));
  double m = 0.0, m2 = 0.0;
  bool nonneg = true;
  for (int r = 0; r < reps; ++r) {
    const auto d = rhee_glynn_draw(model, toy, th, a, RheeGlynnConfig{t, eps}, rng);
    const double y = std::exp(d.log_y - nl);  // Y / e^{n l}
    if (!(y >= 0.0)) nonneg = false;
    const double dv = y - m;
    m += dv / (r + 1);
    m2 += dv * (y - m);
  }
  const double se = std::sqrt(m2 / (reps - 1) / reps);
  const bool unbiased = std::abs(m - 1.0) <= kRgSeBand * se_exact;

  // Pseudo-marginal chain on the running example, with the MH-optimal
  // isotropic scale from the Bernstein-von Mises covariance, no adaptation.
  const Index n = 100000;
  const auto data = gaussian_data(n, 61);
  const auto ref = bvm_reference(model, data, Theta::Zero(2));
  ProposalRW prop;
  prop.scale = 2.38 / std::sqrt(2.0) * std::sqrt(ref.covariance.trace() / 2.0);
  prop.adapt = false;
  const auto pm = rhee_glynn_pm_run(model, data, RheeGlynnConfig{100, 1.0}, prop, ref.center, 10000, 62);
  const auto mh = mh_run(model, data, prop, ref.center, 10000, 62);
  const double rate = pm.acceptance_rate();
  return {nonneg && unbiased && rate < kRgAcceptMax,
          fmt("toy gap %.3f, mean Y/e^{nl} %.4f (exact se %.4f, sample se %.4f), nonnegative %s; "
              "pseudo-marginal acceptance %.4f vs MH %.4f at the same scale, final log sigma %.3f (MAP %.3f)",
              gap, m, se_exact, se, nonneg ? "yes" : "no", rate, mh.acceptance_rate(), pm.states.back()[1],
              ref.center[1])};
}

/// n = 3, theta on {0, 1}, hand-set l_i and b_i.
struct ToyFirefly {
  double l[2][3] = {{-1.0, -0.5, -2.0}, {-0.7, -1.5, -1.1}};
  double b[2][3] = {{-1.4, -0.9, -2.3}, {-1.0, -2.1, -1.5}};
  double log_pr[2] = {std::log(0.4), std::log(0.6)};
  static int at(const Theta& t) { return t[0] > 0.5 ? 1 : 0; }
  Index size() const { return 3; }
  double log_prior(const Theta& t) const { return log_pr[at(t)]; }
  double log_lik(Index i, const Theta& t) const { return l[at(t)][i]; }
  double lower_bound(Index i, const Theta& t) const { return b[at(t)][i]; }
  double lower_bound_sum(const Theta& t) const { return b[at(t)][0] + b[at(t)][1] + b[at(t)][2]; }
};

struct Flip {
  Theta propose(const Theta& t, CounterRng&) const { return Theta::Constant(1, 1.0 - t[0]); }
  double log_ratio(const Theta&, const Theta&) const { return 0.0; }
  void update(long, bool) {}
};

Outcome criterion_7() {
  const ToyFirefly toy;
  std::vector<double> exact(16);
  double total = 0.0;
  for (int th = 0; th < 2; ++th)
    for (int mask = 0; mask < 8; ++mask) {
      double p = std::exp(toy.log_pr[th]);
      for (int i = 0; i < 3; ++i)
        p *= (mask >> i & 1) ? std::exp(toy.l[th][i]) - std::exp(toy.b[th][i]) : std::exp(toy.b[th][i]);
      exact[static_cast<std::size_t>(th * 8 + mask)] = p;
      total += p;
    }
  for (auto& p : exact) p /= total;
  std::vector<double> counts(16, 0.0);
  const long sweeps = 1000000;
  firefly_run_target(toy, FireflyConfig{0.34}, Flip{}, Theta::Zero(1), sweeps, 7, 0,
                     [&](const Theta& t, const std::vector<char>& z) {
                       const int mask = z[0] | z[1] << 1 | z[2] << 2;
                       counts[static_cast<std::size_t>(ToyFirefly::at(t) * 8 + mask)] += 1.0;
                     });
  double tv = 0.0;
  for (std::size_t k = 0; k < 16; ++k) tv += 0.5 * std::abs(counts[k] / sweeps - exact[k]);

  const Index n = 10000;
  const auto data = gaussian_data(n, 71);
  const auto model = gaussian_model();
  const Theta map = map_of(model, data, Theta::Zero(2));
  const auto bounds = build_proxy(model, data, map);
  const auto tr = firefly_run(model, data, bounds, FireflyConfig{0.1}, ProposalRW::for_data_size(n), map, 5000, 72);
  const auto s = eval_summary(tr);
  return {tv <= kFireflyTv && s.median_fraction >= kFireflyLo && s.median_fraction <= kFireflyHi,
          fmt("toy total variation %.4f; gaussian median L/n %.4f (accept %.2f)", tv, s.median_fraction,
              tr.acceptance_rate())};
}

Outcome criterion_8() {
  const Index n = 100000;
  const auto data = lognormal_data(n, 8);
  const auto model = gaussian_model();
  const Theta map = map_of(model, data, Theta::Zero(2));
  const auto prop = ProposalRW::for_data_size(n);
  const long burn = 1000;
  const auto mh = mh_run(model, data, prop, map, 20000, 81);
  const auto au = austerity_run(model, data, AusterityConfig{0.05, 100, 2.0}, prop, map, 10000, 82);
  const auto cmp = compare_posteriors(au, mh, burn, burn);
  const auto s = eval_summary(au);
  // The fitted Gaussian's standard deviation is exp(log sigma).
  const double sigma_au = std::exp(cmp[1].mean_a), sigma_mh = std::exp(cmp[1].mean_b);
  return {sigma_au < sigma_mh && s.median_fraction < kAusterityUsage,
          fmt("fitted sigma austerity %.4f vs MH %.4f; sd(mu) %.5f vs %.5f; sd(log sigma) %.5f vs %.5f; median L/n %.4f",
              sigma_au, sigma_mh, cmp[0].sd_a, cmp[0].sd_b, cmp[1].sd_a, cmp[1].sd_b, s.median_fraction)};
}

double fd_rel_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& fd) {
  return (analytic - fd).norm() / (1.0 + analytic.norm());
}

Outcome criterion_9() {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> normal;
  struct Setup {
    const char* name;
    Model model;
    Dataset data;
    double theta_sd;
  } setups[] = {{"gaussian", gaussian_model(), gaussian_data(200, 91), 0.5},
                {"logistic", logistic_model(3), logistic_data(200, 92, 3), 1.0},
                {"gamma", gamma_model(3), gamma_data(200, 93), 0.5}};
  Outcome out{true, ""};
  const double h = 1e-5;
  for (auto& s : setups) {
    const Index p = s.model.dim(s.data);
    double worst_g = 0.0, worst_h = 0.0;
    for (int k = 0; k < 100; ++k) {
      Theta th(p);
      for (Index j = 0; j < p; ++j) th[j] = s.theta_sd * normal(gen);
      const Index i = static_cast<Index>(gen() % static_cast<std::uint64_t>(s.data.n()));
      const auto g = grad_log_lik_i(s.model, s.data, i, th);
      const auto H = hess_log_lik_i(s.model, s.data, i, th);
      Eigen::VectorXd gfd(p);
      Eigen::MatrixXd hfd(p, p);
      for (Index j = 0; j < p; ++j) {
        Theta up = th, dn = th;
        up[j] += h;
        dn[j] -= h;
        gfd[j] = (log_lik_i(s.model, s.data, i, up) - log_lik_i(s.model, s.data, i, dn)) / (2 * h);
        hfd.col(j) = (grad_log_lik_i(s.model, s.data, i, up) - grad_log_lik_i(s.model, s.data, i, dn)) / (2 * h);
      }
      worst_g = std::max(worst_g, fd_rel_error(g, gfd));
      worst_h = std::max(worst_h, (H - hfd).norm() / (1.0 + H.norm()));
    }
    out.pass = out.pass && worst_g < kGradTol && worst_h < kHessTol;
    out.detail += fmt("%s grad %.1e hess %.1e; ", s.name, worst_g, worst_h);
  }
  return out;
}

// Covtype-style table: ten quantitative columns with covtype-like marginals
// and a 0/1 label. Column 9 plays "horizontal distance to fire points" and is
// drawn from a gamma regression on the other nine (standardised).
std::filesystem::path write_covtype_like(const std::filesystem::path& dir, Index n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  auto gam = [&](double k, double s) { return std::gamma_distribution<double>(k, s)(gen); };
  std::uniform_real_distribution<double> unif(0.0, 360.0);
  Eigen::MatrixXd raw(n, 10);
  for (Index i = 0; i < n; ++i) {
    const double elev = 2960.0 + 280.0 * normal(gen);
    raw(i, 0) = elev;
    raw(i, 1) = unif(gen);
    raw(i, 2) = gam(3.0, 4.7);
    raw(i, 3) = gam(1.3, 200.0);
    raw(i, 4) = 46.0 + 58.0 * normal(gen);
    raw(i, 5) = gam(1.8, 1300.0) + 0.5 * (elev - 2960.0);
    raw(i, 6) = std::clamp(255.0 - gam(2.0, 15.0), 0.0, 255.0);
    raw(i, 7) = std::clamp(255.0 - gam(3.0, 10.0), 0.0, 255.0);
    raw(i, 8) = std::clamp(142.0 + 38.0 * normal(gen), 0.0, 255.0);
  }
  Eigen::MatrixXd z(n, 9);
  for (Index j = 0; j < 9; ++j) {
    const double m = raw.col(j).mean();
    const double sd = std::sqrt((raw.col(j).array() - m).square().mean());
    z.col(j) = (raw.col(j).array() - m) / sd;
  }
  const double beta_fire[9] = {0.35, 0.05, -0.1, 0.1, 0.0, 0.25, 0.05, 0.05, -0.05};
  const double kappa = 2.0;
  for (Index i = 0; i < n; ++i) {
    double eta = std::log(2000.0);
    for (Index j = 0; j < 9; ++j) eta += beta_fire[j] * z(i, j);
    raw(i, 9) = gam(kappa, std::exp(eta) / kappa);
  }
  const double m9 = raw.col(9).mean();
  const double sd9 = std::sqrt((raw.col(9).array() - m9).square().mean());
  const double beta_label[10] = {1.2, -0.3, -0.5, 0.2, 0.1, 0.6, 0.3, -0.2, 0.1, 0.4};
  std::filesystem::create_directories(dir);
  const auto path = dir / "covtype_like.csv";
  std::ofstream out(path);
  out.precision(17);
  out << "elevation,aspect,slope,hdist_hydro,vdist_hydro,hdist_road,hillshade_9,hillshade_12,hillshade_15,"
         "hdist_fire,label\n";
  for (Index i = 0; i < n; ++i) {
    double eta = beta_label[9] * (raw(i, 9) - m9) / sd9;
    for (Index j = 0; j < 9; ++j) eta += beta_label[j] * z(i, j);
    const int label = std::uniform_real_distribution<double>(0.0, 1.0)(gen) < 1.0 / (1.0 + std::exp(-eta));
    for (Index j = 0; j < 10; ++j) out << raw(i, j) << ',';
    out << label << '\n';
  }
  return path;
}

struct MultiChain {
  double mean_fraction = 0.0;
  double max_rhat = 0.0;
};

MultiChain run_chains(const Model& model, const Dataset& data, const Theta& start, int chains, long iters,
                      std::uint64_t seed) {
  ConfidenceConfig cfg;
  cfg.proxy = ProxyPolicy{ProxyMode::drop_every_alpha, 10};
  std::vector<ChainTrace> traces;
  double frac = 0.0;
  for (int c = 0; c < chains; ++c) {
    traces.push_back(confidence_run(model, data, cfg, ProposalRW::for_data_size(data.n()), start, iters, seed,
                                    static_cast<std::uint64_t>(c)));
    frac += eval_summary(traces.back()).mean_fraction / chains;
  }
  MultiChain out{frac, 0.0};
  for (Index j = 0; j < model.dim(data); ++j) {
    std::vector<std::vector<double>> cols;
    for (const auto& t : traces) cols.push_back(t.column(j));
    out.max_rhat = std::max(out.max_rhat, gelman_rubin(cols));
  }
  return out;
}

Outcome criterion_10() {
  const auto dir = std::filesystem::temp_directory_path() / "tallmcmc_acceptance";
  const auto csv = write_covtype_like(dir, 40000, 10);
  PreprocessSpec logit_spec;
  logit_spec.header = true;  // all ten quantitative columns, label last
  auto logit_full = ingest_csv(csv, logit_spec);
  const Dataset logit_data = subset(logit_full.data, 20000, 101);

  PreprocessSpec gamma_spec;
  gamma_spec.header = true;
  gamma_spec.add_intercept = true;
  gamma_spec.column_roles = {"feature", "feature", "feature", "feature", "feature", "feature",
                             "feature", "feature", "feature", "response", "ignore"};
  auto gamma_full = ingest_csv(csv, gamma_spec);
  const Dataset gamma_data_ = subset(gamma_full.data, 20000, 102);

  const auto lm = logistic_model(10);
  const auto gm = Model(GammaRegression{2.0}, CauchyPrior::standard(10, 2.5, 10.0, true), 0.05);
  Theta g0 = Theta::Zero(10);
  g0[0] = std::log(gamma_data_.response().mean());
  const auto lr = run_chains(lm, logit_data, map_of(lm, logit_data, Theta::Zero(10)), 5, 2000, 103);
  const auto gr = run_chains(gm, gamma_data_, map_of(gm, gamma_data_, g0), 5, 2000, 104);
  const bool ok = logit_data.d() == 10 && gamma_data_.d() == 10 && lr.mean_fraction >= kCovLo &&
                  lr.mean_fraction <= kCovHi && gr.mean_fraction >= kCovLo && gr.mean_fraction <= kCovHi &&
                  lr.max_rhat < kRhatMax && gr.max_rhat < kRhatMax;
  std::filesystem::remove_all(dir);
  return {ok, fmt("logistic mean L/n %.3f R-hat %.4f; gamma mean L/n %.3f R-hat %.4f", lr.mean_fraction,
                  lr.max_rhat, gr.mean_fraction, gr.max_rhat)};
}

Outcome criterion_11() {
  const Index n = 10000;
  const auto model = gaussian_model();
  const long burn = 1000;
  auto sgld_cfg = [&](Index nn) {
    return SgldConfig{nn / 10, StepSchedule::matching_rw_scale(1.0 / std::sqrt(static_cast<double>(nn))), true};
  };

  const auto gdata = gaussian_data(n, 11);
  const Theta gmap = map_of(model, gdata, Theta::Zero(2));
  const auto mh = mh_run(model, gdata, ProposalRW::for_data_size(n), gmap, 20000, 111);
  const auto sg = sgld_run(model, gdata, sgld_cfg(n), gmap, 10000, 112);
  const auto cmp = compare_posteriors(sg, mh, burn, burn);
  const bool mean_ok = std::abs(cmp[0].mean_diff) <= kSgldAbs;

  const auto ldata = lognormal_data(n, 12);
  const Theta lmap = map_of(model, ldata, Theta::Zero(2));
  const auto lmh = mh_run(model, ldata, ProposalRW::for_data_size(n), lmap, 20000, 113);
  const auto lsg = sgld_run(model, ldata, sgld_cfg(n), lmap, 10000, 114);
  ConfidenceConfig cfg;
  cfg.proxy = ProxyPolicy{ProxyMode::single_at_map};
  const auto lcf = confidence_run(model, ldata, cfg, ProposalRW::for_data_size(n), lmap, 10000, 115);
  double w_sg = 0.0, w_cf = 0.0;
  for (const auto& c : compare_posteriors(lsg, lmh, burn, burn)) w_sg += c.wasserstein;
  for (const auto& c : compare_posteriors(lcf, lmh, burn, burn)) w_cf += c.wasserstein;
  return {mean_ok && w_sg >= kSgldWRatio * w_cf,
          fmt("gaussian |mean gap| %.4f; lognormal W1 SGLD %.4f vs confidence %.4f (ratio %.1f)",
              std::abs(cmp[0].mean_diff), w_sg, w_cf, w_sg / w_cf)};
}

Outcome criterion_12() {
  Outcome out{true, ""};
  for (const auto& c : three_models()) {
    const auto prop = ProposalRW::for_data_size(c.data.n());
    const auto mh = mh_run(c.model, c.data, prop, c.start, kExactIters, 121);
    const auto da = delayed_acceptance_run(c.model, c.data, 1, prop, c.start, kExactIters, 121);
    const bool same = mh.accepted == da.accepted;
    out.pass = out.pass && same;
    out.detail += fmt("%s B=1 %s; ", c.name.c_str(), same ? "identical" : "DIFFERENT");
  }
  const Index n = 10000;
  const auto data = gaussian_data(n, 122);
  const auto model = gaussian_model();
  const Theta map = map_of(model, data, Theta::Zero(2));
  const auto da = delayed_acceptance_run(model, data, 10, ProposalRW::for_data_size(n), map, 5000, 123);
  const auto s = eval_summary(da);
  out.pass = out.pass && s.mean_fraction >= da.acceptance_rate();
  out.detail += fmt("B=10 mean L/n %.3f vs acceptance %.3f", s.mean_fraction, da.acceptance_rate());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::pair<const char*, std::function<Outcome()>>> criteria{
      {1, {"exactness degeneracy", criterion_1}},
      {2, {"gaussian running example", criterion_2}},
      {3, {"saturation", criterion_3}},
      {4, {"bernstein coverage", criterion_4}},
      {5, {"firefly variance vs enumeration", criterion_5}},
      {6, {"rhee-glynn unbiasedness", criterion_6}},
      {7, {"firefly toy exactness and cost", criterion_7}},
      {8, {"austerity directional check", criterion_8}},
      {9, {"derivative suite", criterion_9}},
      {10, {"covtype-style runs", criterion_10}},
      {11, {"sgld sanity", criterion_11}},
      {12, {"delayed acceptance", criterion_12}},
  };
  std::set<int> selected;
  for (int a = 1; a < argc; ++a) selected.insert(std::stoi(argv[a]));
  int failed = 0;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("criterion %2d %s %s: %s [%.1fs]\n", id, o.pass ? "PASS" : "FAIL", entry.first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
