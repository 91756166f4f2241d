#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "tallmcmc/models.hpp"
#include "tallmcmc/record_file.hpp"
#include "tallmcmc/samplers/map.hpp"
#include "tallmcmc/trace.hpp"

namespace tallmcmc {

// ---------------------------------------------------------------------------
// Autocorrelation

struct Autocorrelation {
  std::vector<double> rho;  // lags 0..max_lag
  bool degenerate = false;  // zero variance: rho is all zeros
};

/// Biased autocovariance estimator normalised by lag 0.
inline Autocorrelation autocorrelation(const std::vector<double>& x, std::size_t max_lag) {
  if (x.empty()) throw std::invalid_argument("autocorrelation of an empty series");
  const std::size_t n = x.size();
  max_lag = std::min(max_lag, n - 1);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = x[i] - mean;
  Autocorrelation out;
  out.rho.assign(max_lag + 1, 0.0);
  double c0 = 0.0;
  for (double v : c) c0 += v * v;
  if (!(c0 > 0.0)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t k = 0; k <= max_lag; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i + k < n; ++i) s += c[i] * c[i + k];
    out.rho[k] = s / c0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gelman-Rubin

/// Split-chain potential scale reduction on the second half of each chain:
/// every second half is cut in two and the 2m pieces enter the usual
/// between/within variance formula.
inline double gelman_rubin(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) throw std::invalid_argument("Gelman-Rubin needs at least two chains");
  std::size_t len = std::numeric_limits<std::size_t>::max();
  for (const auto& c : chains) len = std::min(len, c.size());
  const std::size_t half = len / 2;
  const std::size_t piece = half / 2;
  if (piece < 2) throw std::invalid_argument("chains too short for split Gelman-Rubin");

  std::vector<double> means, vars;
  for (const auto& c : chains) {
    const std::size_t start = c.size() - 2 * piece;
    for (int s = 0; s < 2; ++s) {
      const auto b = c.begin() + static_cast<std::ptrdiff_t>(start + s * piece);
      const double m = std::accumulate(b, b + static_cast<std::ptrdiff_t>(piece), 0.0) / static_cast<double>(piece);
      double v = 0.0;
      for (auto it = b; it != b + static_cast<std::ptrdiff_t>(piece); ++it) v += (*it - m) * (*it - m);
      means.push_back(m);
      vars.push_back(v / static_cast<double>(piece - 1));
    }
  }
  const double L = static_cast<double>(piece);
  const double M = static_cast<double>(means.size());
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / M;
  double B = 0.0;
  for (double m : means) B += (m - grand) * (m - grand);
  B *= L / (M - 1.0);
  const double W = std::accumulate(vars.begin(), vars.end(), 0.0) / M;
  if (!(W > 0.0)) return B > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (L - 1.0) / L * W + B / L;
  return std::sqrt(var_plus / W);
}

// ---------------------------------------------------------------------------
// Bernstein-von Mises reference

struct BvMReference {
  Theta center;
  Eigen::MatrixXd covariance;
  bool map_converged = false;
};

inline bool is_spd(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || !m.allFinite()) return false;
  if (!m.isApprox(m.transpose(), 1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0;
}

/// Gaussian centred at the MAP with covariance the inverse of the observed
/// information -sum_i H_i(theta_map), plus the prior curvature.
inline BvMReference bvm_reference(const Model& model, const Dataset& data, const Theta& theta_init,
                                  const MapOptions& opt = {}) {
  const auto map = find_map(model, data, theta_init, opt);
  auto [g, h] = full_grad_hess(model, data, map.theta);
  (void)g;
  const Eigen::MatrixXd info = -(h + hess_log_prior(model, map.theta));
  BvMReference ref;
  ref.center = map.theta;
  ref.map_converged = map.converged;
  ref.covariance = info.inverse();
  ref.covariance = 0.5 * (ref.covariance + ref.covariance.transpose()).eval();
  if (!is_spd(ref.covariance)) throw std::domain_error("observed information is not positive definite at the MAP");
  return ref;
}

// ---------------------------------------------------------------------------
// Posterior comparisons

namespace detail {

inline std::vector<double> uniform_weights(std::size_t n) { return std::vector<double>(n, 1.0); }

}  // namespace detail

/// 1-Wasserstein distance between two weighted empirical measures on R,
/// integral of |F_a - F_b| over the merged support.
inline double wasserstein1(const std::vector<double>& a, const std::vector<double>& wa, const std::vector<double>& b,
                           const std::vector<double>& wb) {
  if (a.empty() || b.empty()) throw std::invalid_argument("wasserstein1 of an empty sample");
  if (a.size() != wa.size() || b.size() != wb.size()) throw std::invalid_argument("weights do not match samples");
  struct Atom {
    double x;
    double w;
    int side;
  };
  std::vector<Atom> atoms;
  atoms.reserve(a.size() + b.size());
  const double sa = std::accumulate(wa.begin(), wa.end(), 0.0);
  const double sb = std::accumulate(wb.begin(), wb.end(), 0.0);
  if (!(sa > 0.0) || !(sb > 0.0)) throw std::invalid_argument("weights must have positive total");
  for (std::size_t i = 0; i < a.size(); ++i) atoms.push_back({a[i], wa[i] / sa, 0});
  for (std::size_t i = 0; i < b.size(); ++i) atoms.push_back({b[i], wb[i] / sb, 1});
  std::sort(atoms.begin(), atoms.end(), [](const Atom& l, const Atom& r) { return l.x < r.x; });
  double fa = 0.0, fb = 0.0, dist = 0.0;
  for (std::size_t k = 0; k + 1 < atoms.size(); ++k) {
    (atoms[k].side == 0 ? fa : fb) += atoms[k].w;
    dist += std::abs(fa - fb) * (atoms[k + 1].x - atoms[k].x);
  }
  return dist;
}

inline double wasserstein1(const std::vector<double>& a, const std::vector<double>& b) {
  return wasserstein1(a, detail::uniform_weights(a.size()), b, detail::uniform_weights(b.size()));
}

struct MarginalComparison {
  double mean_a = 0.0, mean_b = 0.0, mean_diff = 0.0;
  double sd_a = 0.0, sd_b = 0.0, sd_diff = 0.0;
  double mcse_a = 0.0, mcse_b = 0.0;  // batch-means standard errors
  double wasserstein = 0.0;
};

struct WeightedMoments {
  double mean = 0.0;
  double sd = 0.0;
};

inline WeightedMoments weighted_moments(const std::vector<double>& x, const std::vector<double>& w) {
  double sw = 0.0, m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    m += w[i] * x[i];
  }
  m /= sw;
  double v = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) v += w[i] * (x[i] - m) * (x[i] - m);
  return {m, std::sqrt(v / sw)};
}

/// Monte-Carlo standard error of the mean by non-overlapping batch means
/// (floor(sqrt(N)) batches).
inline double batch_means_se(const std::vector<double>& x) {
  const std::size_t n = x.size();
  const std::size_t nb = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n))));
  if (nb < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t len = n / nb;
  std::vector<double> means(nb);
  for (std::size_t b = 0; b < nb; ++b) {
    double s = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) s += x[i];
    means[b] = s / static_cast<double>(len);
  }
  const double gm = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(nb);
  double v = 0.0;
  for (double m : means) v += (m - gm) * (m - gm);
  v /= static_cast<double>(nb - 1);
  return std::sqrt(v / static_cast<double>(nb));
}

/// Drops the first `burn_in` states of a trace column; weighted traces keep
/// their weights.
inline std::pair<std::vector<double>, std::vector<double>> trace_marginal(const ChainTrace& t, Index j,
                                                                         std::size_t burn_in = 0) {
  if (j < 0 || j >= t.dim()) throw std::out_of_range("trace coordinate out of range");
  std::vector<double> x, w;
  for (std::size_t k = std::min(burn_in, t.size()); k < t.size(); ++k) {
    x.push_back(t.states[k][j]);
    w.push_back(t.weighted() ? t.weights[k] : 1.0);
  }
  return {x, w};
}

/// Per-coordinate mean/sd differences and marginal 1-Wasserstein distances.
inline std::vector<MarginalComparison> compare_posteriors(const ChainTrace& a, const ChainTrace& b,
                                                          std::size_t burn_in_a = 0, std::size_t burn_in_b = 0) {
  if (a.dim() != b.dim()) throw std::invalid_argument("traces have different dimensions");
  if (a.size() <= burn_in_a || b.size() <= burn_in_b) throw std::invalid_argument("trace shorter than burn-in");
  std::vector<MarginalComparison> out;
  for (Index j = 0; j < a.dim(); ++j) {
    const auto [xa, wa] = trace_marginal(a, j, burn_in_a);
    const auto [xb, wb] = trace_marginal(b, j, burn_in_b);
    const auto ma = weighted_moments(xa, wa);
    const auto mb = weighted_moments(xb, wb);
    MarginalComparison c;
    c.mean_a = ma.mean;
    c.mean_b = mb.mean;
    c.mean_diff = ma.mean - mb.mean;
    c.sd_a = ma.sd;
    c.sd_b = mb.sd;
    c.sd_diff = ma.sd - mb.sd;
    c.mcse_a = batch_means_se(xa);
    c.mcse_b = batch_means_se(xb);
    c.wasserstein = wasserstein1(xa, wa, xb, wb);
    out.push_back(c);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Likelihood-evaluation summaries

/// Linear-interpolation quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& s, double p) {
  if (s.empty()) throw std::invalid_argument("quantile of an empty sample");
  const double h = p * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

struct EvalSummary {
  double mean_fraction = 0.0;
  double median_fraction = 0.0;
  std::vector<double> probs{0.05, 0.25, 0.5, 0.75, 0.95};
  std::vector<double> quantiles;
  double max_fraction = 0.0;
  double median_evals = 0.0;
};

inline std::vector<double> eval_fractions(const ChainTrace& t) {
  if (t.n_data < 1) throw std::invalid_argument("trace does not record the dataset size");
  std::vector<double> f;
  f.reserve(t.size());
  for (auto l : t.evals) f.push_back(static_cast<double>(l) / static_cast<double>(t.n_data));
  return f;
}

/// Summary of L_k / n over a trace.
inline EvalSummary eval_summary(const ChainTrace& t) {
  if (t.size() == 0) throw std::invalid_argument("eval_summary of an empty trace");
  auto f = eval_fractions(t);
  EvalSummary s;
  s.mean_fraction = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size());
  std::sort(f.begin(), f.end());
  s.median_fraction = quantile_sorted(f, 0.5);
  for (double p : s.probs) s.quantiles.push_back(quantile_sorted(f, p));
  s.max_fraction = f.back();
  s.median_evals = s.median_fraction * static_cast<double>(t.n_data);
  return s;
}

struct Histogram {
  double lo = 0.0, hi = 1.0;
  std::vector<double> counts;  // weighted counts per bin
};

/// Equal-width histogram on [lo, hi]; values outside are clamped to the end bins.
inline Histogram histogram(const std::vector<double>& x, std::size_t bins, double lo, double hi,
                           const std::vector<double>* w = nullptr) {
  if (bins < 1 || !(hi > lo)) throw std::invalid_argument("histogram needs bins >= 1 and hi > lo");
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto b = static_cast<long>(std::floor((x[i] - lo) / (hi - lo) * static_cast<double>(bins)));
    b = std::clamp<long>(b, 0, static_cast<long>(bins) - 1);
    h.counts[static_cast<std::size_t>(b)] += w ? (*w)[i] : 1.0;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Plot-ready CSV

inline void write_autocorrelation_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                                      const std::vector<Autocorrelation>& acfs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out << "lag";
  for (const auto& n : names) out << ',' << n;
  out << '\n' << std::setprecision(10);
  std::size_t lags = 0;
  for (const auto& a : acfs) lags = std::max(lags, a.rho.size());
  for (std::size_t k = 0; k < lags; ++k) {
    out << k;
    for (const auto& a : acfs) {
      out << ',';
      if (k < a.rho.size()) out << a.rho[k];
    }
    out << '\n';
  }
}

inline void write_histogram_csv(const std::filesystem::path& path, const Histogram& h) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create '" + path.string() + "'");
  out << "bin_lo,bin_hi,count\n" << std::setprecision(10);
  const double w = (h.hi - h.lo) / static_cast<double>(h.counts.size());
  for (std::size_t b = 0; b < h.counts.size(); ++b)
    out << h.lo + w * static_cast<double>(b) << ',' << h.lo + w * static_cast<double>(b + 1) << ',' << h.counts[b]
        << '\n';
}

}  // namespace tallmcmc
