#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>

#include <Eigen/Core>

#include "tallmcmc/dataset.hpp"

namespace tallmcmc {

namespace detail {

inline double log_sigmoid(double z) {
  // -log(1 + e^{-z}) without overflow on either side.
  return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// c x x', filled by hand so the result is exactly symmetric.
template <class Row>
Eigen::MatrixXd scaled_outer(double c, const Row& x) {
  const Index p = x.size();
  Eigen::MatrixXd m(p, p);
  for (Index a = 0; a < p; ++a)
    for (Index b = a; b < p; ++b) m(a, b) = m(b, a) = c * x[a] * x[b];
  return m;
}

inline void require_finite(const Theta& theta) {
  if (!theta.allFinite()) throw std::invalid_argument("parameter has non-finite entries");
}

}  // namespace detail

/// Which norm the Taylor-Lagrange remainder is stated in. The logistic
/// constant bounds phi''' (x.h)^3 with Euclidean norms; the generic
/// "every third partial <= M" statement needs the l1 norm of the step.
enum class RemainderNorm { l1, l2 };

inline double remainder_norm(RemainderNorm kind, const Eigen::Ref<const Eigen::VectorXd>& h) {
  return kind == RemainderNorm::l2 ? h.norm() : h.lpNorm<1>();
}

// ---------------------------------------------------------------------------
// Likelihood families. Each family exposes at(theta), which hoists the
// theta-only work; single-datum calls and full passes both go through the
// same per-datum expression so their sums agree bit for bit.

/// N(x | mu, sigma^2) with theta = (mu, log sigma); needs 1-D features.
struct GaussianLocationScale {
  static constexpr const char* name = "gaussian_location_scale";
  static constexpr RemainderNorm norm = RemainderNorm::l1;
  static constexpr bool rank_one_hessian = false;

  Index dim(const Dataset&) const { return 2; }

  void check(const Dataset& data) const {
    if (data.d() != 1)
      throw std::invalid_argument("gaussian_location_scale needs one feature per record, got " +
                                  std::to_string(data.d()));
  }

  struct At {
    double mu, log_sigma, w;  // w = sigma^-2
    static constexpr double c0 = -0.91893853320467274178;  // -log(2 pi) / 2

    double log_lik(const Dataset& data, Index i) const {
      const double r = data.x(i)[0] - mu;
      return c0 - log_sigma - 0.5 * r * r * w;
    }
    Eigen::VectorXd grad(const Dataset& data, Index i) const {
      const double r = data.x(i)[0] - mu;
      Eigen::VectorXd g(2);
      g << r * w, -1.0 + r * r * w;
      return g;
    }
    Eigen::MatrixXd hess(const Dataset& data, Index i) const {
      const double r = data.x(i)[0] - mu;
      Eigen::MatrixXd h(2, 2);
      h << -w, -2.0 * r * w, -2.0 * r * w, -2.0 * r * r * w;
      return h;
    }
  };

  At at(const Theta& theta) const { return {theta[0], theta[1], std::exp(-2.0 * theta[1])}; }

  /// Sup of every third partial over the box ||theta - ref||_inf <= radius.
  /// Partials: d_mmm = 0, d_mms = 2w, d_mss = 4 r w, d_sss = 4 r^2 w.
  double third_deriv_bound(const Dataset& data, const Theta& ref, double radius) const {
    const double w_max = std::exp(-2.0 * (ref[1] - radius));
    const double r_max = std::max(std::abs(data.column_max()[0] - ref[0]),
                                  std::abs(data.column_min()[0] - ref[0])) +
                         radius;
    return w_max * std::max({2.0, 4.0 * r_max, 4.0 * r_max * r_max});
  }

  /// min_i l_i(theta), in O(1) from the data extremes.
  double uniform_lower_bound(const Dataset& data, const Theta& theta) const {
    const At a = at(theta);
    const double r = std::max(std::abs(data.column_max()[0] - a.mu),
                              std::abs(data.column_min()[0] - a.mu));
    return At::c0 - a.log_sigma - 0.5 * r * r * a.w;
  }
};

/// l_i = phi(t_i x_i' theta), phi(z) = -log(1 + e^{-z}), labels t_i in {-1, +1}.
struct LogisticRegression {
  static constexpr const char* name = "logistic_regression";
  static constexpr RemainderNorm norm = RemainderNorm::l2;
  static constexpr bool rank_one_hessian = true;

  Index dim(const Dataset& data) const { return data.d(); }

  void check(const Dataset& data) const {
    if (data.response_kind() != ResponseKind::label)
      throw std::invalid_argument("logistic_regression needs +-1 labels");
  }

  struct At {
    const Theta* theta;

    double z(const Dataset& data, Index i) const { return data.y(i) * data.x(i).dot(*theta); }

    double log_lik(const Dataset& data, Index i) const { return detail::log_sigmoid(z(data, i)); }
    Eigen::VectorXd grad(const Dataset& data, Index i) const {
      // phi'(z) = 1 / (1 + e^z)
      const double zi = z(data, i);
      return (detail::sigmoid(-zi) * data.y(i)) * data.x(i).transpose();
    }
    /// Scalar c with H_i = c x_i x_i'.
    double hess_scale(const Dataset& data, Index i) const {
      const double zi = z(data, i);
      return -detail::sigmoid(zi) * detail::sigmoid(-zi);
    }
    Eigen::MatrixXd hess(const Dataset& data, Index i) const {
      return detail::scaled_outer(hess_scale(data, i), data.x(i));
    }
  };

  At at(const Theta& theta) const { return {&theta}; }

  /// |phi'''| <= 1/4 everywhere, so M = max_i ||x_i||^3 / 4 holds globally.
  double third_deriv_bound(const Dataset& data, const Theta&, double) const {
    const double r = data.max_l2_norm();
    return 0.25 * r * r * r;
  }

  double uniform_lower_bound(const Dataset& data, const Theta& theta) const {
    return detail::log_sigmoid(-data.max_l2_norm() * theta.norm());
  }
};

/// y ~ Gamma(shape kappa, scale e^{x'theta} / kappa) with kappa known.
/// l_i = -kappa y_i e^{-x_i'theta} - kappa x_i'theta; the dropped constant
/// kappa log kappa - lgamma(kappa) + (kappa - 1) log y_i does not depend on
/// theta and cancels in every ratio.
struct GammaRegression {
  static constexpr const char* name = "gamma_regression";
  static constexpr RemainderNorm norm = RemainderNorm::l1;
  static constexpr bool rank_one_hessian = true;

  double kappa = 1.0;

  Index dim(const Dataset& data) const { return data.d(); }

  void check(const Dataset& data) const {
    if (!(kappa > 0.0) || !std::isfinite(kappa))
      throw std::invalid_argument("gamma_regression needs kappa > 0");
    if (data.response_kind() != ResponseKind::continuous)
      throw std::invalid_argument("gamma_regression needs a continuous response");
    if (data.response().minCoeff() < 0.0)
      throw std::invalid_argument("gamma_regression needs nonnegative responses");
  }

  struct At {
    const Theta* theta;
    double kappa;

    double log_lik(const Dataset& data, Index i) const {
      const double eta = data.x(i).dot(*theta);
      return -kappa * data.y(i) * std::exp(-eta) - kappa * eta;
    }
    Eigen::VectorXd grad(const Dataset& data, Index i) const {
      const double eta = data.x(i).dot(*theta);
      return (kappa * (data.y(i) * std::exp(-eta) - 1.0)) * data.x(i).transpose();
    }
    double hess_scale(const Dataset& data, Index i) const {
      return -kappa * data.y(i) * std::exp(-data.x(i).dot(*theta));
    }
    Eigen::MatrixXd hess(const Dataset& data, Index i) const {
      return detail::scaled_outer(hess_scale(data, i), data.x(i));
    }
  };

  At at(const Theta& theta) const { return {&theta, kappa}; }

  /// kappa max|y| exp(-min x'theta) max ||x||_inf^3, with min x'theta taken
  /// over the box ||theta - ref||_inf <= radius via
  /// min_i x_i'ref - radius * sum_j max_i |x_i^(j)|.
  double third_deriv_bound(const Dataset& data, const Theta& ref, double radius) const {
    const double min_form = (data.features() * ref).minCoeff();
    const double lower = min_form - radius * data.column_abs_max().sum();
    const double xm = data.max_inf_norm();
    return kappa * data.max_abs_response() * std::exp(-lower) * xm * xm * xm;
  }

  double uniform_lower_bound(const Dataset&, const Theta&) const {
    throw std::logic_error("gamma_regression has no constant-time uniform lower bound");
  }
};

using Family = std::variant<GaussianLocationScale, LogisticRegression, GammaRegression>;

// ---------------------------------------------------------------------------
// Priors

struct FlatPrior {};

/// Independent Cauchy(location_j, scale_j) on each coordinate.
struct CauchyPrior {
  Eigen::VectorXd location;
  Eigen::VectorXd scale;

  static CauchyPrior standard(Index dim, double slope_scale = 2.5,
                              double intercept_scale = 10.0, bool first_is_intercept = false) {
    CauchyPrior p{Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Constant(dim, slope_scale)};
    if (first_is_intercept && dim > 0) p.scale[0] = intercept_scale;
    return p;
  }
};

using Prior = std::variant<FlatPrior, CauchyPrior>;

// ---------------------------------------------------------------------------

/// A likelihood family plus prior and the trust-region radius used for the
/// family's third-derivative bound. Immutable and cheap to copy.
class Model {
public:
  Model(Family family, Prior prior = FlatPrior{}, double trust_radius = 1.0)
      : family_(std::move(family)), prior_(std::move(prior)), trust_radius_(trust_radius) {
    if (!(trust_radius_ > 0.0)) throw std::invalid_argument("trust radius must be positive");
  }

  const Family& family() const noexcept { return family_; }
  const Prior& prior() const noexcept { return prior_; }
  double trust_radius() const noexcept { return trust_radius_; }

  std::string family_name() const {
    return std::visit([](const auto& f) { return std::string(f.name); }, family_);
  }

  template <class F>
  decltype(auto) visit(F&& f) const {
    return std::visit(std::forward<F>(f), family_);
  }

  Index dim(const Dataset& data) const {
    return visit([&](const auto& f) { return f.dim(data); });
  }

  /// Throws when the dataset does not fit the family (or the prior's size).
  void check(const Dataset& data) const {
    visit([&](const auto& f) { f.check(data); });
    if (const auto* c = std::get_if<CauchyPrior>(&prior_)) {
      if (c->location.size() != dim(data) || c->scale.size() != dim(data))
        throw std::invalid_argument("Cauchy prior dimension does not match the model");
      if ((c->scale.array() <= 0.0).any())
        throw std::invalid_argument("Cauchy prior scales must be positive");
    }
  }

  void check_theta(const Dataset& data, const Theta& theta) const {
    if (theta.size() != dim(data))
      throw std::invalid_argument("parameter dimension " + std::to_string(theta.size()) +
                                  " does not match model dimension " + std::to_string(dim(data)));
    detail::require_finite(theta);
  }

  RemainderNorm norm() const {
    return visit([](const auto& f) { return std::decay_t<decltype(f)>::norm; });
  }

  bool has_trust_region() const {
    return !std::holds_alternative<LogisticRegression>(family_);
  }

  bool in_trust_region(const Theta& center, const Theta& theta) const {
    if (!has_trust_region()) return true;
    return (theta - center).lpNorm<Eigen::Infinity>() <= trust_radius_;
  }

private:
  Family family_;
  Prior prior_;
  double trust_radius_;
};

// ---------------------------------------------------------------------------
// Per-datum quantities

inline void check_index(const Dataset& data, Index i) {
  if (i < 0 || i >= data.n())
    throw std::out_of_range("datum index " + std::to_string(i) + " outside [0, " +
                            std::to_string(data.n()) + ")");
}

inline double log_lik_i(const Model& model, const Dataset& data, Index i, const Theta& theta) {
  check_index(data, i);
  model.check_theta(data, theta);
  return model.visit([&](const auto& f) { return f.at(theta).log_lik(data, i); });
}

inline Eigen::VectorXd grad_log_lik_i(const Model& model, const Dataset& data, Index i,
                                      const Theta& theta) {
  check_index(data, i);
  model.check_theta(data, theta);
  return model.visit([&](const auto& f) { return f.at(theta).grad(data, i); });
}

inline Eigen::MatrixXd hess_log_lik_i(const Model& model, const Dataset& data, Index i,
                                      const Theta& theta) {
  check_index(data, i);
  model.check_theta(data, theta);
  return model.visit([&](const auto& f) { return f.at(theta).hess(data, i); });
}

/// Uniform (over i and the model's trust region around theta_ref) bound on
/// the third partial derivatives of l_i.
inline double third_deriv_bound(const Model& model, const Dataset& data, const Theta& theta_ref) {
  if (data.n() < 1) throw std::invalid_argument("third_deriv_bound needs a nonempty dataset");
  model.check_theta(data, theta_ref);
  return model.visit(
      [&](const auto& f) { return f.third_deriv_bound(data, theta_ref, model.trust_radius()); });
}

/// M / 6, the factor in front of ||h||^3 in the Taylor-Lagrange remainder.
inline double remainder_coefficient(const Model& model, const Dataset& data, const Theta& theta_ref) {
  return third_deriv_bound(model, data, theta_ref) / 6.0;
}

/// Sum over i of l_i(theta), in index order. Charges n evaluations.
inline double full_log_lik(const Model& model, const Dataset& data, const Theta& theta,
                           EvalCounter* counter = nullptr) {
  model.check_theta(data, theta);
  const double s = model.visit([&](const auto& f) {
    const auto a = f.at(theta);
    double acc = 0.0;
    for (Index i = 0; i < data.n(); ++i) acc += a.log_lik(data, i);
    return acc;
  });
  if (counter) counter->add(static_cast<std::uint64_t>(data.n()));
  return s;
}

/// Sum of per-datum gradients and Hessians at theta (one pass).
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> full_grad_hess(const Model& model,
                                                                  const Dataset& data,
                                                                  const Theta& theta) {
  model.check_theta(data, theta);
  const Index p = model.dim(data);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(p, p);
  model.visit([&](const auto& f) {
    const auto a = f.at(theta);
    using F = std::decay_t<decltype(f)>;
    for (Index i = 0; i < data.n(); ++i) {
      g += a.grad(data, i);
      if constexpr (F::rank_one_hessian) {
        const auto xi = data.x(i).transpose();
        h.noalias() += a.hess_scale(data, i) * (xi * xi.transpose());
      } else {
        h += a.hess(data, i);
      }
    }
  });
  return {g, h};
}

// ---------------------------------------------------------------------------
// Prior

inline double log_prior(const Model& model, const Theta& theta) {
  detail::require_finite(theta);
  if (const auto* c = std::get_if<CauchyPrior>(&model.prior())) {
    if (c->location.size() != theta.size())
      throw std::invalid_argument("Cauchy prior dimension does not match parameter");
    double lp = 0.0;
    for (Index j = 0; j < theta.size(); ++j) {
      const double z = (theta[j] - c->location[j]) / c->scale[j];
      lp += -std::log(std::numbers::pi * c->scale[j]) - std::log1p(z * z);
    }
    return lp;
  }
  return 0.0;
}

inline Eigen::VectorXd grad_log_prior(const Model& model, const Theta& theta) {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(theta.size());
  if (const auto* c = std::get_if<CauchyPrior>(&model.prior())) {
    for (Index j = 0; j < theta.size(); ++j) {
      const double u = theta[j] - c->location[j];
      g[j] = -2.0 * u / (c->scale[j] * c->scale[j] + u * u);
    }
  }
  return g;
}

inline Eigen::MatrixXd hess_log_prior(const Model& model, const Theta& theta) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(theta.size(), theta.size());
  if (const auto* c = std::get_if<CauchyPrior>(&model.prior())) {
    for (Index j = 0; j < theta.size(); ++j) {
      const double u = theta[j] - c->location[j];
      const double s2 = c->scale[j] * c->scale[j];
      const double den = s2 + u * u;
      h(j, j) = -2.0 * (s2 - u * u) / (den * den);
    }
  }
  return h;
}

inline double log_posterior(const Model& model, const Dataset& data, const Theta& theta,
                            EvalCounter* counter = nullptr) {
  return log_prior(model, theta) + full_log_lik(model, data, theta, counter);
}

/// Lower bound a(theta) <= min_i l_i(theta) computable without a data pass.
inline double uniform_lower_bound(const Model& model, const Dataset& data, const Theta& theta) {
  model.check_theta(data, theta);
  return model.visit([&](const auto& f) { return f.uniform_lower_bound(data, theta); });
}

// ---------------------------------------------------------------------------
// Firefly-style lower bounds from a second-order expansion

/// Expansion point and remainder constant for b_i(theta) =
/// taylor2_i(theta) - (M/6) ||theta - theta_star||^3.
struct TaylorBoundSpec {
  Theta theta_star;
  double third_bound = 0.0;  // M
  RemainderNorm norm = RemainderNorm::l2;

  static TaylorBoundSpec from_model(const Model& model, const Dataset& data, const Theta& theta_star) {
    return {theta_star, third_deriv_bound(model, data, theta_star), model.norm()};
  }

  double remainder(const Theta& theta) const {
    const double r = remainder_norm(norm, theta - theta_star);
    return third_bound / 6.0 * r * r * r;
  }
};

inline double firefly_lower_bound_i(const Model& model, const Dataset& data, Index i,
                                    const Theta& theta, const TaylorBoundSpec& spec) {
  check_index(data, i);
  model.check_theta(data, theta);
  if (!model.in_trust_region(spec.theta_star, theta))
    throw std::domain_error("parameter lies outside the trust region of the lower bound");
  return model.visit([&](const auto& f) {
    const auto a = f.at(spec.theta_star);
    const Eigen::VectorXd h = theta - spec.theta_star;
    const double quad = h.dot(a.hess(data, i) * h);
    return a.log_lik(data, i) + a.grad(data, i).dot(h) + 0.5 * quad - spec.remainder(theta);
  });
}

}  // namespace tallmcmc
