#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

#include "tallmcmc/dataset.hpp"
#include "tallmcmc/models.hpp"
#include "tallmcmc/record_file.hpp"

namespace tallmcmc {

enum class HessianLayout : std::uint32_t {
  packed = 0,    // upper triangle, row by row: p(p+1)/2 values
  rank_one = 1,  // scalar c_i with H_i = c_i x_i x_i'
};

/// On-disk per-datum record file holding (l_i, g_i, H_i) at theta_star.
///
/// Layout (native endian): "TMCPROXY" | u32 version | u32 hessian layout |
/// u64 n | u64 p | p doubles theta_star | n fixed-width records
/// [l_i, g_i (p), hessian (p(p+1)/2 or 1)].
class ProxyStore {
public:
  static constexpr std::string_view kMagic = "TMCPROXY";
  static constexpr std::uint32_t kVersion = 1;

  static std::size_t hessian_width(HessianLayout layout, Index p) {
    return layout == HessianLayout::rank_one ? 1 : static_cast<std::size_t>(p * (p + 1) / 2);
  }

  /// Opens an existing store. When remove_on_close is set the file is
  /// deleted once the last handle goes away.
  static std::shared_ptr<const ProxyStore> open(const std::filesystem::path& path,
                                                bool remove_on_close = false) {
    return std::shared_ptr<const ProxyStore>(new ProxyStore(path, remove_on_close));
  }

  ProxyStore(const ProxyStore&) = delete;
  ProxyStore& operator=(const ProxyStore&) = delete;

  ~ProxyStore() {
    if (remove_on_close_) {
      std::error_code ec;
      file_ = MappedFile();
      std::filesystem::remove(path_, ec);
    }
  }

  Index n() const noexcept { return n_; }
  Index p() const noexcept { return p_; }
  HessianLayout layout() const noexcept { return layout_; }
  const Theta& theta_star() const noexcept { return theta_star_; }
  const std::filesystem::path& path() const noexcept { return path_; }

  double log_lik(Index i) const { return row(i)[0]; }
  Eigen::Map<const Eigen::VectorXd> grad(Index i) const { return {row(i) + 1, p_}; }
  std::span<const double> hessian_values(Index i) const {
    return {row(i) + 1 + p_, hessian_width(layout_, p_)};
  }

  Eigen::MatrixXd hessian(const Dataset& data, Index i) const {
    const auto h = hessian_values(i);
    if (layout_ == HessianLayout::rank_one) {
      return detail::scaled_outer(h[0], data.x(i));
    }
    Eigen::MatrixXd m(p_, p_);
    std::size_t k = 0;
    for (Index a = 0; a < p_; ++a)
      for (Index b = a; b < p_; ++b) m(a, b) = m(b, a) = h[k++];
    return m;
  }

  /// (theta - theta_star)' H_i (theta - theta_star) for a precomputed offset.
  double quad(const Dataset& data, Index i, const Eigen::VectorXd& offset) const {
    const auto h = hessian_values(i);
    if (layout_ == HessianLayout::rank_one) {
      const double u = data.x(i).dot(offset);
      return h[0] * u * u;
    }
    double q = 0.0;
    std::size_t k = 0;
    for (Index a = 0; a < p_; ++a) {
      q += h[k++] * offset[a] * offset[a];
      for (Index b = a + 1; b < p_; ++b) q += 2.0 * h[k++] * offset[a] * offset[b];
    }
    return q;
  }

private:
  ProxyStore(const std::filesystem::path& path, bool remove_on_close)
      : path_(path), remove_on_close_(remove_on_close) {
    try {
      file_ = MappedFile(path);
      BinaryReader in(file_.bytes(), "proxy store '" + path.string() + "'");
      in.expect_magic(kMagic);
      const auto version = in.get<std::uint32_t>();
      if (version != kVersion)
        throw IoError("proxy store '" + path.string() + "': unsupported version " + std::to_string(version));
      const auto layout = in.get<std::uint32_t>();
      if (layout > 1) throw IoError("proxy store '" + path.string() + "': unknown hessian layout");
      layout_ = static_cast<HessianLayout>(layout);
      n_ = static_cast<Index>(in.get<std::uint64_t>());
      p_ = static_cast<Index>(in.get<std::uint64_t>());
      theta_star_.resize(p_);
      for (Index j = 0; j < p_; ++j) theta_star_[j] = in.get<double>();
      width_ = 1 + static_cast<std::size_t>(p_) + hessian_width(layout_, p_);
      in.need(static_cast<std::size_t>(n_) * width_ * sizeof(double));
      records_ = reinterpret_cast<const double*>(file_.bytes().data() + in.position());
    } catch (...) {
      if (remove_on_close_) {
        std::error_code ec;
        std::filesystem::remove(path_, ec);
      }
      throw;
    }
  }

  const double* row(Index i) const { return records_ + static_cast<std::size_t>(i) * width_; }

  std::filesystem::path path_;
  bool remove_on_close_;
  MappedFile file_;
  HessianLayout layout_ = HessianLayout::packed;
  Index n_ = 0;
  Index p_ = 0;
  Theta theta_star_;
  std::size_t width_ = 0;
  const double* records_ = nullptr;
};

/// Where build_proxy writes its per-datum store.
struct ProxyStoreOptions {
  std::filesystem::path directory = std::filesystem::temp_directory_path();
  /// Keep the file after the last proxy referencing it is gone.
  bool keep_file = false;
};

/// Second-order Taylor expansion of every l_i around theta_star, with the
/// aggregates needed to evaluate sum_i of the proxy in O(p^2).
struct TaylorProxy {
  Theta theta_star;
  Eigen::VectorXd mu_hat;      // (1/n) sum_i g_i
  Eigen::MatrixXd S_hat;       // (1/n) sum_i H_i
  double mean_log_lik = 0.0;   // (1/n) sum_i l_i(theta_star)
  double remainder_M = 0.0;    // uniform third-derivative bound
  RemainderNorm norm = RemainderNorm::l2;
  bool bounded_region = false;  // remainder only valid inside the trust box
  double trust_radius = 0.0;
  Index n = 0;
  std::uint64_t build_cost = 0;
  std::shared_ptr<const ProxyStore> store;

  bool covers(const Theta& theta) const {
    return !bounded_region || (theta - theta_star).lpNorm<Eigen::Infinity>() <= trust_radius;
  }
};

enum class ProxyMode { single_at_map, drop_every_alpha };

struct ProxyPolicy {
  ProxyMode mode = ProxyMode::single_at_map;
  int alpha = 10;

  void validate() const {
    if (mode == ProxyMode::drop_every_alpha && alpha < 1)
      throw std::invalid_argument("proxy refresh period alpha must be >= 1");
  }
};

/// Computes (l_i, g_i, H_i) at theta_star for every datum, persists them and
/// aggregates mu_hat and S_hat. Charges n evaluations to the counter.
inline TaylorProxy build_proxy(const Model& model, const Dataset& data, const Theta& theta_star,
                               const ProxyStoreOptions& options = {},
                               EvalCounter* counter = nullptr) {
  model.check(data);
  model.check_theta(data, theta_star);
  const Index n = data.n();
  const Index p = model.dim(data);

  const bool rank_one =
      model.visit([](const auto& f) { return std::decay_t<decltype(f)>::rank_one_hessian; });
  const HessianLayout layout = rank_one ? HessianLayout::rank_one : HessianLayout::packed;
  const std::size_t hw = ProxyStore::hessian_width(layout, p);

  std::error_code ec;
  std::filesystem::create_directories(options.directory, ec);
  const auto path = unique_scratch_path(options.directory, "proxy");

  Eigen::VectorXd g_sum = Eigen::VectorXd::Zero(p);
  Eigen::MatrixXd h_sum = Eigen::MatrixXd::Zero(p, p);
  double l_sum = 0.0;
  {
    BinaryWriter out(path);
    out.put_magic(ProxyStore::kMagic);
    out.put(ProxyStore::kVersion);
    out.put(static_cast<std::uint32_t>(layout));
    out.put(static_cast<std::uint64_t>(n));
    out.put(static_cast<std::uint64_t>(p));
    out.put_doubles(theta_star.data(), static_cast<std::size_t>(p));

    std::vector<double> rec(1 + static_cast<std::size_t>(p) + hw);
    model.visit([&](const auto& f) {
      using F = std::decay_t<decltype(f)>;
      const auto a = f.at(theta_star);
      for (Index i = 0; i < n; ++i) {
        const double li = a.log_lik(data, i);
        const Eigen::VectorXd gi = a.grad(data, i);
        rec[0] = li;
        for (Index j = 0; j < p; ++j) rec[1 + j] = gi[j];
        l_sum += li;
        g_sum += gi;
        if constexpr (F::rank_one_hessian) {
          const double c = a.hess_scale(data, i);
          rec[1 + p] = c;
          const auto xi = data.x(i).transpose();
          h_sum.noalias() += c * (xi * xi.transpose());
        } else {
          const Eigen::MatrixXd hi = a.hess(data, i);
          std::size_t k = 1 + static_cast<std::size_t>(p);
          for (Index r = 0; r < p; ++r)
            for (Index c = r; c < p; ++c) rec[k++] = hi(r, c);
          h_sum += hi;
        }
        out.put_doubles(rec.data(), rec.size());
      }
    });
    out.finish();
  }
  if (counter) counter->add(static_cast<std::uint64_t>(n));

  TaylorProxy proxy;
  proxy.theta_star = theta_star;
  proxy.n = n;
  proxy.mu_hat = g_sum / static_cast<double>(n);
  proxy.S_hat = h_sum / static_cast<double>(n);
  proxy.S_hat = 0.5 * (proxy.S_hat + proxy.S_hat.transpose()).eval();
  proxy.mean_log_lik = l_sum / static_cast<double>(n);
  proxy.remainder_M = third_deriv_bound(model, data, theta_star);
  proxy.norm = model.norm();
  proxy.bounded_region = model.has_trust_region();
  proxy.trust_radius = model.trust_radius();
  proxy.build_cost = static_cast<std::uint64_t>(n);
  proxy.store = ProxyStore::open(path, !options.keep_file);
  return proxy;
}

/// Per-datum proxy for one (theta, theta') pair with the offsets hoisted.
class ProxyPair {
public:
  ProxyPair(const TaylorProxy& proxy, const Theta& theta, const Theta& theta_prime)
      : store_(proxy.store.get()),
        step_(theta_prime - theta),
        off_(theta - proxy.theta_star),
        off_prime_(theta_prime - proxy.theta_star) {
    if (!store_) throw std::invalid_argument("proxy has no per-datum store");
  }

  /// g_i'(theta' - theta) + (1/2)[Q_i(theta' - theta_star) - Q_i(theta - theta_star)]
  double operator()(const Dataset& data, Index i) const {
    const double lin = store_->grad(i).dot(step_);
    return lin + 0.5 * (store_->quad(data, i, off_prime_) - store_->quad(data, i, off_));
  }

private:
  const ProxyStore* store_;
  Eigen::VectorXd step_, off_, off_prime_;
};

inline double proxy_pair_i(const TaylorProxy& proxy, const Model& model, const Dataset& data,
                           Index i, const Theta& theta, const Theta& theta_prime) {
  check_index(data, i);
  model.check_theta(data, theta);
  model.check_theta(data, theta_prime);
  return ProxyPair(proxy, theta, theta_prime)(data, i);
}

/// (1/n) sum_i proxy_i(theta, theta') in closed form; touches no data.
inline double proxy_sum(const TaylorProxy& proxy, const Theta& theta, const Theta& theta_prime) {
  const Eigen::VectorXd step = theta_prime - theta;
  const Eigen::VectorXd mid = theta + theta_prime - 2.0 * proxy.theta_star;
  return proxy.mu_hat.dot(step) + 0.5 * step.dot(proxy.S_hat * mid);
}

/// Uniform bound on |l_i(theta') - l_i(theta) - proxy_i(theta, theta')|.
inline double remainder_bound(const TaylorProxy& proxy, const Theta& theta, const Theta& theta_prime) {
  if (theta == theta_prime) return 0.0;
  const double a = remainder_norm(proxy.norm, theta - proxy.theta_star);
  const double b = remainder_norm(proxy.norm, theta_prime - proxy.theta_star);
  return proxy.remainder_M / 6.0 * (a * a * a + b * b * b);
}

inline bool refresh_due(const ProxyPolicy& policy, long iteration) {
  return policy.mode == ProxyMode::drop_every_alpha && iteration % policy.alpha == 0;
}

/// Rebuilds the proxy at current_theta every alpha iterations under
/// drop_every_alpha; otherwise hands the existing proxy back.
inline TaylorProxy refresh_if_due(const ProxyPolicy& policy, const TaylorProxy& proxy, long iteration,
                                  const Theta& current_theta, const Model& model, const Dataset& data,
                                  const ProxyStoreOptions& options = {}, EvalCounter* counter = nullptr) {
  policy.validate();
  if (!refresh_due(policy, iteration)) return proxy;
  return build_proxy(model, data, current_theta, options, counter);
}

}  // namespace tallmcmc
