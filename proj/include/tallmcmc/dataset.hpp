#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace tallmcmc {

using Theta = Eigen::VectorXd;
using Index = Eigen::Index;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class ResponseKind { none, label, continuous };

inline const char* to_string(ResponseKind k) {
  switch (k) {
    case ResponseKind::none: return "none";
    case ResponseKind::label: return "label";
    case ResponseKind::continuous: return "continuous";
  }
  return "?";
}

inline ResponseKind response_kind_from_string(const std::string& s) {
  if (s == "none") return ResponseKind::none;
  if (s == "label") return ResponseKind::label;
  if (s == "continuous") return ResponseKind::continuous;
  throw std::invalid_argument("unknown response kind '" + s + "'");
}

/// Immutable collection of n records (feature row x_i plus an optional
/// response or +-1 label), with summary statistics computed once at
/// construction. Safe for concurrent reads.
class Dataset {
public:
  Dataset() = default;

  Dataset(RowMatrix features, Eigen::VectorXd response, ResponseKind kind)
      : features_(std::move(features)),
        response_(std::move(response)),
        kind_(kind) {
    validate();
    summarize();
  }

  explicit Dataset(RowMatrix features)
      : Dataset(std::move(features), Eigen::VectorXd(), ResponseKind::none) {}

  Index n() const noexcept { return features_.rows(); }
  Index d() const noexcept { return features_.cols(); }
  ResponseKind response_kind() const noexcept { return kind_; }
  bool has_response() const noexcept { return kind_ != ResponseKind::none; }

  const RowMatrix& features() const noexcept { return features_; }
  const Eigen::VectorXd& response() const noexcept { return response_; }

  auto x(Index i) const { return features_.row(i); }
  double y(Index i) const { return response_[i]; }

  /// max_i ||x_i||_inf
  double max_inf_norm() const noexcept { return max_inf_norm_; }
  /// max_i ||x_i||_2
  double max_l2_norm() const noexcept { return max_l2_norm_; }
  /// max_i |y_i| (0 when there is no response)
  double max_abs_response() const noexcept { return max_abs_response_; }
  /// column j -> max_i |x_i^(j)|
  const Eigen::VectorXd& column_abs_max() const noexcept { return col_abs_max_; }
  const Eigen::VectorXd& column_min() const noexcept { return col_min_; }
  const Eigen::VectorXd& column_max() const noexcept { return col_max_; }

private:
  void validate() const {
    if (features_.rows() < 1) throw std::invalid_argument("dataset must hold at least one record");
    if (features_.cols() < 1) throw std::invalid_argument("dataset records need at least one feature");
    if (kind_ == ResponseKind::none) {
      if (response_.size() != 0) throw std::invalid_argument("response given for a response-less dataset");
    } else if (response_.size() != features_.rows()) {
      throw std::invalid_argument("response length " + std::to_string(response_.size()) +
                                  " does not match n = " + std::to_string(features_.rows()));
    }
    if (!features_.allFinite() || !response_.allFinite())
      throw std::invalid_argument("dataset contains non-finite values");
    if (kind_ == ResponseKind::label) {
      for (Index i = 0; i < response_.size(); ++i)
        if (response_[i] != 1.0 && response_[i] != -1.0)
          throw std::invalid_argument("labels must be -1 or +1 (record " + std::to_string(i) + ")");
    }
  }

  void summarize() {
    const auto abs = features_.cwiseAbs();
    max_inf_norm_ = abs.maxCoeff();
    max_l2_norm_ = features_.rowwise().norm().maxCoeff();
    col_abs_max_ = abs.colwise().maxCoeff().transpose();
    col_min_ = features_.colwise().minCoeff().transpose();
    col_max_ = features_.colwise().maxCoeff().transpose();
    max_abs_response_ = response_.size() ? response_.cwiseAbs().maxCoeff() : 0.0;
  }

  RowMatrix features_;
  Eigen::VectorXd response_;
  ResponseKind kind_ = ResponseKind::none;
  double max_inf_norm_ = 0.0;
  double max_l2_norm_ = 0.0;
  double max_abs_response_ = 0.0;
  Eigen::VectorXd col_abs_max_;
  Eigen::VectorXd col_min_;
  Eigen::VectorXd col_max_;
};

/// Running count of per-datum likelihood evaluations. Owned by whoever
/// does the accounting (usually a sampler); models never count on their own.
struct EvalCounter {
  std::uint64_t count = 0;
  void add(std::uint64_t k) noexcept { count += k; }
};

}  // namespace tallmcmc
