#pragma once

// The FairRF objective:
//   L_cls + eta * sum_j lambda_j * R_j + beta * ||lambda||^2,
// where R_j sums correlation_score(column, yhat) over the encoded columns of
// related feature j (a one-hot categorical contributes one term per level, all
// sharing lambda_j).

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

#include "fairrf/dataset.hpp"
#include "fairrf/error.hpp"

namespace fairrf {

struct ObjectiveConfig {
  double eta = 0.0;
  double beta = 1.0;

  void validate() const {
    if (!(eta >= 0.0)) throw ConfigError("eta must be >= 0");
    if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  }
};

/// Proxy columns the penalty decorrelates yhat from, grouped per feature.
/// For FairRF these are the related features' encoded columns gathered out of
/// X; the ConstrainS baseline puts the sensitive vector here instead.
struct ProxyFeatures {
  std::vector<std::string> names;
  Eigen::MatrixXd values;                           // n x total proxy columns
  std::vector<std::vector<Eigen::Index>> groups;    // column indices into values

  Eigen::Index size() const { return static_cast<Eigen::Index>(groups.size()); }
  bool empty() const { return groups.empty(); }
  ProxyFeatures rows(std::span<const Eigen::Index> idx) const;
};

ProxyFeatures gather_proxies(const Eigen::MatrixXd& X, const RelatedFeatureSet& related);

template <typename Scalar>
struct PenaltyValue {
  Scalar total{};
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> per_feature;
};

namespace detail {

// c_col = sum_i (P_i,col - mean_col) * yhat_i for every proxy column.
template <typename DerivedP, typename DerivedY>
Eigen::Matrix<typename DerivedP::Scalar, Eigen::Dynamic, 1> centered_covariances(
    const Eigen::MatrixBase<DerivedP>& proxies, const Eigen::MatrixBase<DerivedY>& yhat) {
  if (proxies.rows() != yhat.size()) throw DimensionError("penalty: proxies and yhat disagree on rows");
  const auto means = proxies.colwise().mean();
  return (proxies.rowwise() - means).transpose() * yhat;
}

}  // namespace detail

/// per_feature[j] = sum over group j's columns of |c_col|; total = lambda . per_feature.
template <typename DerivedP, typename DerivedL, typename DerivedY>
PenaltyValue<typename DerivedP::Scalar> related_penalty(
    const Eigen::MatrixBase<DerivedP>& proxies, std::span<const std::vector<Eigen::Index>> groups,
    const Eigen::MatrixBase<DerivedL>& lambda, const Eigen::MatrixBase<DerivedY>& yhat) {
  using Scalar = typename DerivedP::Scalar;
  if (lambda.size() != static_cast<Eigen::Index>(groups.size())) {
    throw DimensionError("penalty: lambda length differs from the number of feature groups");
  }
  const auto cov = detail::centered_covariances(proxies, yhat);
  PenaltyValue<Scalar> out;
  out.per_feature.resize(static_cast<Eigen::Index>(groups.size()));
  for (std::size_t j = 0; j < groups.size(); ++j) {
    Scalar sum = 0;
    for (Eigen::Index col : groups[j]) sum += std::abs(cov(col));
    out.per_feature(static_cast<Eigen::Index>(j)) = sum;
  }
  out.total = out.per_feature.dot(lambda);
  return out;
}

/// d(total)/d(yhat) = sum_j lambda_j sum_col sign(c_col) * (P_col - mean_col),
/// with sign(0) = 0 at the kink.
template <typename DerivedP, typename DerivedL, typename DerivedY>
Eigen::Matrix<typename DerivedP::Scalar, Eigen::Dynamic, 1> penalty_grad_yhat(
    const Eigen::MatrixBase<DerivedP>& proxies, std::span<const std::vector<Eigen::Index>> groups,
    const Eigen::MatrixBase<DerivedL>& lambda, const Eigen::MatrixBase<DerivedY>& yhat) {
  using Scalar = typename DerivedP::Scalar;
  if (lambda.size() != static_cast<Eigen::Index>(groups.size())) {
    throw DimensionError("penalty: lambda length differs from the number of feature groups");
  }
  const auto cov = detail::centered_covariances(proxies, yhat);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> weights = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(proxies.cols());
  for (std::size_t j = 0; j < groups.size(); ++j) {
    for (Eigen::Index col : groups[j]) {
      const Scalar c = cov(col);
      const Scalar sign = c > 0 ? Scalar(1) : (c < 0 ? Scalar(-1) : Scalar(0));
      weights(col) += lambda(static_cast<Eigen::Index>(j)) * sign;
    }
  }
  const auto means = proxies.colwise().mean();
  return (proxies.rowwise() - means) * weights;
}

template <typename DerivedL>
typename DerivedL::Scalar total_objective(typename DerivedL::Scalar cls_loss,
                                          typename DerivedL::Scalar penalty_total,
                                          const Eigen::MatrixBase<DerivedL>& lambda,
                                          const ObjectiveConfig& cfg) {
  return cls_loss + cfg.eta * penalty_total + cfg.beta * lambda.squaredNorm();
}

}  // namespace fairrf
