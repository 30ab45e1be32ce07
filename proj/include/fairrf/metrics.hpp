#pragma once

// Accuracy and group-fairness gaps. The soft gaps average predicted
// probabilities, as in E[yhat | S = i]; *_hard variants threshold first.
// With more than two groups the reported gap is the largest pairwise one.

#include <Eigen/Core>

#include <algorithm>
#include <map>
#include <string>

#include "fairrf/error.hpp"

namespace fairrf {

template <typename DerivedP, typename DerivedY>
double accuracy(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedY>& y,
                double threshold = 0.5) {
  if (yhat.size() != y.size()) throw DimensionError("accuracy: length mismatch");
  if (yhat.size() == 0) throw UndefinedMetricError("accuracy: empty input");
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < yhat.size(); ++i) {
    const bool predicted = yhat(i) >= threshold;
    correct += predicted == (y(i) > 0.5);
  }
  return static_cast<double>(correct) / static_cast<double>(yhat.size());
}

namespace detail {

// Max minus min of per-group means over rows where mask holds.
template <typename DerivedP, typename DerivedS, typename Mask>
double max_group_gap(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedS>& s,
                     Mask&& mask, const char* what) {
  if (yhat.size() != s.size()) throw DimensionError(std::string(what) + ": length mismatch");
  std::map<int, std::pair<double, Eigen::Index>> groups;  // id -> (sum, count)
  for (Eigen::Index i = 0; i < s.size(); ++i) groups.try_emplace(static_cast<int>(s(i)), 0.0, 0);
  for (Eigen::Index i = 0; i < yhat.size(); ++i) {
    if (!mask(i)) continue;
    auto& g = groups[static_cast<int>(s(i))];
    g.first += static_cast<double>(yhat(i));
    ++g.second;
  }
  if (groups.size() < 2) {
    throw UndefinedMetricError(std::string(what) + ": need at least two sensitive groups");
  }
  double lo = 0.0;
  double hi = 0.0;
  bool first = true;
  for (const auto& [id, g] : groups) {
    if (g.second == 0) {
      throw UndefinedMetricError(std::string(what) + ": group " + std::to_string(id) +
                                 " has no qualifying rows");
    }
    const double mean = g.first / static_cast<double>(g.second);
    lo = first ? mean : std::min(lo, mean);
    hi = first ? mean : std::max(hi, mean);
    first = false;
  }
  return hi - lo;
}

}  // namespace detail

/// |E[yhat | S=i, y=1] - E[yhat | S=j, y=1]|.
template <typename DerivedP, typename DerivedY, typename DerivedS>
double delta_eo(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedY>& y,
                const Eigen::MatrixBase<DerivedS>& s) {
  if (y.size() != yhat.size()) throw DimensionError("delta_eo: length mismatch");
  return detail::max_group_gap(yhat, s, [&](Eigen::Index i) { return y(i) > 0.5; }, "delta_eo");
}

/// |E[yhat | S=i] - E[yhat | S=j]|.
template <typename DerivedP, typename DerivedS>
double delta_dp(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedS>& s) {
  return detail::max_group_gap(yhat, s, [](Eigen::Index) { return true; }, "delta_dp");
}

template <typename DerivedP>
Eigen::VectorXd threshold_predictions(const Eigen::MatrixBase<DerivedP>& yhat, double threshold = 0.5) {
  return yhat.unaryExpr([threshold](auto v) { return v >= threshold ? 1.0 : 0.0; }).template cast<double>();
}

template <typename DerivedP, typename DerivedY, typename DerivedS>
double delta_eo_hard(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedY>& y,
                     const Eigen::MatrixBase<DerivedS>& s, double threshold = 0.5) {
  return delta_eo(threshold_predictions(yhat, threshold), y, s);
}

template <typename DerivedP, typename DerivedS>
double delta_dp_hard(const Eigen::MatrixBase<DerivedP>& yhat, const Eigen::MatrixBase<DerivedS>& s,
                     double threshold = 0.5) {
  return delta_dp(threshold_predictions(yhat, threshold), s);
}

}  // namespace fairrf
