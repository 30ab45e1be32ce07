#pragma once

// Correlation primitives and the correlation-propagation bounds.
//
// Conventions: expectations are sample means (divide by n) and standard
// deviations use the population form, so pearson(x, y) * sd(x) * sd(y) * n is
// exactly the signed quantity inside correlation_score.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <string>

#include "fairrf/error.hpp"

namespace fairrf {

template <typename Scalar>
struct CorrelationInterval {
  Scalar lo;
  Scalar hi;

  bool contains(Scalar rho, Scalar slack = Scalar(0)) const {
    return rho >= lo - slack && rho <= hi + slack;
  }
};

namespace detail {

template <typename Scalar>
Scalar clamp_unit(Scalar v) {
  return std::clamp(v, Scalar(-1), Scalar(1));
}

template <typename DerivedX, typename DerivedY>
void require_same_length(const Eigen::MatrixBase<DerivedX>& x,
                         const Eigen::MatrixBase<DerivedY>& y) {
  if (x.size() != y.size()) {
    throw DimensionError("length mismatch: " + std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()));
  }
  if (x.size() < 2) throw DimensionError("need at least 2 samples");
}

// Variance below this fraction of the squared magnitude is treated as zero;
// it absorbs the rounding left by centering a constant vector.
template <typename Scalar>
bool degenerate_variance(Scalar var, Scalar max_sq) {
  const Scalar eps = Eigen::NumTraits<Scalar>::epsilon();
  return !(var > Scalar(64) * eps * eps * std::max(max_sq, Scalar(1)));
}

}  // namespace detail

/// Population standard deviation (divide by n).
template <typename Derived>
typename Derived::Scalar population_sd(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Scalar mean = x.mean();
  return std::sqrt((x.array() - mean).square().mean());
}

/// Pearson correlation. Throws DegenerateVarianceError when either input is
/// constant; the caller picks the policy for that case.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar pearson(const Eigen::MatrixBase<DerivedX>& x,
                                  const Eigen::MatrixBase<DerivedY>& y) {
  using Scalar = typename DerivedX::Scalar;
  detail::require_same_length(x, y);
  const auto xc = (x.array() - x.mean()).eval();
  const auto yc = (y.array() - y.mean()).eval();
  const Scalar var_x = xc.square().mean();
  const Scalar var_y = yc.square().mean();
  if (detail::degenerate_variance(var_x, x.array().square().maxCoeff()) ||
      detail::degenerate_variance(var_y, y.array().square().maxCoeff())) {
    throw DegenerateVarianceError("pearson: input has zero variance");
  }
  const Scalar cov = (xc * yc).mean();
  return detail::clamp_unit(cov / std::sqrt(var_x * var_y));
}

/// |sum_i (x_i - mean x) * yhat_i|, the unnormalized covariance magnitude.
/// Centering yhat as well gives the same value because the centered x sums to 0.
template <typename DerivedX, typename DerivedY>
typename DerivedX::Scalar correlation_score(const Eigen::MatrixBase<DerivedX>& x,
                                            const Eigen::MatrixBase<DerivedY>& yhat) {
  detail::require_same_length(x, yhat);
  return std::abs(((x.array() - x.mean()) * yhat.array()).sum());
}

/// Interval that must contain rho(X, Z) given rho(X, Y) and rho(Y, Z).
template <typename Scalar>
CorrelationInterval<Scalar> propagate_bound(Scalar rho_xy, Scalar rho_yz) {
  const Scalar a = std::acos(detail::clamp_unit(rho_xy));
  const Scalar b = std::acos(detail::clamp_unit(rho_yz));
  Scalar lo = detail::clamp_unit(std::cos(a + b));
  Scalar hi = detail::clamp_unit(std::cos(a - b));
  if (lo > hi) std::swap(lo, hi);
  return {lo, hi};
}

/// Range of rho(S, yhat) when every related feature j has angle alphas[j] to S
/// and the prediction is kept within angle delta of orthogonal to the features.
/// Only the smallest angle matters.
template <typename Scalar>
CorrelationInterval<Scalar> fairness_bound(std::span<const Scalar> alphas, Scalar delta) {
  if (alphas.empty()) throw Error("fairness_bound: no feature angles given");
  constexpr Scalar half_pi = std::numbers::pi_v<Scalar> / 2;
  for (Scalar a : alphas) {
    if (!(a >= Scalar(0) && a <= half_pi)) {
      throw Error("fairness_bound: angle outside [0, pi/2]");
    }
  }
  const Scalar alpha_min = *std::min_element(alphas.begin(), alphas.end());
  // Past pi the cosine turns back up; the interval is already [-1, .] there.
  const Scalar upper_angle = std::min(half_pi + delta + alpha_min, std::numbers::pi_v<Scalar>);
  const Scalar lower_angle = std::max(half_pi - delta - alpha_min, Scalar(0));
  return {detail::clamp_unit(std::cos(upper_angle)), detail::clamp_unit(std::cos(lower_angle))};
}

}  // namespace fairrf
