#pragma once

// Closed-form minimizer of  sum_j lambda_j * R_j + beta * ||lambda||^2
// over the probability simplex.
//
// Stationarity gives lambda_j = max(0, (-v - R_j) / (2 beta)) for the multiplier
// v of the sum-to-one constraint; v is the root of
//     sum_j max(0, -v - R_j) = 2 beta,
// whose left side is piecewise linear and strictly increasing in -v. With R
// sorted descending (R'_1 >= ... >= R'_K), the root lies in one of the intervals
// [-R'_{l-1}, -R'_l] where exactly the tail l..K is active; the first interval
// (l = 1, everything active) is unbounded below.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairrf/error.hpp"

namespace fairrf {

template <typename Scalar>
struct LambdaSolution {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lambda;
  Scalar v{};
  std::vector<Eigen::Index> active_set;  // ascending indices with lambda_j > 0
};

/// Objective value sum_j lambda_j R_j + beta ||lambda||^2.
template <typename DerivedR, typename DerivedL>
typename DerivedR::Scalar lambda_objective(const Eigen::MatrixBase<DerivedR>& scores,
                                           const Eigen::MatrixBase<DerivedL>& lambda,
                                           typename DerivedR::Scalar beta) {
  return scores.dot(lambda) + beta * lambda.squaredNorm();
}

template <typename Derived>
LambdaSolution<typename Derived::Scalar> solve_lambda(const Eigen::MatrixBase<Derived>& scores,
                                                      typename Derived::Scalar beta) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index k = scores.size();
  if (k < 1) throw Error("solve_lambda: need at least one score");
  if (!(beta > Scalar(0))) throw Error("solve_lambda: beta must be positive");
  if (!scores.allFinite()) throw Error("solve_lambda: non-finite score");

  // Stable descending order; ties keep their input order and get equal weights
  // from the closed form anyway.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return scores(a) > scores(b); });

  // suffix[l] = sum of the sorted scores from position l to the end.
  std::vector<Scalar> suffix(static_cast<std::size_t>(k) + 1, Scalar(0));
  for (Eigen::Index l = k - 1; l >= 0; --l) {
    suffix[static_cast<std::size_t>(l)] =
        suffix[static_cast<std::size_t>(l) + 1] + scores(order[static_cast<std::size_t>(l)]);
  }

  const Scalar two_beta = Scalar(2) * beta;
  Scalar v = 0;
  bool found = false;
  // Position l (0-based) means sorted entries l..k-1 are active.
  for (Eigen::Index l = 0; l < k && !found; ++l) {
    const auto count = static_cast<Scalar>(k - l);
    const Scalar candidate = -(two_beta + suffix[static_cast<std::size_t>(l)]) / count;
    const Scalar upper = -scores(order[static_cast<std::size_t>(l)]);
    const Scalar slack = Scalar(1e-12) * (Scalar(1) + std::abs(candidate));
    bool valid = candidate <= upper + slack;
    if (l > 0) {
      const Scalar lower = -scores(order[static_cast<std::size_t>(l - 1)]);
      valid = valid && candidate >= lower - slack;
    }
    if (valid) {
      v = candidate;
      found = true;
    }
  }
  if (!found) {
    // Unreachable for finite input: the intervals tile the real line.
    throw Error("solve_lambda: no valid interval for the dual variable");
  }

  LambdaSolution<Scalar> out;
  out.v = v;
  out.lambda = ((-v - scores.array()) / two_beta).max(Scalar(0)).matrix();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (out.lambda(j) > Scalar(0)) out.active_set.push_back(j);
  }
  return out;
}

}  // namespace fairrf
