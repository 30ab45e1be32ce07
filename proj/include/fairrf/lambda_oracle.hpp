#pragma once

// Reference solvers for the simplex-constrained lambda problem. They share no
// code with solve_lambda and exist to check it.

#include <Eigen/Core>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>

#include "fairrf/error.hpp"

namespace fairrf {

enum class OracleMethod {
  /// Try every nonempty support, solve its equality-constrained KKT system,
  /// keep the feasible minimizer. Exponential in K.
  ActiveSetEnumeration,
  /// Projected gradient descent with a bisection-based simplex projection.
  ProjectedGradient,
};

namespace detail {

template <typename Scalar>
using DynVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
DynVector<Scalar> enumerate_supports(const DynVector<Scalar>& r, Scalar beta) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index k = r.size();
  if (k > 16) throw Error("qp_oracle: active-set enumeration limited to K <= 16");

  DynVector<Scalar> best = DynVector<Scalar>::Zero(k);
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  for (unsigned mask = 1; mask < (1u << k); ++mask) {
    std::vector<Eigen::Index> support;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (mask & (1u << j)) support.push_back(j);
    }
    const auto m = static_cast<Eigen::Index>(support.size());
    // [2 beta I  1] [lambda_S]   [-R_S]
    // [  1^T     0] [   v    ] = [  1 ]
    Matrix kkt = Matrix::Zero(m + 1, m + 1);
    DynVector<Scalar> rhs(m + 1);
    for (Eigen::Index i = 0; i < m; ++i) {
      kkt(i, i) = Scalar(2) * beta;
      kkt(i, m) = Scalar(1);
      kkt(m, i) = Scalar(1);
      rhs(i) = -r(support[static_cast<std::size_t>(i)]);
    }
    rhs(m) = Scalar(1);
    const DynVector<Scalar> sol = kkt.fullPivLu().solve(rhs);
    if ((sol.head(m).array() < Scalar(-1e-14)).any()) continue;

    DynVector<Scalar> candidate = DynVector<Scalar>::Zero(k);
    for (Eigen::Index i = 0; i < m; ++i) {
      candidate(support[static_cast<std::size_t>(i)]) = std::max(sol(i), Scalar(0));
    }
    const Scalar value = r.dot(candidate) + beta * candidate.squaredNorm();
    if (value < best_value) {
      best_value = value;
      best = candidate;
    }
  }
  return best;
}

// Euclidean projection onto the simplex: find tau with sum max(0, y - tau) = 1
// by bisection.
template <typename Scalar>
DynVector<Scalar> project_simplex_bisection(const DynVector<Scalar>& y) {
  Scalar lo = y.minCoeff() - Scalar(1);
  Scalar hi = y.maxCoeff();
  for (int it = 0; it < 200; ++it) {
    const Scalar mid = (lo + hi) / Scalar(2);
    const Scalar mass = (y.array() - mid).max(Scalar(0)).sum();
    if (mass > Scalar(1)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Scalar tau = (lo + hi) / Scalar(2);
  DynVector<Scalar> p = (y.array() - tau).max(Scalar(0)).matrix();
  return p / p.sum();
}

template <typename Scalar>
DynVector<Scalar> projected_gradient(const DynVector<Scalar>& r, Scalar beta) {
  const Eigen::Index k = r.size();
  DynVector<Scalar> lambda = DynVector<Scalar>::Constant(k, Scalar(1) / static_cast<Scalar>(k));
  // Gradient is Lipschitz with constant 2 beta; half the maximal step.
  const Scalar step = Scalar(0.5) / (Scalar(2) * beta);
  for (int it = 0; it < 20000; ++it) {
    const DynVector<Scalar> grad = r + Scalar(2) * beta * lambda;
    DynVector<Scalar> next = project_simplex_bisection<Scalar>(lambda - step * grad);
    const Scalar change = (next - lambda).cwiseAbs().maxCoeff();
    lambda = std::move(next);
    if (change < Scalar(1e-15)) break;
  }
  return lambda;
}

}  // namespace detail

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> qp_oracle(
    const Eigen::MatrixBase<Derived>& scores, typename Derived::Scalar beta, OracleMethod method) {
  using Scalar = typename Derived::Scalar;
  if (scores.size() < 1) throw Error("qp_oracle: need at least one score");
  if (!(beta > Scalar(0))) throw Error("qp_oracle: beta must be positive");
  const detail::DynVector<Scalar> r = scores;
  switch (method) {
    case OracleMethod::ActiveSetEnumeration:
      return detail::enumerate_supports<Scalar>(r, beta);
    case OracleMethod::ProjectedGradient:
      return detail::projected_gradient<Scalar>(r, beta);
  }
  throw Error("qp_oracle: unknown method");
}

}  // namespace fairrf
