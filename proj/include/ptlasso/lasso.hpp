#pragma once

// l1-penalized least squares by cyclic coordinate descent, and the ridge
// stabilized l2 fit restricted to a support set.
//
// Objective: ||Y - Z theta||_2^2 + lambda ||theta||_1 (sum of squares, not
// averaged over rows).

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "ptlasso/error.hpp"

namespace ptlasso {

struct RegressionProblem {
  Eigen::MatrixXd design;    // t x d
  Eigen::VectorXd response;  // t
  double lambda = 0.0;
  double radius = std::numeric_limits<double>::infinity();
};

struct LassoOptions {
  double tol = 1e-6;
  /// Coordinate updates; 0 selects 10^4 * d.
  std::int64_t max_iters = 0;
  bool record_objective = false;
};

struct LassoResult {
  Eigen::VectorXd theta;
  bool converged = false;
  bool projected = false;
  std::int64_t iterations = 0;  // coordinate updates performed
  double kkt = 0.0;             // residual of the unprojected iterate
  std::vector<double> objective_trace;  // one entry per sweep, if requested
};

inline double lasso_objective(const RegressionProblem& problem, const Eigen::VectorXd& theta) {
  return (problem.response - problem.design * theta).squaredNorm() +
         problem.lambda * theta.lpNorm<1>();
}

namespace detail {

/// Max coordinatewise KKT violation given g = Z'(Z theta - Y).
inline double kkt_from_gradient(const Eigen::VectorXd& g, const Eigen::VectorXd& theta,
                                double lambda) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double grad = 2.0 * g[j];
    const double v = theta[j] == 0.0 ? std::max(0.0, std::abs(grad) - lambda)
                                     : std::abs(grad + lambda * (theta[j] > 0.0 ? 1.0 : -1.0));
    worst = std::max(worst, v);
  }
  return worst;
}

inline double soft_threshold(double value, double cut) {
  if (value > cut) return value - cut;
  if (value < -cut) return value + cut;
  return 0.0;
}

}  // namespace detail

/// Maximum coordinatewise violation of the LASSO stationarity conditions.
inline double kkt_residual(const RegressionProblem& problem, const Eigen::VectorXd& theta) {
  const Eigen::VectorXd g =
      problem.design.transpose() * (problem.design * theta - problem.response);
  return detail::kkt_from_gradient(g, theta, problem.lambda);
}

inline LassoResult lasso_fit(const RegressionProblem& problem, const LassoOptions& options = {},
                             const Eigen::VectorXd* warm_start = nullptr) {
  const Eigen::Index d = problem.design.cols();
  if (problem.lambda < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
  if (problem.design.rows() != problem.response.size()) {
    throw Error(ErrorCode::kInvalidDimensions, "design rows must match response length");
  }

  const Eigen::MatrixXd H = problem.design.transpose() * problem.design;
  const Eigen::VectorXd c = problem.design.transpose() * problem.response;
  const double yy = problem.response.squaredNorm();
  const double half_lambda = 0.5 * problem.lambda;
  const std::int64_t max_iters =
      options.max_iters > 0 ? options.max_iters : std::int64_t{10000} * std::max<Eigen::Index>(d, 1);

  LassoResult result;
  result.theta = Eigen::VectorXd::Zero(d);
  if (warm_start != nullptr && warm_start->size() == d) result.theta = *warm_start;
  Eigen::VectorXd& theta = result.theta;
  Eigen::VectorXd g = H * theta - c;

  auto objective = [&] {
    return yy - 2.0 * c.dot(theta) + theta.dot(H * theta) + problem.lambda * theta.lpNorm<1>();
  };
  if (options.record_objective) result.objective_trace.push_back(objective());

  result.kkt = detail::kkt_from_gradient(g, theta, problem.lambda);
  while (result.kkt > options.tol && result.iterations < max_iters) {
    for (Eigen::Index j = 0; j < d && result.iterations < max_iters; ++j, ++result.iterations) {
      const double hjj = H(j, j);
      const double old = theta[j];
      double updated = 0.0;
      if (hjj > 0.0) updated = detail::soft_threshold(hjj * old - g[j], half_lambda) / hjj;
      if (updated != old) {
        g.noalias() += H.col(j) * (updated - old);
        theta[j] = updated;
      }
    }
    g = H * theta - c;  // refresh to avoid drift from incremental updates
    result.kkt = detail::kkt_from_gradient(g, theta, problem.lambda);
    if (options.record_objective) result.objective_trace.push_back(objective());
  }
  result.converged = result.kkt <= options.tol;

  const double norm = theta.norm();
  if (norm > problem.radius) {
    theta *= problem.radius / norm;
    result.projected = true;
  }
  return result;
}

/// Normal-equation data of the l2 regression restricted to a support set.
struct RestrictedGram {
  std::vector<int> support;
  Eigen::MatrixXd V;  // |S| x |S|
  Eigen::VectorXd u;  // |S|
  std::int64_t count = 0;
  int d = 0;
};

inline double default_ridge(const RestrictedGram& gram) {
  if (gram.support.empty()) return 1e-12;
  return std::max(1e-6 * gram.V.trace() / double(gram.support.size()), 1e-12);
}

/// Solves (V + ridge I) w = u and scatters w into a length-d vector, rescaled
/// onto the C_theta ball when necessary.
inline Eigen::VectorXd restricted_l2_fit(const RestrictedGram& gram, double C_theta,
                                         std::optional<double> ridge = std::nullopt) {
  const auto s = static_cast<Eigen::Index>(gram.support.size());
  if (s == 0) throw Error(ErrorCode::kEmptySupport, "restricted fit needs a nonempty support");
  if (gram.V.rows() != s || gram.V.cols() != s || gram.u.size() != s) {
    throw Error(ErrorCode::kInvalidDimensions, "gram blocks do not match support size");
  }
  const double rho = ridge.value_or(default_ridge(gram));
  if (!(rho > 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be positive");

  Eigen::MatrixXd A = gram.V;
  A.diagonal().array() += rho;
  Eigen::VectorXd w = A.ldlt().solve(gram.u);
  if (!w.allFinite()) w = A.fullPivLu().solve(gram.u);
  const double norm = w.norm();
  if (norm > C_theta) w *= C_theta / norm;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(gram.d);
  for (Eigen::Index i = 0; i < s; ++i) theta[gram.support[i]] = w[i];
  return theta;
}

}  // namespace ptlasso
