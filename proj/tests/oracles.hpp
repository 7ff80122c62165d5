#pragma once

// Independent reference computations used only by the tests. None of these
// share code with the library implementations they check.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace oracle {

/// Global LASSO minimum of ||Y - Z theta||^2 + lambda ||theta||_1 by
/// enumerating all 3^d sign patterns. For each pattern with active set A the
/// stationarity system 2 Z_A'(Z_A theta_A - Y) + lambda s_A = 0 is solved and
/// kept only if sign(theta_A) = s_A. The smallest objective wins.
struct LassoSolution {
  Eigen::VectorXd theta;
  double objective = std::numeric_limits<double>::infinity();
};

inline LassoSolution lasso_by_sign_enumeration(const Eigen::MatrixXd& Z, const Eigen::VectorXd& Y,
                                               double lambda) {
  const int d = static_cast<int>(Z.cols());
  std::int64_t patterns = 1;
  for (int j = 0; j < d; ++j) patterns *= 3;
  LassoSolution best;
  std::vector<int> sign(d);
  for (std::int64_t code = 0; code < patterns; ++code) {
    std::int64_t c = code;
    std::vector<int> active;
    for (int j = 0; j < d; ++j) {
      sign[j] = static_cast<int>(c % 3) - 1;
      c /= 3;
      if (sign[j] != 0) active.push_back(j);
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
    if (!active.empty()) {
      const int a = static_cast<int>(active.size());
      Eigen::MatrixXd ZA(Z.rows(), a);
      Eigen::VectorXd sA(a);
      for (int k = 0; k < a; ++k) {
        ZA.col(k) = Z.col(active[k]);
        sA[k] = sign[active[k]];
      }
      const Eigen::MatrixXd H = ZA.transpose() * ZA;
      const Eigen::VectorXd rhs = ZA.transpose() * Y - 0.5 * lambda * sA;
      Eigen::FullPivLU<Eigen::MatrixXd> lu(H);
      if (!lu.isInvertible()) continue;
      const Eigen::VectorXd thetaA = lu.solve(rhs);
      bool consistent = true;
      for (int k = 0; k < a; ++k) consistent = consistent && thetaA[k] * sA[k] > 0.0;
      if (!consistent) continue;
      for (int k = 0; k < a; ++k) theta[active[k]] = thetaA[k];
    }
    const double obj = (Y - Z * theta).squaredNorm() + lambda * theta.lpNorm<1>();
    if (obj < best.objective) {
      best.objective = obj;
      best.theta = theta;
    }
  }
  return best;
}

/// P(nu - zeta > -margin) for nu ~ Lap(2 xi), zeta ~ Lap(xi), by trapezoidal
/// integration of the convolution: integral over z of f_zeta(z) P(nu > z - margin).
inline double svt_inclusion_probability(double margin, double xi, int steps = 400000) {
  auto laplace_pdf = [](double x, double b) { return std::exp(-std::abs(x) / b) / (2.0 * b); };
  auto laplace_sf = [](double x, double b) {
    return x < 0.0 ? 1.0 - 0.5 * std::exp(x / b) : 0.5 * std::exp(-x / b);
  };
  const double lo = -60.0 * xi, hi = 60.0 * xi;
  const double h = (hi - lo) / steps;
  double total = 0.0;
  for (int i = 0; i <= steps; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
    total += w * laplace_pdf(z, xi) * laplace_sf(z - margin, 2.0 * xi);
  }
  return total * h;
}

/// Grid minimum of x'Mx / ||x_S||_1^2 over {||x_Sc||_1 <= 3 ||x_S||_1} for
/// d = 4, |S| = 2. Normalizes ||x_S||_1 = 1, fixes the sign of the first
/// support coordinate (the ratio is even) and grids the rest.
inline double compatibility_grid_d4(const Eigen::Matrix4d& M, int s_a, int s_b, int support_steps = 50,
                                    int off_steps = 100) {
  int off[2];
  int n = 0;
  for (int j = 0; j < 4; ++j)
    if (j != s_a && j != s_b) off[n++] = j;
  double best = std::numeric_limits<double>::infinity();
  Eigen::Vector4d x;
  for (int i = 0; i < support_steps; ++i) {
    const double a = double(i) / double(support_steps - 1);
    for (int sgn : {1, -1}) {
      x[s_a] = a;
      x[s_b] = sgn * (1.0 - a);
      for (int p = 0; p < off_steps; ++p) {
        const double u = -3.0 + 6.0 * p / double(off_steps - 1);
        for (int q = 0; q < off_steps; ++q) {
          const double v = -3.0 + 6.0 * q / double(off_steps - 1);
          if (std::abs(u) + std::abs(v) > 3.0 + 1e-12) continue;
          x[off[0]] = u;
          x[off[1]] = v;
          best = std::min(best, x.dot(M * x));
        }
      }
    }
  }
  return best;
}

}  // namespace oracle
