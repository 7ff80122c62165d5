#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "ptlasso/lasso.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {
namespace {

RegressionProblem random_problem(Rng& rng, int t, int d, double lambda) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RegressionProblem p;
  p.design.resize(t, d);
  for (int i = 0; i < t; ++i)
    for (int j = 0; j < d; ++j) p.design(i, j) = normal(rng);
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  theta[0] = 1.5;
  theta[d / 2] = -0.8;
  p.response = p.design * theta;
  for (int i = 0; i < t; ++i) p.response[i] += 0.3 * normal(rng);
  p.lambda = lambda;
  return p;
}

TEST(LassoFit, IdentityDesignWithoutPenaltyReturnsResponse) {
  RegressionProblem p;
  p.design = Eigen::MatrixXd::Identity(5, 5);
  p.response = Eigen::VectorXd::LinSpaced(5, -2.0, 2.0);
  const auto fit = lasso_fit(p);
  EXPECT_TRUE(fit.converged);
  EXPECT_LE((fit.theta - p.response).lpNorm<Eigen::Infinity>(), 1e-12);
}

TEST(LassoFit, IdentityDesignMatchesSoftThreshold) {
  RegressionProblem p;
  p.design = Eigen::MatrixXd::Identity(6, 6);
  p.response.resize(6);
  p.response << 3.0, -2.0, 0.4, -0.1, 1.0, 0.0;
  for (double lambda : {0.0, 0.5, 1.0, 2.5, 7.0}) {
    p.lambda = lambda;
    const auto fit = lasso_fit(p);
    for (int i = 0; i < 6; ++i) {
      const double y = p.response[i];
      const double expected = std::copysign(std::max(std::abs(y) - lambda / 2.0, 0.0), y);
      EXPECT_NEAR(fit.theta[i], expected, 1e-6) << "lambda " << lambda << " i " << i;
    }
  }
  p.lambda = 6.01;  // lambda/2 > max |y|
  EXPECT_EQ(lasso_fit(p).theta.norm(), 0.0);
}

TEST(LassoFit, MatchesSignEnumerationOracle) {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = random_problem(rng, 20, 8, 2.0 + trial % 5);
    const auto fit = lasso_fit(p);
    const auto ref = oracle::lasso_by_sign_enumeration(p.design, p.response, p.lambda);
    ASSERT_TRUE(fit.converged);
    EXPECT_LE(kkt_residual(p, fit.theta), 1e-6);
    EXPECT_NEAR(lasso_objective(p, fit.theta), ref.objective, 1e-4) << "trial " << trial;
  }
}

TEST(LassoFit, ProjectsOntoBall) {
  Rng rng(5);
  auto p = random_problem(rng, 30, 6, 0.1);
  p.radius = 0.5;
  const auto fit = lasso_fit(p);
  EXPECT_TRUE(fit.projected);
  EXPECT_NEAR(fit.theta.norm(), 0.5, 1e-12);
}

TEST(LassoFit, ObjectiveNonincreasingAcrossSweeps) {
  Rng rng(8);
  auto p = random_problem(rng, 40, 15, 3.0);
  LassoOptions options;
  options.record_objective = true;
  const auto fit = lasso_fit(p, options);
  ASSERT_GE(fit.objective_trace.size(), 2u);
  for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
    EXPECT_LE(fit.objective_trace[i], fit.objective_trace[i - 1] * (1 + 1e-12) + 1e-12);
  }
}

// The LASSO path can re-admit variables when the design is nearly square, so
// the property is checked on tall random designs.
TEST(LassoFit, SupportShrinksAsPenaltyGrows) {
  Rng rng(99);
  for (int trial = 0; trial < 10; ++trial) {
    auto p = random_problem(rng, 100, 20, 0.0);
    int previous = 21;
    for (int k = 0; k < 10; ++k) {
      p.lambda = 0.5 * std::pow(1.8, k);
      const auto fit = lasso_fit(p);
      ASSERT_TRUE(fit.converged);
      const int size = static_cast<int>((fit.theta.array() != 0.0).count());
      EXPECT_LE(size, previous) << "trial " << trial << " lambda " << p.lambda;
      previous = size;
    }
  }
}

TEST(LassoFit, WarmStartConvergesToSameSolution) {
  Rng rng(17);
  auto p = random_problem(rng, 30, 10, 1.0);
  const auto cold = lasso_fit(p);
  Eigen::VectorXd warm = cold.theta * 0.9;
  const auto hot = lasso_fit(p, {}, &warm);
  EXPECT_NEAR(lasso_objective(p, hot.theta), lasso_objective(p, cold.theta), 1e-8);
}

TEST(LassoFit, FlagsNonConvergence) {
  Rng rng(2);
  auto p = random_problem(rng, 20, 8, 1.0);
  LassoOptions options;
  options.max_iters = 3;
  const auto fit = lasso_fit(p, options);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.iterations, 3);
}

TEST(KktResidual, ZeroIterateUnderIdentity) {
  RegressionProblem p;
  p.design = Eigen::MatrixXd::Identity(3, 3);
  p.response = Eigen::Vector3d(1.0, -4.0, 2.0);
  EXPECT_DOUBLE_EQ(kkt_residual(p, Eigen::VectorXd::Zero(3)), 8.0);
}

TEST(KktResidual, PerturbationIncreasesResidual) {
  Rng rng(31);
  auto p = random_problem(rng, 20, 8, 2.0);
  const auto fit = lasso_fit(p);
  Eigen::Index active = 0;
  fit.theta.cwiseAbs().maxCoeff(&active);
  Eigen::VectorXd bumped = fit.theta;
  bumped[active] += 0.1;
  EXPECT_GT(kkt_residual(p, bumped), kkt_residual(p, fit.theta));
}

TEST(RestrictedL2Fit, IdentityGram) {
  RestrictedGram g;
  g.support = {1, 4};
  g.d = 6;
  g.V = Eigen::MatrixXd::Identity(2, 2);
  g.u = Eigen::Vector2d(1.0, 0.0);
  const auto theta = restricted_l2_fit(g, 10.0, 1e-8);
  EXPECT_NEAR(theta[1], 1.0, 1e-7);
  EXPECT_NEAR(theta[4], 0.0, 1e-12);
  for (int i : {0, 2, 3, 5}) EXPECT_EQ(theta[i], 0.0);
}

TEST(RestrictedL2Fit, ZeroMomentsGiveZero) {
  RestrictedGram g;
  g.support = {0, 2};
  g.d = 3;
  g.V = Eigen::MatrixXd::Identity(2, 2);
  g.u = Eigen::Vector2d::Zero();
  EXPECT_EQ(restricted_l2_fit(g, 1.0).norm(), 0.0);
}

TEST(RestrictedL2Fit, MatchesDenseSolve) {
  Rng rng(55);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Matrix3d A;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) A(i, j) = normal(rng);
    RestrictedGram g;
    g.support = {0, 3, 5};
    g.d = 7;
    g.V = A * A.transpose() + Eigen::Matrix3d::Identity();
    g.u = Eigen::Vector3d(normal(rng), normal(rng), normal(rng));
    const double rho = 1e-3;
    // Cramer-free reference: explicit inverse of the shifted 3x3 system.
    const Eigen::Matrix3d shifted = g.V + rho * Eigen::Matrix3d::Identity();
    const Eigen::Vector3d expected = shifted.inverse() * g.u;
    const auto theta = restricted_l2_fit(g, 1e6, rho);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(theta[g.support[k]], expected[k], 1e-10);
  }
}

TEST(RestrictedL2Fit, RescalesOntoBall) {
  RestrictedGram g;
  g.support = {0};
  g.d = 2;
  g.V = Eigen::MatrixXd::Identity(1, 1);
  g.u = Eigen::VectorXd::Constant(1, 5.0);
  EXPECT_NEAR(restricted_l2_fit(g, 2.0).norm(), 2.0, 1e-12);
}

TEST(RestrictedL2Fit, Errors) {
  RestrictedGram g;
  g.d = 2;
  EXPECT_THROW(restricted_l2_fit(g, 1.0), Error);
  g.support = {0};
  g.V = Eigen::MatrixXd::Identity(1, 1);
  g.u = Eigen::VectorXd::Ones(1);
  EXPECT_THROW(restricted_l2_fit(g, 1.0, 0.0), Error);
}

}  // namespace
}  // namespace ptlasso
