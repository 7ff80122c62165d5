#pragma once

// Differential-privacy primitives: budget splitting, Laplace noise, the
// noisy-threshold support selection, the Wishart matrix mechanism and
// advanced composition.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "ptlasso/error.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// ceil(log2(T)), floored at 1 so that horizon-dependent splits stay finite.
inline int ceil_log2(std::int64_t T) {
  if (T <= 2) return 1;
  return static_cast<int>(std::bit_width(static_cast<std::uint64_t>(T - 1)));
}

struct PrivacyBudget {
  double epsilon = 1.0;
  double delta = 1e-3;
  std::int64_t T = 2;
  int log_T = 1;  // ceil(log2 T)
  double eps1 = 0.0, delta1 = 0.0;  // SparseEstimation share
  double eps2 = 0.0, delta2 = 0.0;  // Gram-tree share

  bool is_private() const { return std::isfinite(epsilon); }
};

/// delta1 = delta2 = delta / (2 ceil(log T));
/// eps1 = eps2 = epsilon / (2 ceil(log T) ln(1/delta2)).
/// epsilon = +inf is accepted and means "no privacy".
inline PrivacyBudget split_budget(double epsilon, double delta, std::int64_t T) {
  if (!(epsilon > 0.0)) throw Error(ErrorCode::kInvalidBudget, "epsilon must be positive");
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorCode::kInvalidBudget, "delta must lie in (0, 1)");
  }
  if (T < 1) throw Error(ErrorCode::kInvalidBudget, "horizon must be >= 1");
  PrivacyBudget b;
  b.epsilon = epsilon;
  b.delta = delta;
  b.T = T;
  b.log_T = ceil_log2(T);
  b.delta1 = b.delta2 = delta / (2.0 * b.log_T);
  b.eps1 = b.eps2 = epsilon / (2.0 * b.log_T * std::log(1.0 / b.delta2));
  return b;
}

/// Sample from the Laplace density exp(-|x|/scale) / (2 scale).
inline double laplace(double scale, Rng& rng) {
  if (!(scale > 0.0)) throw Error(ErrorCode::kInvalidArgument, "Laplace scale must be positive");
  const double u = uniform_open(rng) - 0.5;
  return -scale * std::copysign(1.0, u) * std::log1p(-2.0 * std::abs(u));
}

// ---------------------------------------------------------------------------
// Noisy-threshold support selection
// ---------------------------------------------------------------------------

/// Constants of the support-estimation step known before any data arrives.
struct ModelConstants {
  int d = 0;
  int s0 = 0;
  double C_theta = 0.0;
  double C_r = 0.0;
  double C_x = 0.0;
  double phi = 0.0;
};

enum class SvtVariant {
  kPerQueryThreshold,  // threshold noise redrawn for every coordinate
  kClassical,          // threshold noise redrawn only after a selection
};

struct SvtConfig {
  double eps_prime = kInf;
  double xi = 0.0;  // Laplace scale of the threshold noise; values get 2 xi
  double gamma = 1.0;
  double gamma_raw = 1.0;
  bool gamma_clamped = false;
  double s_bar = 1.0;
  double s_under = 1.0;
  int cap = 1;
  SvtVariant variant = SvtVariant::kPerQueryThreshold;

  bool noisy() const { return xi > 0.0; }
};

inline double s_bar(const ModelConstants& c) {
  return 1.0 + 4.0 * c.C_r * c.C_x * std::sqrt(double(c.s0)) / (c.phi * c.phi);
}
inline double s_under(const ModelConstants& c) {
  return 1.0 + 4.0 * c.C_r * c.C_x / (c.phi * c.phi);
}

inline SvtConfig make_svt_config(const PrivacyBudget& budget, const ModelConstants& constants,
                                 double gamma_floor = 1.0,
                                 SvtVariant variant = SvtVariant::kPerQueryThreshold) {
  if (!(constants.phi > 0.0) || constants.s0 < 1 || constants.d < 2) {
    throw Error(ErrorCode::kInvalidArgument, "model constants need phi > 0, s0 >= 1, d >= 2");
  }
  SvtConfig cfg;
  cfg.variant = variant;
  cfg.s_bar = s_bar(constants);
  cfg.s_under = s_under(constants);
  const double log_inv_delta1 = std::log(1.0 / budget.delta1);
  cfg.eps_prime = budget.eps1 / std::sqrt(8.0 * cfg.s_bar * log_inv_delta1);
  cfg.xi = std::isfinite(cfg.eps_prime) ? std::sqrt(32.0 * log_inv_delta1) / cfg.eps_prime : 0.0;

  // xi * log((1 - delta) / epsilon) -> 0 as epsilon -> inf.
  const double noise_term =
      cfg.xi > 0.0 ? cfg.xi * std::log((1.0 - budget.delta) / budget.epsilon) : 0.0;
  const double scale =
      std::sqrt(std::log(double(constants.d)) * std::log(double(std::max<std::int64_t>(budget.T, 2))));
  cfg.gamma_raw = ((noise_term - constants.C_theta) / scale - 1.0) / std::sqrt(cfg.s_bar);
  cfg.gamma_clamped = !(cfg.gamma_raw >= gamma_floor);
  cfg.gamma = cfg.gamma_clamped ? gamma_floor : cfg.gamma_raw;
  cfg.cap = static_cast<int>(std::ceil(constants.s0 + std::sqrt(cfg.s_bar)));
  return cfg;
}

struct SvtResult {
  std::vector<int> selected;  // ascending
  bool cap_hit = false;
  std::size_t examined = 0;
};

/// Scans `values` (index, value) in ascending index order and keeps index i
/// when value_i + Lap(2 xi) > threshold + Lap(xi); stops once `cap` indices
/// are kept.
inline SvtResult svt_select(std::vector<std::pair<int, double>> values, double base_threshold,
                            const SvtConfig& config, Rng& rng) {
  std::sort(values.begin(), values.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  SvtResult out;
  const bool noisy = config.noisy();
  double zeta = 0.0;
  if (noisy && config.variant == SvtVariant::kClassical) zeta = laplace(config.xi, rng);
  for (const auto& [index, value] : values) {
    if (noisy && config.variant == SvtVariant::kPerQueryThreshold) zeta = laplace(config.xi, rng);
    const double nu = noisy ? laplace(2.0 * config.xi, rng) : 0.0;
    ++out.examined;
    if (value + nu > base_threshold + zeta) {
      out.selected.push_back(index);
      if (noisy && config.variant == SvtVariant::kClassical) zeta = laplace(config.xi, rng);
    }
    if (static_cast<int>(out.selected.size()) >= config.cap) {
      out.cap_hit = true;
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wishart mechanism
// ---------------------------------------------------------------------------

struct WishartParams {
  int dim = 2;
  double scale = 1.0;  // per-sample covariance is scale * I
  std::int64_t k = 2;  // degrees of freedom
  double eps_node = kInf;
  double delta_node = 0.0;
};

/// Per-node budget (eps2 / sqrt(8 log T ln(2/delta2)), delta2 / (2 log T)) and
/// k = ceil(d eps_node^-2 ln(8d/delta_node) ln(2/delta_node)), at least dim.
inline WishartParams make_wishart_params(const PrivacyBudget& budget, int d, double scale = 1.0,
                                         std::optional<std::int64_t> k_override = std::nullopt) {
  if (!budget.is_private()) {
    throw Error(ErrorCode::kInvalidBudget, "Wishart noise requires a finite epsilon");
  }
  if (!(scale >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "Wishart scale must be >= 0");
  WishartParams p;
  p.dim = d + 1;
  p.scale = scale;
  const double log_T = budget.log_T;
  p.eps_node = budget.eps2 / std::sqrt(8.0 * log_T * std::log(2.0 / budget.delta2));
  p.delta_node = budget.delta2 / (2.0 * log_T);
  if (k_override) {
    p.k = *k_override;
  } else {
    const double k = std::ceil(double(d) / (p.eps_node * p.eps_node) *
                               std::log(8.0 * d / p.delta_node) * std::log(2.0 / p.delta_node));
    p.k = k >= 4.6e18 ? std::int64_t{4'600'000'000'000'000'000} : static_cast<std::int64_t>(k);
  }
  p.k = std::max<std::int64_t>(p.k, p.dim);
  return p;
}

/// Degrees of freedom up to which the noise is summed sample by sample.
inline constexpr std::int64_t kWishartDirectLimit = 64;

/// Gram matrix of k iid N(0, scale I) vectors of length dim. Large k uses
/// the Bartlett decomposition. The result is exactly symmetric.
inline Eigen::MatrixXd wishart_noise(const WishartParams& params, Rng& rng) {
  const int p = params.dim;
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(p, p);
  if (params.scale == 0.0 || params.k <= 0) return W;
  std::normal_distribution<double> normal(0.0, 1.0);
  if (params.k <= kWishartDirectLimit || params.k < p) {
    const double sd = std::sqrt(params.scale);
    Eigen::VectorXd v(p);
    for (std::int64_t j = 0; j < params.k; ++j) {
      for (int i = 0; i < p; ++i) v[i] = sd * normal(rng);
      W.noalias() += v * v.transpose();
    }
  } else {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < p; ++i) {
      std::chi_squared_distribution<double> chi2(double(params.k - i));
      A(i, i) = std::sqrt(chi2(rng));
      for (int j = 0; j < i; ++j) A(i, j) = normal(rng);
    }
    W.noalias() = A.triangularView<Eigen::Lower>() * A.transpose();
    W *= params.scale;
  }
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) W(i, j) = W(j, i);
  return W;
}

// ---------------------------------------------------------------------------
// Accounting
// ---------------------------------------------------------------------------

struct PrivacyCost {
  double epsilon = 0.0;
  double delta = 0.0;
};

/// k-fold adaptive composition of (eps, delta) mechanisms is
/// (sqrt(2k ln(1/delta')) eps + k eps (e^eps - 1), k delta + delta').
inline PrivacyCost compose_advanced(double eps, double delta, std::int64_t k, double delta_prime) {
  if (k < 1 || !(eps >= 0.0) || !(delta >= 0.0) || !(delta_prime > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "composition needs k >= 1 and positive parameters");
  }
  const double kd = double(k);
  return {std::sqrt(2.0 * kd * std::log(1.0 / delta_prime)) * eps + kd * eps * std::expm1(eps),
          kd * delta + delta_prime};
}

/// Composed cost of one run: basic composition of the support-estimation
/// calls with the advanced composition of the released tree nodes that
/// contain any single round.
struct BudgetReport {
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t sparse_estimation_calls = 0;
  int max_released_nodes_per_round = 0;
  PrivacyCost sparse_estimation;
  PrivacyCost tree;
  PrivacyCost total;
  bool within_budget = true;
};

inline BudgetReport account_budget(const PrivacyBudget& budget,
                                   const std::optional<WishartParams>& wishart,
                                   std::int64_t sparse_estimation_calls,
                                   int max_released_nodes_per_round) {
  BudgetReport r;
  r.epsilon = budget.epsilon;
  r.delta = budget.delta;
  r.sparse_estimation_calls = sparse_estimation_calls;
  r.max_released_nodes_per_round = max_released_nodes_per_round;
  if (!budget.is_private()) {
    r.sparse_estimation = r.tree = r.total = {kInf, 0.0};
    r.within_budget = true;
    return r;
  }
  r.sparse_estimation = {double(sparse_estimation_calls) * budget.eps1,
                         double(sparse_estimation_calls) * budget.delta1};
  if (wishart && max_released_nodes_per_round > 0) {
    r.tree = compose_advanced(wishart->eps_node, wishart->delta_node, max_released_nodes_per_round,
                              budget.delta2 / 2.0);
  }
  r.total = {r.sparse_estimation.epsilon + r.tree.epsilon,
             r.sparse_estimation.delta + r.tree.delta};
  constexpr double kSlack = 1.0 + 1e-12;
  r.within_budget = r.total.epsilon <= budget.epsilon * kSlack &&
                    r.total.delta <= budget.delta * kSlack;
  return r;
}

}  // namespace ptlasso
