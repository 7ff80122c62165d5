#pragma once

// Synthetic sparse linear contextual bandit: instances, context streams,
// rewards and regret bookkeeping.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "ptlasso/error.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

enum class ContextDistribution { kTruncatedGaussian, kUniformSphere };

inline std::string_view to_string(ContextDistribution dist) {
  return dist == ContextDistribution::kUniformSphere ? "uniform-sphere"
                                                     : "truncated-gaussian";
}

inline ContextDistribution parse_context_distribution(std::string_view name) {
  if (name == "uniform-sphere") return ContextDistribution::kUniformSphere;
  if (name == "truncated-gaussian") return ContextDistribution::kTruncatedGaussian;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown context distribution '" + std::string(name) + "'");
}

/// Truncation point of the Gaussian generator, in coordinate standard deviations.
inline constexpr double kGaussianTruncation = 3.0;

struct InstanceSpec {
  int d = 100;
  int s0 = 5;
  int K = 2;
  double theta_min = 0.5;
  double C_theta = 2.0;
  double sigma = 0.1;
  /// Bound on the l2 norm of any context sub-vector of size bounded_subset_size().
  double C_x = 1.0;
  ContextDistribution context_dist = ContextDistribution::kTruncatedGaussian;
  /// Compatibility constant phi of the context Gram matrix; <= 0 selects the
  /// generator's isotropic value sqrt(second_moment / s0).
  double phi = 0.0;
  std::uint64_t seed = 0;
};

struct BanditInstance {
  int d = 0;
  int s0 = 0;
  int K = 0;
  Eigen::VectorXd theta;
  std::vector<int> support;  // sorted
  double theta_min = 0.0;
  double C_theta = 0.0;
  double C_x = 1.0;
  double sigma = 0.0;
  double phi = 0.0;
  ContextDistribution context_dist = ContextDistribution::kTruncatedGaussian;
  std::uint64_t seed = 0;

  /// Reward bound: |<x, theta>| <= C_x * C_theta plus bounded noise.
  double C_r() const { return C_x * C_theta + std::sqrt(3.0) * sigma; }

  /// Size of the coordinate subsets whose restriction must stay within C_x:
  /// s0 + ceil(4 C_r C_x sqrt(s0) / phi^2), capped at d.
  int bounded_subset_size() const {
    const double extra = std::ceil(4.0 * C_r() * C_x * std::sqrt(double(s0)) / (phi * phi));
    if (!std::isfinite(extra) || extra >= double(d)) return d;
    return std::min(d, s0 + static_cast<int>(extra));
  }

  bool in_support(int i) const {
    return std::binary_search(support.begin(), support.end(), i);
  }
};

/// Per-coordinate second moment E[x_j^2] of the (unrescaled) generator.
inline double coordinate_second_moment(ContextDistribution dist, int d, double C_x) {
  const double tau2 = C_x * C_x / double(d);
  if (dist == ContextDistribution::kUniformSphere) return tau2;
  // Variance of N(0, tau^2) truncated to [-a tau, a tau].
  const double a = kGaussianTruncation;
  const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
  const double mass = std::erf(a / std::sqrt(2.0));
  return tau2 * (1.0 - 2.0 * a * pdf / mass);
}

inline BanditInstance generate_instance(const InstanceSpec& spec) {
  if (spec.d < 2 || spec.s0 < 1 || spec.s0 >= spec.d || spec.K < 1) {
    throw Error(ErrorCode::kInvalidDimensions,
                "need d >= 2, 1 <= s0 < d and K >= 1 (d=" + std::to_string(spec.d) +
                    ", s0=" + std::to_string(spec.s0) + ", K=" + std::to_string(spec.K) + ")");
  }
  if (!(spec.theta_min > 0.0) ||
      spec.theta_min * std::sqrt(double(spec.s0)) > spec.C_theta * (1.0 + 1e-12)) {
    throw Error(ErrorCode::kInvalidDimensions, "theta_min * sqrt(s0) must not exceed C_theta");
  }
  if (!(spec.C_x > 0.0) || spec.sigma < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "C_x must be positive and sigma nonnegative");
  }

  Rng rng(derive_seed(spec.seed, 0, Stream::kInstance));
  BanditInstance inst;
  inst.d = spec.d;
  inst.s0 = spec.s0;
  inst.K = spec.K;
  inst.theta_min = spec.theta_min;
  inst.C_theta = spec.C_theta;
  inst.C_x = spec.C_x;
  inst.sigma = spec.sigma;
  inst.context_dist = spec.context_dist;
  inst.seed = spec.seed;
  inst.phi = spec.phi > 0.0
                 ? spec.phi
                 : std::sqrt(coordinate_second_moment(spec.context_dist, spec.d, spec.C_x) /
                             double(spec.s0));

  std::vector<int> all(spec.d);
  std::iota(all.begin(), all.end(), 0);
  inst.support.reserve(spec.s0);
  std::sample(all.begin(), all.end(), std::back_inserter(inst.support), spec.s0, rng);
  std::sort(inst.support.begin(), inst.support.end());

  // Magnitudes theta_min + c * excess_i; one coordinate keeps zero excess so
  // the minimum magnitude is exactly theta_min.
  std::uniform_real_distribution<double> excess_dist(0.0, spec.theta_min);
  std::bernoulli_distribution coin(0.5);
  Eigen::VectorXd excess(spec.s0);
  for (int i = 0; i < spec.s0; ++i) excess[i] = excess_dist(rng);
  std::uniform_int_distribution<int> pick(0, spec.s0 - 1);
  excess[pick(rng)] = 0.0;

  const double a = excess.squaredNorm();
  const double b = 2.0 * spec.theta_min * excess.sum();
  const double c0 = spec.s0 * spec.theta_min * spec.theta_min - spec.C_theta * spec.C_theta;
  double scale = 1.0;
  if (c0 >= 0.0 || a == 0.0) {
    scale = 0.0;
  } else {
    const double full = spec.s0 * spec.theta_min * spec.theta_min + b + a;
    if (full > spec.C_theta * spec.C_theta) {
      scale = (-b + std::sqrt(b * b - 4.0 * a * c0)) / (2.0 * a);
      scale = std::clamp(scale, 0.0, 1.0);
    }
  }

  inst.theta = Eigen::VectorXd::Zero(spec.d);
  for (int i = 0; i < spec.s0; ++i) {
    const double magnitude = spec.theta_min + scale * excess[i];
    inst.theta[inst.support[i]] = coin(rng) ? magnitude : -magnitude;
  }
  return inst;
}

/// The K context vectors of one round, one row per arm.
struct ContextSet {
  Eigen::MatrixXd vectors;
  std::int64_t round = 0;

  int arms() const { return static_cast<int>(vectors.rows()); }
};

namespace detail {

/// l2 norm of the `m` largest-magnitude coordinates.
inline double top_norm(const Eigen::VectorXd& x, int m) {
  std::vector<double> sq(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) sq[j] = x[j] * x[j];
  if (m < static_cast<int>(sq.size())) {
    std::nth_element(sq.begin(), sq.begin() + m, sq.end(), std::greater<>());
    sq.resize(m);
  }
  return std::sqrt(std::accumulate(sq.begin(), sq.end(), 0.0));
}

/// Shrinks `x` until the top-m norm is at most `bound` (guards against
/// one-ulp overshoot after the multiplicative rescale).
inline void enforce_subset_bound(Eigen::VectorXd& x, int m, double bound) {
  double norm = top_norm(x, m);
  if (norm <= bound) return;
  x *= bound / norm;
  while ((norm = top_norm(x, m)) > bound) x *= std::nextafter(1.0, 0.0);
}

}  // namespace detail

inline ContextSet sample_contexts(const BanditInstance& inst, Rng& rng, std::int64_t round = 0) {
  ContextSet set;
  set.round = round;
  set.vectors.resize(inst.K, inst.d);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int m = inst.bounded_subset_size();
  Eigen::VectorXd x(inst.d);
  for (int k = 0; k < inst.K; ++k) {
    if (inst.context_dist == ContextDistribution::kUniformSphere) {
      double norm = 0.0;
      do {
        for (int j = 0; j < inst.d; ++j) x[j] = normal(rng);
        norm = x.norm();
      } while (norm == 0.0);
      x *= inst.C_x / norm;
      detail::enforce_subset_bound(x, inst.d, inst.C_x);
    } else {
      const double tau = inst.C_x / std::sqrt(double(inst.d));
      for (int j = 0; j < inst.d; ++j) {
        double z = 0.0;
        do {
          z = normal(rng);
        } while (std::abs(z) > kGaussianTruncation);
        x[j] = tau * z;
      }
      detail::enforce_subset_bound(x, m, inst.C_x);
    }
    set.vectors.row(k) = x.transpose();
  }
  return set;
}

/// <x, theta> plus uniform noise on [-sqrt(3) sigma, sqrt(3) sigma].
template <typename Derived>
double reward(const BanditInstance& inst, const Eigen::MatrixBase<Derived>& x, Rng& rng) {
  double r = x.dot(inst.theta);
  if (inst.sigma > 0.0) {
    const double half_width = std::sqrt(3.0) * inst.sigma;
    std::uniform_real_distribution<double> noise(-half_width, half_width);
    r += noise(rng);
  }
  return r;
}

/// max_k <x_k, theta> - <x_chosen, theta>.
inline double instant_regret(const BanditInstance& inst, const ContextSet& contexts,
                             int chosen_arm) {
  if (chosen_arm < 0 || chosen_arm >= contexts.arms()) {
    throw Error(ErrorCode::kOutOfRange, "chosen arm outside [0, K)");
  }
  const Eigen::VectorXd means = contexts.vectors * inst.theta;
  return means.maxCoeff() - means[chosen_arm];
}

/// Index of the first maximal score (ties resolve to the lowest index).
inline int argmax_lowest(const Eigen::VectorXd& scores) {
  int best = 0;
  for (Eigen::Index k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = static_cast<int>(k);
  }
  return best;
}

class RegretLedger {
 public:
  struct Entry {
    std::int64_t t;
    int arm;
    double instant;
    double cumulative;
  };

  void record(std::int64_t t, int arm, double instant) {
    cumulative_ += instant;
    entries_.push_back({t, arm, instant, cumulative_});
  }
  void mark_episode(std::int64_t t) { episode_marks_.push_back(t); }

  double cumulative() const { return cumulative_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::vector<std::int64_t>& episode_marks() const { return episode_marks_; }

 private:
  double cumulative_ = 0.0;
  std::vector<Entry> entries_;
  std::vector<std::int64_t> episode_marks_;
};

// ---------------------------------------------------------------------------
// Compatibility constant
// ---------------------------------------------------------------------------

struct CompatibilityBounds {
  double lower = 0.0;  // certified by the Frank-Wolfe duality gap
  double upper = 0.0;  // objective at the best feasible iterate
};

namespace detail {

/// Euclidean projection of v onto {w >= 0, sum w = radius}.
inline Eigen::VectorXd project_simplex(const Eigen::VectorXd& v, double radius) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double shift = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumsum += u[i];
    const double candidate = (cumsum - radius) / double(i + 1);
    if (u[i] - candidate > 0.0) shift = candidate;
  }
  return (v.array() - shift).max(0.0).matrix();
}

/// Euclidean projection onto the l1 ball of the given radius.
inline Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
  if (v.size() == 0 || v.lpNorm<1>() <= radius) return v;
  const Eigen::VectorXd w = project_simplex(v.cwiseAbs(), radius);
  return w.cwiseProduct(v.cwiseSign());
}

}  // namespace detail

/// Bounds on phi^2(M, S) = min x'Mx / ||x_S||_1^2 over the cone
/// ||x_{S^c}||_1 <= 3 ||x_S||_1. Each sign pattern of x_S gives a convex QP
/// over (simplex face) x (l1 ball); all 2^(|S|-1) patterns are solved by
/// projected gradient, so the result is exact up to the reported gap.
inline CompatibilityBounds compatibility_bounds(const Eigen::MatrixXd& M,
                                                const std::vector<int>& support,
                                                int max_iters = 20000, double gap_tol = 1e-10) {
  const int d = static_cast<int>(M.rows());
  if (support.empty()) throw Error(ErrorCode::kDegenerateSupport, "support set is empty");
  if (M.cols() != d) throw Error(ErrorCode::kInvalidArgument, "matrix must be square");
  std::vector<int> in_s(d, 0);
  for (int i : support) {
    if (i < 0 || i >= d) throw Error(ErrorCode::kOutOfRange, "support index out of range");
    in_s[i] = 1;
  }
  std::vector<int> S, Sc;
  for (int i = 0; i < d; ++i) (in_s[i] ? S : Sc).push_back(i);
  const int s = static_cast<int>(S.size());
  const int sc = static_cast<int>(Sc.size());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  const double lmax = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  if (lmax == 0.0) return {0.0, 0.0};
  const double step = 1.0 / (2.0 * lmax);
  const double cone = 3.0;

  CompatibilityBounds best{std::numeric_limits<double>::infinity(),
                           std::numeric_limits<double>::infinity()};
  const std::uint64_t patterns = std::uint64_t{1} << (s - 1);
  Eigen::VectorXd x(d), grad(d), sign_s(s), ys(s), yc(sc);
  for (std::uint64_t p = 0; p < patterns; ++p) {
    for (int i = 0; i < s; ++i) sign_s[i] = (i > 0 && ((p >> (i - 1)) & 1U)) ? -1.0 : 1.0;
    // Start at the barycenter of the face with x_{S^c} = 0.
    x.setZero();
    for (int i = 0; i < s; ++i) x[S[i]] = sign_s[i] / double(s);
    double f = x.dot(M * x);
    double lower = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < max_iters; ++it) {
      grad = 2.0 * (M * x);
      // Frank-Wolfe lower bound at the current iterate.
      double lin_s = std::numeric_limits<double>::infinity();
      for (int i = 0; i < s; ++i) lin_s = std::min(lin_s, sign_s[i] * grad[S[i]]);
      double max_c = 0.0;
      for (int j = 0; j < sc; ++j) max_c = std::max(max_c, std::abs(grad[Sc[j]]));
      const double gap = grad.dot(x) - lin_s + cone * max_c;
      lower = std::max(lower, f - gap);
      if (gap <= gap_tol * std::max(1.0, std::abs(f))) break;

      for (int i = 0; i < s; ++i) ys[i] = sign_s[i] * (x[S[i]] - step * grad[S[i]]);
      ys = detail::project_simplex(ys, 1.0);
      for (int j = 0; j < sc; ++j) yc[j] = x[Sc[j]] - step * grad[Sc[j]];
      yc = detail::project_l1_ball(yc, cone);
      for (int i = 0; i < s; ++i) x[S[i]] = sign_s[i] * ys[i];
      for (int j = 0; j < sc; ++j) x[Sc[j]] = yc[j];
      f = x.dot(M * x);
    }
    best.lower = std::min(best.lower, lower);
    best.upper = std::min(best.upper, f);
  }
  best.lower = std::max(0.0, best.lower);
  return best;
}

/// Certified lower estimate of phi^2(M, S).
inline double compatibility_constant(const Eigen::MatrixXd& M, const std::vector<int>& support) {
  return compatibility_bounds(M, support).lower;
}

}  // namespace ptlasso
