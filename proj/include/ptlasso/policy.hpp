#pragma once

// Episodic thresholded-LASSO policy with private support selection and
// tree-aggregated restricted l2 regression, plus the comparison baselines.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ptlasso/environment.hpp"
#include "ptlasso/error.hpp"
#include "ptlasso/gram_tree.hpp"
#include "ptlasso/lasso.hpp"
#include "ptlasso/privacy.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

/// Support updates happen at t = 1, 2, 4, ..., 2^floor(log2 T).
struct EpisodeSchedule {
  std::int64_t horizon = 1;
  std::vector<std::int64_t> updates;

  explicit EpisodeSchedule(std::int64_t T) : horizon(T) {
    for (std::int64_t t = 1; t <= T; t *= 2) updates.push_back(t);
  }
  static bool is_update(std::int64_t t) { return t >= 1 && (t & (t - 1)) == 0; }
};

/// Episode index l with t in [2^l, 2^(l+1) - 1].
inline int episode_of(std::int64_t t) {
  return t < 1 ? 0 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(t))) - 1;
}

/// lambda0 sqrt(2 ln t ln d / t); at t = 1 the ln t factor is dropped.
inline double lambda_schedule(double lambda0, std::int64_t t, int d) {
  const double log_d = std::log(double(d));
  if (t <= 1) return lambda0 * std::sqrt(2.0 * log_d);
  return lambda0 * std::sqrt(2.0 * std::log(double(t)) * log_d / double(t));
}

struct SupportEstimate {
  std::int64_t t = 0;
  int episode = 0;
  double lambda = 0.0;
  double base_threshold = 0.0;
  std::vector<int> s0_candidates;
  std::vector<double> candidate_values;  // |theta_hat_i| for i in S0, same order
  std::vector<int> s1_selected;
  bool cap_hit = false;
  bool lasso_converged = true;
};

/// LASSO fit, S0 = {|theta_i| > 4 lambda}, then noisy-threshold selection over
/// S0 against 4 lambda Gamma sqrt(s_bar).
inline SupportEstimate sparse_estimation(const RegressionProblem& history, const SvtConfig& svt,
                                         Rng& rng, const LassoOptions& lasso_options = {},
                                         Eigen::VectorXd* warm_start = nullptr) {
  SupportEstimate est;
  est.lambda = history.lambda;
  est.base_threshold = 4.0 * history.lambda * svt.gamma * std::sqrt(svt.s_bar);
  if (history.design.rows() == 0) return est;

  const LassoResult fit = lasso_fit(history, lasso_options, warm_start);
  if (warm_start != nullptr) *warm_start = fit.theta;
  est.lasso_converged = fit.converged;

  std::vector<std::pair<int, double>> values;
  const double cut = 4.0 * history.lambda;
  for (Eigen::Index i = 0; i < fit.theta.size(); ++i) {
    const double magnitude = std::abs(fit.theta[i]);
    if (magnitude > cut) {
      est.s0_candidates.push_back(static_cast<int>(i));
      est.candidate_values.push_back(magnitude);
      values.emplace_back(static_cast<int>(i), magnitude);
    }
  }
  SvtResult selected = svt_select(std::move(values), est.base_threshold, svt, rng);
  est.s1_selected = std::move(selected.selected);
  est.cap_hit = selected.cap_hit;
  return est;
}

enum class PolicyKind {
  kPrivateThresholdLasso,
  kNonPrivateThresholdLasso,
  kRandom,
  kOracleSupport,
};

inline std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::kPrivateThresholdLasso: return "private-threshold-lasso";
    case PolicyKind::kNonPrivateThresholdLasso: return "nonprivate-threshold-lasso";
    case PolicyKind::kRandom: return "random";
    case PolicyKind::kOracleSupport: return "oracle-support";
  }
  return "unknown";
}

inline PolicyKind parse_policy_kind(std::string_view name) {
  for (auto kind : {PolicyKind::kPrivateThresholdLasso, PolicyKind::kNonPrivateThresholdLasso,
                    PolicyKind::kRandom, PolicyKind::kOracleSupport}) {
    if (name == to_string(kind)) return kind;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown policy '" + std::string(name) + "'");
}

struct PolicyConfig {
  PolicyKind kind = PolicyKind::kPrivateThresholdLasso;
  double lambda0 = 0.003;
  double epsilon = 2.0;  // +inf disables every noise source
  double delta = 1e-3;
  double gamma_floor = 1.0;
  double wishart_scale = 1.0;
  std::optional<std::int64_t> wishart_k;
  SvtVariant svt_variant = SvtVariant::kPerQueryThreshold;
  LassoOptions lasso;
  Retention retention = Retention::kFrontier;
};

inline ModelConstants model_constants(const BanditInstance& inst) {
  return {inst.d, inst.s0, inst.C_theta, inst.C_r(), inst.C_x, inst.phi};
}

class ThresholdLassoPolicy {
 public:
  ThresholdLassoPolicy(const PolicyConfig& config, const BanditInstance& instance, std::int64_t T,
                       std::uint64_t seed)
      : config_(config),
        d_(instance.d),
        C_theta_(instance.C_theta),
        horizon_(T),
        oracle_support_(instance.support),
        budget_(split_budget(
            config.kind == PolicyKind::kPrivateThresholdLasso ? config.epsilon : kInf,
            config.delta, T)),
        svt_(make_svt_config(budget_, model_constants(instance), config.gamma_floor,
                             config.svt_variant)),
        wishart_(budget_.is_private()
                     ? std::optional(make_wishart_params(budget_, instance.d, config.wishart_scale,
                                                         config.wishart_k))
                     : std::nullopt),
        tree_(T, instance.d + 1, wishart_, derive_seed(seed, 0, Stream::kMechanism),
              config.retention),
        mechanism_rng_(derive_seed(seed, 1, Stream::kMechanism)),
        policy_rng_(derive_seed(seed, 0, Stream::kPolicy)),
        design_(T, instance.d),
        response_(T),
        theta_hat_(Eigen::VectorXd::Zero(instance.d)),
        lasso_warm_(Eigen::VectorXd::Zero(instance.d)) {
    if (T < 1) throw Error(ErrorCode::kInvalidArgument, "horizon must be >= 1");
    if (config.lambda0 < 0.0) throw Error(ErrorCode::kInvalidArgument, "lambda0 must be >= 0");
  }

  /// Support update (at t in L), private estimate from rounds < t, then the
  /// greedy arm with ties to the lowest index.
  int choose(const ContextSet& contexts) {
    if (t_ >= horizon_) throw Error(ErrorCode::kHorizonExceeded, "policy horizon exhausted");
    const std::int64_t t = t_ + 1;
    if (config_.kind == PolicyKind::kRandom) {
      std::uniform_int_distribution<int> arm(0, contexts.arms() - 1);
      return arm(policy_rng_);
    }
    if (EpisodeSchedule::is_update(t)) update_support(t);

    theta_hat_.setZero();
    if (t > 1 && !support_.empty()) {
      const Eigen::MatrixXd gram = tree_.query_prefix(t - 1);
      theta_hat_ = restricted_l2_fit(extract_regression(gram, support_, t - 1), C_theta_);
    }
    if (t == horizon_ && t > 1 && wishart_) sigma_b_ = off_diagonal_sd(tree_.query_noise(t - 1));
    return argmax_lowest(contexts.vectors * theta_hat_);
  }

  template <typename Derived>
  void observe(const Eigen::MatrixBase<Derived>& x, double r) {
    design_.row(t_) = x.transpose();
    response_[t_] = r;
    if (config_.kind != PolicyKind::kRandom) tree_.insert(x, r);
    ++t_;
  }

  std::int64_t rounds_played() const { return t_; }
  std::int64_t horizon() const { return horizon_; }
  const PolicyConfig& config() const { return config_; }
  const PrivacyBudget& budget() const { return budget_; }
  const SvtConfig& svt() const { return svt_; }
  const std::optional<WishartParams>& wishart() const { return wishart_; }
  const NoisyGramTree& tree() const { return tree_; }
  const std::vector<int>& support() const { return support_; }
  const Eigen::VectorXd& theta_hat() const { return theta_hat_; }
  double lambda() const { return lambda_; }
  double sigma_b() const { return sigma_b_; }
  const std::vector<SupportEstimate>& episodes() const { return episodes_; }

  BudgetReport budget_report() const {
    return account_budget(budget_, wishart_, sparse_estimation_calls_,
                          tree_.max_released_nodes_per_round());
  }

 private:
  void update_support(std::int64_t t) {
    lambda_ = lambda_schedule(config_.lambda0, t, d_);
    SupportEstimate est;
    if (config_.kind == PolicyKind::kOracleSupport) {
      est.lambda = lambda_;
      est.s0_candidates = est.s1_selected = oracle_support_;
    } else {
      RegressionProblem history{design_.topRows(t - 1), response_.head(t - 1), lambda_, C_theta_};
      est = sparse_estimation(history, svt_, mechanism_rng_, config_.lasso, &lasso_warm_);
      if (t > 1) ++sparse_estimation_calls_;
    }
    est.t = t;
    est.episode = episode_of(t);
    support_ = est.s1_selected;
    episodes_.push_back(std::move(est));
  }

  static double off_diagonal_sd(const Eigen::MatrixXd& m) {
    double sum = 0.0, sq = 0.0;
    std::int64_t n = 0;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = i + 1; j < m.cols(); ++j) {
        sum += m(i, j);
        sq += m(i, j) * m(i, j);
        ++n;
      }
    if (n < 2) return 0.0;
    const double mean = sum / double(n);
    return std::sqrt(std::max(0.0, (sq - n * mean * mean) / double(n - 1)));
  }

  PolicyConfig config_;
  int d_;
  double C_theta_;
  std::int64_t horizon_;
  std::vector<int> oracle_support_;
  PrivacyBudget budget_;
  SvtConfig svt_;
  std::optional<WishartParams> wishart_;
  NoisyGramTree tree_;
  Rng mechanism_rng_;
  Rng policy_rng_;
  Eigen::MatrixXd design_;
  Eigen::VectorXd response_;
  Eigen::VectorXd theta_hat_;
  Eigen::VectorXd lasso_warm_;
  std::vector<int> support_;
  std::vector<SupportEstimate> episodes_;
  double lambda_ = 0.0;
  double sigma_b_ = 0.0;
  std::int64_t t_ = 0;
  std::int64_t sparse_estimation_calls_ = 0;
};

struct RoundRecord {
  std::int64_t t = 0;
  int arm = 0;
  double reward = 0.0;
  double inst_regret = 0.0;
  double cum_regret = 0.0;
  int episode = 0;
  int support_size = 0;
};

struct Trajectory {
  PolicyKind kind = PolicyKind::kPrivateThresholdLasso;
  double epsilon = kInf;
  std::vector<RoundRecord> rounds;
  std::vector<SupportEstimate> episodes;
  std::vector<std::int64_t> episode_marks;
  BudgetReport budget;
  SvtConfig svt;
  double sigma_b = 0.0;
  std::int64_t noise_matrices = 0;

  double total_regret() const { return rounds.empty() ? 0.0 : rounds.back().cum_regret; }
};

using RoundObserver = std::function<void(const ThresholdLassoPolicy&, const RoundRecord&)>;

/// Plays T rounds. Contexts and rewards come from the environment stream of
/// `seed`, so runs sharing a seed see identical contexts and reward noise.
inline Trajectory run(const PolicyConfig& config, const BanditInstance& instance, std::int64_t T,
                      std::uint64_t seed, const RoundObserver& observer = {}) {
  ThresholdLassoPolicy policy(config, instance, T, seed);
  Rng env_rng(derive_seed(seed, 0, Stream::kEnvironment));
  RegretLedger ledger;
  Trajectory traj;
  traj.kind = config.kind;
  traj.epsilon = policy.budget().epsilon;
  traj.rounds.reserve(static_cast<std::size_t>(T));
  for (std::int64_t t = 1; t <= T; ++t) {
    const ContextSet contexts = sample_contexts(instance, env_rng, t);
    const int arm = policy.choose(contexts);
    const auto x = contexts.vectors.row(arm).transpose();
    const double r = reward(instance, x, env_rng);
    const double regret = instant_regret(instance, contexts, arm);
    policy.observe(x, r);
    if (EpisodeSchedule::is_update(t)) ledger.mark_episode(t);
    ledger.record(t, arm, regret);
    RoundRecord rec{t, arm, r, regret, ledger.cumulative(), episode_of(t),
                    static_cast<int>(policy.support().size())};
    if (observer) observer(policy, rec);
    traj.rounds.push_back(rec);
  }
  traj.episodes = policy.episodes();
  traj.episode_marks = ledger.episode_marks();
  traj.budget = policy.budget_report();
  traj.svt = policy.svt();
  traj.sigma_b = policy.sigma_b();
  traj.noise_matrices = policy.tree().noise_matrices_sampled();
  return traj;
}

/// Baseline policies share the run loop; the non-private threshold LASSO is
/// the private policy with every noise source switched off.
inline Trajectory baseline_run(PolicyKind kind, PolicyConfig config, const BanditInstance& instance,
                               std::int64_t T, std::uint64_t seed) {
  config.kind = kind;
  config.epsilon = kInf;
  return run(config, instance, T, seed);
}

}  // namespace ptlasso
