#pragma once

// Replicated experiments: epsilon sweeps with optional baselines, support and
// accuracy diagnostics, and CSV output.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "ptlasso/config.hpp"
#include "ptlasso/environment.hpp"
#include "ptlasso/error.hpp"
#include "ptlasso/policy.hpp"
#include "ptlasso/privacy.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

// ---------------------------------------------------------------------------
// Accuracy of the support selection

struct AccuracyReport {
  double alpha = 0.0;
  double alpha_hat = 0.0;       // largest distance of a misclassified value to the threshold
  double violation_rate = 0.0;  // fraction of snapshots with a misclassification beyond alpha
  std::size_t snapshots = 0;
};

/// Distance by which the selection in `est` contradicts exact thresholding:
/// selected values below the threshold and rejected values above it.
inline double misclassification_margin(const SupportEstimate& est) {
  if (est.candidate_values.size() != est.s0_candidates.size()) {
    throw Error(ErrorCode::kInvalidArgument, "snapshot lacks candidate values");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < est.s0_candidates.size(); ++k) {
    const int index = est.s0_candidates[k];
    const double value = est.candidate_values[k];
    const bool selected =
        std::find(est.s1_selected.begin(), est.s1_selected.end(), index) != est.s1_selected.end();
    const double miss = selected ? est.base_threshold - value : value - est.base_threshold;
    worst = std::max(worst, miss);
  }
  return worst;
}

inline AccuracyReport accuracy_report(const std::vector<SupportEstimate>& snapshots, double alpha) {
  AccuracyReport r;
  r.alpha = alpha;
  r.snapshots = snapshots.size();
  std::size_t violations = 0;
  for (const auto& est : snapshots) {
    const double margin = misclassification_margin(est);
    r.alpha_hat = std::max(r.alpha_hat, margin);
    if (margin > alpha) ++violations;
  }
  r.violation_rate = snapshots.empty() ? 0.0 : double(violations) / double(snapshots.size());
  return r;
}

/// Accuracy radius of the support selection,
/// 128 s_bar / eps1 * ln(1/delta1) * ln(2 T s0^1.5 s_under s_bar); 0 without privacy.
inline double selection_accuracy_alpha(const PrivacyBudget& budget, const SvtConfig& svt, int s0) {
  if (!budget.is_private()) return 0.0;
  return 128.0 * svt.s_bar / budget.eps1 * std::log(1.0 / budget.delta1) *
         std::log(2.0 * double(budget.T) * std::pow(double(s0), 1.5) * svt.s_under * svt.s_bar);
}

// ---------------------------------------------------------------------------
// Experiment orchestration

struct EpisodeSupport {
  int episode = 0;
  std::int64_t t = 0;
  double lambda = 0.0;
  int support_size = 0;
  bool contains_true_support = false;
  int false_positives = 0;
  int cap = 0;
  bool cap_hit = false;
};

struct RunResult {
  PolicyKind kind = PolicyKind::kPrivateThresholdLasso;
  double epsilon = kInf;
  int replication = 0;
  Trajectory trajectory;
  std::vector<EpisodeSupport> support;
  double accuracy_alpha = 0.0;
};

struct SummaryRow {
  PolicyKind kind = PolicyKind::kPrivateThresholdLasso;
  double epsilon = kInf;
  int replications = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  double mean_sigma_b = 0.0;
  double containment_rate = 0.0;  // final episode, S contained in S_l
  bool budget_ok = true;
};

struct ExperimentResult {
  std::vector<RunResult> runs;  // sorted by (policy, epsilon, replication)
  std::vector<SummaryRow> summary;
};

inline std::vector<EpisodeSupport> support_diagnostics(const Trajectory& traj,
                                                       const BanditInstance& instance) {
  std::vector<EpisodeSupport> out;
  for (const auto& est : traj.episodes) {
    EpisodeSupport e;
    e.episode = est.episode;
    e.t = est.t;
    e.lambda = est.lambda;
    e.support_size = static_cast<int>(est.s1_selected.size());
    e.contains_true_support = std::all_of(instance.support.begin(), instance.support.end(), [&](int i) {
      return std::find(est.s1_selected.begin(), est.s1_selected.end(), i) != est.s1_selected.end();
    });
    e.false_positives = static_cast<int>(std::count_if(
        est.s1_selected.begin(), est.s1_selected.end(), [&](int i) { return !instance.in_support(i); }));
    e.cap = traj.svt.cap;
    e.cap_hit = est.cap_hit;
    out.push_back(e);
  }
  return out;
}

/// Seed of replication r's instance. Policies and epsilon values share it.
inline std::uint64_t instance_seed(std::uint64_t base, int replication) {
  return derive_seed(base, static_cast<std::uint64_t>(replication), Stream::kInstance);
}

/// Seed of replication r's run streams; shared across policies and epsilon
/// values so contexts and reward noise coincide (common random numbers).
inline std::uint64_t run_seed(std::uint64_t base, int replication) {
  return derive_seed(base, static_cast<std::uint64_t>(replication), Stream::kEnvironment);
}

inline std::vector<SummaryRow> summarize(const std::vector<RunResult>& runs) {
  std::vector<SummaryRow> rows;
  std::size_t i = 0;
  while (i < runs.size()) {
    std::size_t j = i;
    while (j < runs.size() && runs[j].kind == runs[i].kind && runs[j].epsilon == runs[i].epsilon) ++j;
    SummaryRow row;
    row.kind = runs[i].kind;
    row.epsilon = runs[i].epsilon;
    row.replications = static_cast<int>(j - i);
    double sum = 0.0, sum_sq = 0.0, sigma = 0.0, contained = 0.0;
    for (std::size_t k = i; k < j; ++k) {
      const double r = runs[k].trajectory.total_regret();
      sum += r;
      sum_sq += r * r;
      sigma += runs[k].trajectory.sigma_b;
      if (!runs[k].support.empty() && runs[k].support.back().contains_true_support) contained += 1.0;
      row.budget_ok = row.budget_ok && runs[k].trajectory.budget.within_budget;
    }
    const double n = double(row.replications);
    row.mean_regret = sum / n;
    row.stderr_regret =
        n > 1 ? std::sqrt(std::max(0.0, (sum_sq - n * row.mean_regret * row.mean_regret) / (n - 1)) / n) : 0.0;
    row.mean_sigma_b = sigma / n;
    row.containment_rate = contained / n;
    rows.push_back(row);
    i = j;
  }
  return rows;
}

/// Runs every (policy, epsilon, replication) job on `jobs` worker threads.
/// Output order does not depend on scheduling.
inline ExperimentResult run_experiment(const ExperimentConfig& config, int jobs = 1) {
  validate(config);
  struct Job {
    PolicyKind kind;
    double epsilon;
    int replication;
  };
  std::vector<double> epsilons = config.epsilons;
  std::sort(epsilons.begin(), epsilons.end());
  epsilons.erase(std::unique(epsilons.begin(), epsilons.end()), epsilons.end());

  std::vector<Job> work;
  for (double eps : epsilons)
    for (int r = 0; r < config.replications; ++r)
      work.push_back({PolicyKind::kPrivateThresholdLasso, eps, r});
  for (PolicyKind kind : config.baselines)
    for (int r = 0; r < config.replications; ++r) work.push_back({kind, kInf, r});

  std::vector<BanditInstance> instances;
  for (int r = 0; r < config.replications; ++r) {
    InstanceSpec spec = config.instance;
    spec.seed = instance_seed(config.seed, r);
    instances.push_back(generate_instance(spec));
  }

  std::vector<RunResult> results(work.size());
  std::vector<std::exception_ptr> failures(work.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < work.size(); i = next++) {
      try {
        const Job& job = work[i];
        const BanditInstance& inst = instances[static_cast<std::size_t>(job.replication)];
        PolicyConfig policy = config.policy;
        policy.kind = job.kind;
        policy.epsilon = job.epsilon;
        RunResult& out = results[i];
        out.kind = job.kind;
        out.epsilon = job.epsilon;
        out.replication = job.replication;
        out.trajectory = run(policy, inst, config.T, run_seed(config.seed, job.replication));
        out.support = support_diagnostics(out.trajectory, inst);
        const auto budget = split_budget(out.trajectory.epsilon, policy.delta, config.T);
        out.accuracy_alpha = config.accuracy_alpha.value_or(
            selection_accuracy_alpha(budget, out.trajectory.svt, inst.s0));
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(work.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < threads; ++k) pool.emplace_back(worker);
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  ExperimentResult result;
  result.runs = std::move(results);
  result.summary = summarize(result.runs);
  return result;
}

// ---------------------------------------------------------------------------
// CSV output

/// 17 significant digits; infinities print as "inf".
inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kTrajectoryHeader =
    "policy,epsilon,replication,t,arm,reward,inst_regret,cum_regret,episode,support_size";
inline constexpr const char* kSummaryHeader =
    "policy,epsilon,replications,mean_regret,stderr_regret,mean_sigma_b,containment_rate,budget_ok";
inline constexpr const char* kSupportHeader =
    "policy,epsilon,replication,episode,t,lambda,support_size,contains_true_support,false_positives,"
    "cap,cap_hit";
inline constexpr const char* kAccuracyHeader =
    "policy,epsilon,episode,t,alpha,alpha_hat,violation_rate,snapshots";

namespace detail {

inline std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << header << '\n';
  return out;
}

inline void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
}

}  // namespace detail

/// Writes trajectory.csv (optional), summary.csv, support.csv and accuracy.csv.
inline void write_csvs(const ExperimentResult& result, const std::filesystem::path& dir,
                       bool write_trajectory = true) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create '" + dir.string() + "': " + ec.message());

  if (write_trajectory) {
    const auto path = dir / "trajectory.csv";
    auto out = detail::open_csv(path, kTrajectoryHeader);
    for (const auto& run : result.runs) {
      const std::string prefix = std::string(to_string(run.kind)) + ',' + format_real(run.epsilon) +
                                 ',' + std::to_string(run.replication) + ',';
      for (const auto& rec : run.trajectory.rounds) {
        out << prefix << rec.t << ',' << rec.arm << ',' << format_real(rec.reward) << ','
            << format_real(rec.inst_regret) << ',' << format_real(rec.cum_regret) << ','
            << rec.episode << ',' << rec.support_size << '\n';
      }
    }
    detail::close_csv(out, path);
  }
  {
    const auto path = dir / "summary.csv";
    auto out = detail::open_csv(path, kSummaryHeader);
    for (const auto& row : result.summary) {
      out << to_string(row.kind) << ',' << format_real(row.epsilon) << ',' << row.replications << ','
          << format_real(row.mean_regret) << ',' << format_real(row.stderr_regret) << ','
          << format_real(row.mean_sigma_b) << ',' << format_real(row.containment_rate) << ','
          << (row.budget_ok ? "true" : "false") << '\n';
    }
    detail::close_csv(out, path);
  }
  {
    const auto path = dir / "support.csv";
    auto out = detail::open_csv(path, kSupportHeader);
    for (const auto& run : result.runs)
      for (const auto& e : run.support) {
        out << to_string(run.kind) << ',' << format_real(run.epsilon) << ',' << run.replication << ','
            << e.episode << ',' << e.t << ',' << format_real(e.lambda) << ',' << e.support_size << ','
            << (e.contains_true_support ? 1 : 0) << ',' << e.false_positives << ',' << e.cap << ','
            << (e.cap_hit ? 1 : 0) << '\n';
      }
    detail::close_csv(out, path);
  }
  {
    const auto path = dir / "accuracy.csv";
    auto out = detail::open_csv(path, kAccuracyHeader);
    // Group snapshots by (policy, epsilon, episode) across replications.
    std::map<std::tuple<int, double, int>, std::pair<std::vector<SupportEstimate>, RunResult const*>> groups;
    std::vector<std::tuple<int, double, int>> order;
    for (const auto& run : result.runs) {
      // Only the thresholding policies make a selection to audit.
      if (run.kind == PolicyKind::kRandom || run.kind == PolicyKind::kOracleSupport) continue;
      for (const auto& est : run.trajectory.episodes) {
        const auto key = std::make_tuple(static_cast<int>(run.kind), run.epsilon, est.episode);
        auto [it, inserted] = groups.try_emplace(key);
        if (inserted) {
          order.push_back(key);
          it->second.second = &run;
        }
        it->second.first.push_back(est);
      }
    }
    for (const auto& key : order) {
      const auto& [snapshots, first] = groups.at(key);
      const AccuracyReport rep = accuracy_report(snapshots, first->accuracy_alpha);
      out << to_string(first->kind) << ',' << format_real(first->epsilon) << ',' << std::get<2>(key)
          << ',' << snapshots.front().t << ',' << format_real(rep.alpha) << ','
          << format_real(rep.alpha_hat) << ',' << format_real(rep.violation_rate) << ','
          << rep.snapshots << '\n';
    }
    detail::close_csv(out, path);
  }
}

}  // namespace ptlasso
