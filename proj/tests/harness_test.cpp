#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "ptlasso/config.hpp"
#include "ptlasso/harness.hpp"
#include "ptlasso/plot.hpp"
#include "ptlasso/probe.hpp"

namespace ptlasso {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const std::string& s) { return static_cast<int>(std::count(s.begin(), s.end(), '\n')); }

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ptlasso_test_" + name);
  fs::remove_all(dir);
  return dir;
}

ExperimentConfig tiny_config() {
  return parse_config_string(R"(
# tiny experiment
d = 12
s0 = 2
K = 2
T = 64
replications = 2
epsilon = 1, inf
baselines = random, oracle-support
seed = 5
)");
}

TEST(Config, ParsesKeysAndInf) {
  const auto c = tiny_config();
  EXPECT_EQ(c.instance.d, 12);
  EXPECT_EQ(c.epsilons.size(), 2u);
  EXPECT_TRUE(std::isinf(c.epsilons[1]));
  EXPECT_EQ(c.baselines.size(), 2u);
  EXPECT_EQ(c.T, 64);
}

TEST(Config, RejectsInvalidInput) {
  for (const char* text : {"d = 1\n", "s0 = 200\n", "bogus = 1\n", "epsilon = -1\n", "delta = 0\n",
                           "T = 0\n", "d\n", "d = 5\nd = 6\n", "lambda0 = abc\n", "T = 12x\n",
                           "svt_variant = other\n", "baselines = private-threshold-lasso\n",
                           "context_dist = cube\n"}) {
    try {
      parse_config_string(text);
      FAIL() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kConfigInvalid) << text;
    }
  }
}

TEST(Config, MissingFileIsIoError) {
  try {
    load_config("/nonexistent/ptlasso.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIoError);
  }
}

TEST(RunExperiment, SingleRoundSingleReplication) {
  auto c = tiny_config();
  c.T = 1;
  c.replications = 1;
  c.epsilons = {2.0};
  c.baselines.clear();
  const auto dir = scratch_dir("single");
  write_csvs(run_experiment(c), dir);
  const auto traj = slurp(dir / "trajectory.csv");
  EXPECT_EQ(count_lines(traj), 2);
  EXPECT_EQ(traj.substr(0, traj.find('\n')), kTrajectoryHeader);
  fs::remove_all(dir);
}

TEST(RunExperiment, ByteIdenticalAcrossRunsAndJobCounts) {
  const auto c = tiny_config();
  const auto a = scratch_dir("det_a"), b = scratch_dir("det_b");
  write_csvs(run_experiment(c, 1), a);
  write_csvs(run_experiment(c, 3), b);
  for (const char* f : {"trajectory.csv", "summary.csv", "support.csv", "accuracy.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_GT(count_lines(slurp(a / f)), 1) << f;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunExperiment, SummaryOrderedByEpsilon) {
  auto c = tiny_config();
  c.epsilons = {kInf, 2.0, 0.5};
  c.baselines.clear();
  const auto result = run_experiment(c);
  ASSERT_EQ(result.summary.size(), 3u);
  EXPECT_EQ(result.summary[0].epsilon, 0.5);
  EXPECT_EQ(result.summary[1].epsilon, 2.0);
  EXPECT_TRUE(std::isinf(result.summary[2].epsilon));
  for (const auto& row : result.summary) EXPECT_TRUE(row.budget_ok);
}

TEST(RunExperiment, CommonRandomNumbersAcrossEpsilon) {
  auto c = tiny_config();
  c.baselines = {PolicyKind::kNonPrivateThresholdLasso};
  const auto result = run_experiment(c);
  // The infinite-epsilon private run and the non-private baseline coincide.
  for (int r = 0; r < c.replications; ++r) {
    const RunResult* priv = nullptr;
    const RunResult* base = nullptr;
    for (const auto& run : result.runs) {
      if (run.replication != r || !std::isinf(run.epsilon)) continue;
      (run.kind == PolicyKind::kPrivateThresholdLasso ? priv : base) = &run;
    }
    ASSERT_TRUE(priv && base);
    EXPECT_EQ(priv->trajectory.total_regret(), base->trajectory.total_regret());
  }
}

TEST(FormatReal, SeventeenDigits) {
  EXPECT_EQ(format_real(0.1), "0.10000000000000001");
  EXPECT_EQ(format_real(kInf), "inf");
  EXPECT_EQ(std::stod(format_real(1.0 / 3.0)), 1.0 / 3.0);
}

SupportEstimate snapshot(std::vector<int> s0, std::vector<double> values, std::vector<int> s1,
                         double threshold) {
  SupportEstimate e;
  e.s0_candidates = std::move(s0);
  e.candidate_values = std::move(values);
  e.s1_selected = std::move(s1);
  e.base_threshold = threshold;
  return e;
}

TEST(AccuracyReport, ExactThresholdingHasZeroAlphaHat) {
  const auto r = accuracy_report({snapshot({0, 1, 2}, {0.5, 2.0, 3.0}, {1, 2}, 1.0)}, 0.0);
  EXPECT_EQ(r.alpha_hat, 0.0);
  EXPECT_EQ(r.violation_rate, 0.0);
}

TEST(AccuracyReport, MisclassificationDistances) {
  const std::vector<SupportEstimate> snaps{snapshot({0, 1}, {0.5, 2.0}, {0}, 1.0),
                                           snapshot({0}, {1.2}, {0}, 1.0)};
  const auto r = accuracy_report(snaps, 0.7);
  EXPECT_DOUBLE_EQ(r.alpha_hat, 1.0);  // index 1 rejected 1.0 above threshold
  EXPECT_DOUBLE_EQ(r.violation_rate, 0.5);
  EXPECT_EQ(accuracy_report(snaps, kInf).violation_rate, 0.0);
}

TEST(AccuracyReport, NoisySelectionViolatesZeroAlpha) {
  auto c = tiny_config();
  c.epsilons = {1.0};
  c.baselines.clear();
  c.replications = 100;
  c.T = 32;
  const auto result = run_experiment(c);
  std::vector<SupportEstimate> snaps;
  for (const auto& run : result.runs)
    for (const auto& e : run.trajectory.episodes) snaps.push_back(e);
  EXPECT_GT(accuracy_report(snaps, 0.0).violation_rate, 0.0);
}

TEST(PrivacyProbe, LaplaceScalarRecoversEpsilon) {
  ProbeConfig cfg;
  cfg.epsilon = 1.0;
  cfg.trials = 1000000;
  const auto r = privacy_probe(cfg);
  EXPECT_GE(r.epsilon_hat, 0.9);
  EXPECT_LE(r.epsilon_hat, 1.1);
  EXPECT_TRUE(r.within);
  EXPECT_LE(r.ci_low, r.epsilon_hat);
  EXPECT_GE(r.ci_high, r.epsilon_hat);
}

TEST(PrivacyProbe, ZeroGapIsIndistinguishable) {
  ProbeConfig cfg;
  cfg.gap = 0.0;
  cfg.trials = 200000;
  const auto r = privacy_probe(cfg);
  EXPECT_LE(r.epsilon_hat, 3.0 * r.std_error);
}

TEST(PrivacyProbe, SvtSingleCoordinateWithinEpsilon) {
  ProbeConfig cfg;
  cfg.mechanism = ProbeMechanism::kSvtSingleCoordinate;
  cfg.epsilon = 0.5;
  cfg.trials = 200000;
  const auto r = privacy_probe(cfg);
  EXPECT_TRUE(r.within) << r.epsilon_hat << " +- " << r.std_error;
}

TEST(PrivacyProbe, InsufficientTrials) {
  ProbeConfig cfg;
  cfg.trials = 50;
  try {
    privacy_probe(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInsufficientTrials);
  }
}

TEST(WilsonInterval, ContainsPointEstimate) {
  const auto w = wilson_interval(30, 100);
  EXPECT_LT(w.low, 0.3);
  EXPECT_GT(w.high, 0.3);
  EXPECT_NEAR(w.low, 0.2189, 1e-3);
  EXPECT_NEAR(w.high, 0.3958, 1e-3);
}

TEST(Plot, WritesSvg) {
  const auto dir = scratch_dir("plot");
  write_csvs(run_experiment(tiny_config()), dir);
  const auto svg = plot_regret(dir);
  const auto text = slurp(svg);
  EXPECT_NE(text.find("<svg"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n') > 5, true);
  EXPECT_NE(text.find("random eps=inf"), std::string::npos);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace ptlasso
