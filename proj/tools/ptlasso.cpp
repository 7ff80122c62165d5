// Command-line driver: run experiments, audit mechanisms, plot regret.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration or usage error,
// 3 I/O error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include "ptlasso/ptlasso.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

int exit_code_for(ptlasso::ErrorCode code) {
  switch (code) {
    case ptlasso::ErrorCode::kIoError: return kExitIo;
    case ptlasso::ErrorCode::kConfigInvalid:
    case ptlasso::ErrorCode::kInvalidArgument:
    case ptlasso::ErrorCode::kInvalidBudget:
    case ptlasso::ErrorCode::kInvalidDimensions: return kExitConfig;
    default: return kExitRuntime;
  }
}

int run_command(const std::string& config_path, const std::string& out_flag, int jobs) {
  ptlasso::ExperimentConfig config = ptlasso::load_config(config_path);
  // --out beats PTLASSO_OUT_DIR beats the config file.
  if (!out_flag.empty()) {
    config.out_dir = out_flag;
  } else if (const char* env = std::getenv("PTLASSO_OUT_DIR"); env != nullptr && *env != '\0') {
    config.out_dir = env;
  }
  const auto result = ptlasso::run_experiment(config, jobs);
  ptlasso::write_csvs(result, config.out_dir, config.write_trajectory);
  std::cout << "policy,epsilon,mean_regret,stderr_regret,containment_rate,budget_ok\n";
  for (const auto& row : result.summary) {
    std::cout << ptlasso::to_string(row.kind) << ',' << ptlasso::format_real(row.epsilon) << ','
              << row.mean_regret << ',' << row.stderr_regret << ',' << row.containment_rate << ','
              << (row.budget_ok ? "true" : "false") << '\n';
  }
  std::cout << "wrote " << config.out_dir << '\n';
  return 0;
}

int probe_command(const ptlasso::ProbeConfig& cfg) {
  const auto r = ptlasso::privacy_probe(cfg);
  std::cout << "mechanism=" << ptlasso::to_string(r.mechanism) << " epsilon=" << r.epsilon
            << " gap=" << r.gap << " trials=" << r.trials << '\n'
            << "epsilon_hat=" << r.epsilon_hat << " stderr=" << r.std_error << " ci95=[" << r.ci_low
            << ", " << r.ci_high << "] event=\"" << r.event << "\"\n"
            << (r.within ? "consistent" : "VIOLATION") << " (epsilon_hat <= epsilon + 3 stderr)\n";
  return r.within ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Jointly differentially private sparse linear bandit simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a replicated experiment and write CSVs");
  std::string config_path, out_dir;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  run->add_option("--config", config_path, "key=value experiment file")->required();
  run->add_option("--out", out_dir, "output directory (overrides PTLASSO_OUT_DIR and out_dir)");
  run->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);

  auto* probe = app.add_subcommand("probe", "Empirical privacy audit of a mechanism");
  std::string mechanism;
  ptlasso::ProbeConfig probe_cfg;
  probe->add_option("--mechanism", mechanism, "laplace-scalar | svt-single-coordinate")
      ->required()
      ->check(CLI::IsMember({"laplace-scalar", "svt-single-coordinate"}));
  probe->add_option("--trials", probe_cfg.trials, "trials per neighboring input")->required();
  probe->add_option("--epsilon", probe_cfg.epsilon, "configured privacy level")->capture_default_str();
  probe->add_option("--gap", probe_cfg.gap, "neighboring gap (default: mechanism sensitivity)");
  probe->add_option("--seed", probe_cfg.seed, "RNG seed")->capture_default_str();

  auto* plot = app.add_subcommand("plot", "Render mean regret curves to <dir>/regret.svg");
  std::string plot_dir;
  plot->add_option("--in", plot_dir, "directory holding trajectory.csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return run_command(config_path, out_dir, jobs);
    if (*probe) {
      probe_cfg.mechanism = ptlasso::parse_probe_mechanism(mechanism);
      return probe_command(probe_cfg);
    }
    if (*plot) {
      std::cout << "wrote " << ptlasso::plot_regret(plot_dir).string() << '\n';
      return 0;
    }
  } catch (const ptlasso::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
