#pragma once

// Flat key=value experiment configuration. Lines starting with '#' and blank
// lines are ignored; unknown keys are rejected.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ptlasso/environment.hpp"
#include "ptlasso/error.hpp"
#include "ptlasso/policy.hpp"
#include "ptlasso/privacy.hpp"

namespace ptlasso {

struct ExperimentConfig {
  InstanceSpec instance;
  PolicyConfig policy;
  std::vector<double> epsilons{0.5, 1.0, 2.0, kInf};
  std::vector<PolicyKind> baselines;
  std::int64_t T = 4096;
  int replications = 10;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  std::optional<double> accuracy_alpha;  // default: the selection accuracy bound
  bool write_trajectory = true;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    const auto end = comma == std::string_view::npos ? s.size() : comma;
    if (auto item = trim(s.substr(start, end - start)); !item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

[[noreturn]] inline void config_error(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfigInvalid, key + ": " + what);
}

inline double parse_real(const std::string& key, const std::string& value) {
  if (value == "inf" || value == "+inf") return kInf;
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) config_error(key, "trailing characters in '" + value + "'");
    return v;
  } catch (const std::logic_error&) {
    config_error(key, "not a number: '" + value + "'");
  }
}

inline std::int64_t parse_integer(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) config_error(key, "trailing characters in '" + value + "'");
    return v;
  } catch (const std::logic_error&) {
    config_error(key, "not an integer: '" + value + "'");
  }
}

}  // namespace detail

inline void validate(const ExperimentConfig& c) {
  using detail::config_error;
  const auto& in = c.instance;
  if (in.d < 2) config_error("d", "must be >= 2");
  if (in.s0 < 1 || in.s0 >= in.d) config_error("s0", "must satisfy 1 <= s0 < d");
  if (in.K < 1) config_error("K", "must be >= 1");
  if (!(in.theta_min > 0.0)) config_error("theta_min", "must be > 0");
  if (!(in.C_theta > 0.0) || !std::isfinite(in.C_theta)) config_error("C_theta", "must be finite and > 0");
  if (in.theta_min * std::sqrt(double(in.s0)) > in.C_theta * (1.0 + 1e-12)) {
    config_error("theta_min", "theta_min * sqrt(s0) exceeds C_theta");
  }
  if (!(in.sigma >= 0.0) || !std::isfinite(in.sigma)) config_error("sigma", "must be finite and >= 0");
  if (!(in.C_x > 0.0) || !std::isfinite(in.C_x)) config_error("C_x", "must be finite and > 0");
  if (!(in.phi >= 0.0) || !std::isfinite(in.phi)) config_error("phi", "must be finite and >= 0");
  const auto& p = c.policy;
  if (!(p.lambda0 >= 0.0) || !std::isfinite(p.lambda0)) config_error("lambda0", "must be finite and >= 0");
  if (!(p.delta > 0.0 && p.delta < 1.0)) config_error("delta", "must lie in (0, 1)");
  if (!(p.gamma_floor > 0.0)) config_error("gamma_floor", "must be > 0");
  if (!(p.wishart_scale >= 0.0) || !std::isfinite(p.wishart_scale)) {
    config_error("wishart_scale", "must be finite and >= 0");
  }
  if (p.wishart_k && *p.wishart_k < 1) config_error("wishart_k", "must be >= 1");
  if (c.epsilons.empty()) config_error("epsilon", "at least one value required");
  for (double e : c.epsilons) {
    if (!(e > 0.0)) config_error("epsilon", "values must be > 0 or inf");
  }
  if (c.T < 1) config_error("T", "must be >= 1");
  if (c.T > (std::int64_t{1} << 24)) config_error("T", "must be <= 2^24");
  if (c.replications < 1) config_error("replications", "must be >= 1");
  if (c.out_dir.empty()) config_error("out_dir", "must not be empty");
  if (c.accuracy_alpha && !(*c.accuracy_alpha >= 0.0)) config_error("accuracy_alpha", "must be >= 0");
}

inline ExperimentConfig parse_config(std::istream& in) {
  using namespace detail;
  ExperimentConfig c;
  std::map<std::string, int> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(line_no), "expected key=value");
    }
    const std::string key = trim(std::string_view(stripped).substr(0, eq));
    const std::string value = trim(std::string_view(stripped).substr(eq + 1));
    if (++seen[key] > 1) config_error(key, "duplicate key");
    if (value.empty()) config_error(key, "empty value");

    auto real = [&] { return parse_real(key, value); };
    auto integer = [&] { return parse_integer(key, value); };
    auto small_int = [&] {
      const auto v = integer();
      if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
        config_error(key, "out of range");
      }
      return static_cast<int>(v);
    };

    try {
      if (key == "d") c.instance.d = small_int();
      else if (key == "s0") c.instance.s0 = small_int();
      else if (key == "K") c.instance.K = small_int();
      else if (key == "theta_min") c.instance.theta_min = real();
      else if (key == "C_theta") c.instance.C_theta = real();
      else if (key == "sigma") c.instance.sigma = real();
      else if (key == "C_x") c.instance.C_x = real();
      else if (key == "phi") c.instance.phi = real();
      else if (key == "context_dist") c.instance.context_dist = parse_context_distribution(value);
      else if (key == "lambda0") c.policy.lambda0 = real();
      else if (key == "delta") c.policy.delta = real();
      else if (key == "gamma_floor") c.policy.gamma_floor = real();
      else if (key == "wishart_scale") c.policy.wishart_scale = real();
      else if (key == "wishart_k") c.policy.wishart_k = integer();
      else if (key == "svt_variant") {
        if (value == "per-query") c.policy.svt_variant = SvtVariant::kPerQueryThreshold;
        else if (value == "classical") c.policy.svt_variant = SvtVariant::kClassical;
        else config_error(key, "expected per-query or classical");
      } else if (key == "lasso_tol") c.policy.lasso.tol = real();
      else if (key == "lasso_max_iters") c.policy.lasso.max_iters = integer();
      else if (key == "epsilon") {
        c.epsilons.clear();
        for (const auto& item : split_list(value)) c.epsilons.push_back(parse_real(key, item));
      } else if (key == "baselines") {
        c.baselines.clear();
        for (const auto& item : split_list(value)) {
          if (item == "none") continue;
          const PolicyKind kind = parse_policy_kind(item);
          if (kind == PolicyKind::kPrivateThresholdLasso) {
            config_error(key, "the private policy is always run; list only baselines");
          }
          c.baselines.push_back(kind);
        }
      } else if (key == "T") c.T = integer();
      else if (key == "replications") c.replications = small_int();
      else if (key == "seed") {
        const auto v = integer();
        if (v < 0) config_error(key, "must be >= 0");
        c.seed = static_cast<std::uint64_t>(v);
      } else if (key == "out_dir") c.out_dir = value;
      else if (key == "accuracy_alpha") c.accuracy_alpha = real();
      else if (key == "write_trajectory") {
        if (value == "true" || value == "1") c.write_trajectory = true;
        else if (value == "false" || value == "0") c.write_trajectory = false;
        else config_error(key, "expected true or false");
      } else {
        config_error(key, "unknown key");
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kConfigInvalid) throw;
      config_error(key, e.what());
    }
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open config '" + path + "'");
  return parse_config(in);
}

}  // namespace ptlasso
