#pragma once

// Empirical privacy audit: run a mechanism on a neighboring input pair many
// times and bound the log-ratio of event frequencies over a fixed family of
// threshold events.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ptlasso/error.hpp"
#include "ptlasso/privacy.hpp"
#include "ptlasso/random.hpp"

namespace ptlasso {

enum class ProbeMechanism { kLaplaceScalar, kSvtSingleCoordinate };

inline std::string_view to_string(ProbeMechanism m) {
  return m == ProbeMechanism::kLaplaceScalar ? "laplace-scalar" : "svt-single-coordinate";
}

inline ProbeMechanism parse_probe_mechanism(std::string_view name) {
  if (name == "laplace-scalar") return ProbeMechanism::kLaplaceScalar;
  if (name == "svt-single-coordinate") return ProbeMechanism::kSvtSingleCoordinate;
  throw Error(ErrorCode::kInvalidArgument, "unknown mechanism '" + std::string(name) + "'");
}

struct ProbeConfig {
  ProbeMechanism mechanism = ProbeMechanism::kLaplaceScalar;
  double epsilon = 1.0;  // configured privacy level of the mechanism
  /// Neighboring gap. Negative selects the mechanism's sensitivity:
  /// 1 for the Laplace scalar, epsilon * xi / 2 for the single-coordinate SVT.
  double gap = -1.0;
  std::int64_t trials = 1'000'000;
  std::uint64_t seed = 1;
  std::int64_t min_event_count = 100;
};

struct ProbeResult {
  ProbeMechanism mechanism = ProbeMechanism::kLaplaceScalar;
  double epsilon = 0.0;
  double gap = 0.0;
  std::int64_t trials = 0;
  double epsilon_hat = 0.0;  // max |log(p/q)| over the event family
  double std_error = 0.0;    // delta-method standard error of the maximizing event
  double ci_low = 0.0;       // Wilson-based interval for the maximizing event
  double ci_high = 0.0;
  std::string event;  // description of the maximizing event
  bool within = false;  // epsilon_hat <= epsilon + 3 stderr
};

struct WilsonInterval {
  double low = 0.0;
  double high = 1.0;
};

/// Wilson score interval for a binomial proportion at z standard deviations.
inline WilsonInterval wilson_interval(std::int64_t successes, std::int64_t n, double z = 1.96) {
  if (n <= 0) return {};
  const double nn = double(n);
  const double p = double(successes) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

namespace detail {

struct EventCounts {
  std::string name;
  std::int64_t first = 0;   // hits under input A
  std::int64_t second = 0;  // hits under input A'
};

inline ProbeResult summarize_probe(const ProbeConfig& cfg, double gap,
                                   const std::vector<EventCounts>& events) {
  ProbeResult r;
  r.mechanism = cfg.mechanism;
  r.epsilon = cfg.epsilon;
  r.gap = gap;
  r.trials = cfg.trials;
  const double n = double(cfg.trials);
  bool any = false;
  for (const auto& e : events) {
    if (e.first < cfg.min_event_count || e.second < cfg.min_event_count) {
      throw Error(ErrorCode::kInsufficientTrials,
                  "event '" + e.name + "' has fewer than " + std::to_string(cfg.min_event_count) +
                      " hits; increase --trials");
    }
    const double p = double(e.first) / n;
    const double q = double(e.second) / n;
    const double log_ratio = std::log(p / q);
    const double loss = std::abs(log_ratio);
    if (!any || loss > r.epsilon_hat) {
      any = true;
      r.epsilon_hat = loss;
      r.std_error = std::sqrt((1.0 - p) / (n * p) + (1.0 - q) / (n * q));
      const auto wp = wilson_interval(e.first, cfg.trials);
      const auto wq = wilson_interval(e.second, cfg.trials);
      if (log_ratio >= 0.0) {
        r.ci_low = std::log(wp.low / wq.high);
        r.ci_high = std::log(wp.high / wq.low);
      } else {
        r.ci_low = std::log(wq.low / wp.high);
        r.ci_high = std::log(wq.high / wp.low);
      }
      r.event = e.name;
    }
  }
  r.within = r.epsilon_hat <= cfg.epsilon + 3.0 * r.std_error;
  return r;
}

}  // namespace detail

/// Laplace mechanism on inputs 0 and gap with scale 1/epsilon; events are
/// upper tails {Y > gap + j b / 2} and lower tails {Y < -j b / 2}, j = 0..4.
///
/// Single-coordinate SVT: the value v = 0 or v = gap is compared with a zero
/// threshold using noise scales (xi, 2 xi), xi = 1; events are {above} and
/// {below}.
inline ProbeResult privacy_probe(const ProbeConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(ErrorCode::kInvalidArgument, "probe epsilon must be finite and > 0");
  }
  if (cfg.trials < 1) throw Error(ErrorCode::kInsufficientTrials, "trials must be >= 1");
  Rng rng_first(derive_seed(cfg.seed, 0, Stream::kProbe));
  Rng rng_second(derive_seed(cfg.seed, 1, Stream::kProbe));
  std::vector<detail::EventCounts> events;

  if (cfg.mechanism == ProbeMechanism::kLaplaceScalar) {
    const double gap = cfg.gap < 0.0 ? 1.0 : cfg.gap;
    const double sensitivity = 1.0;
    const double scale = sensitivity / cfg.epsilon;
    std::vector<double> upper, lower;
    for (int j = 0; j <= 4; ++j) {
      upper.push_back(gap + 0.5 * j * scale);
      lower.push_back(-0.5 * j * scale);
    }
    for (double c : upper) events.push_back({"Y > " + std::to_string(c)});
    for (double c : lower) events.push_back({"Y < " + std::to_string(c)});
    for (std::int64_t i = 0; i < cfg.trials; ++i) {
      const double a = laplace(scale, rng_first);
      const double b = gap + laplace(scale, rng_second);
      for (std::size_t k = 0; k < upper.size(); ++k) {
        events[k].first += a > upper[k];
        events[k].second += b > upper[k];
        events[upper.size() + k].first += a < lower[k];
        events[upper.size() + k].second += b < lower[k];
      }
    }
    return detail::summarize_probe(cfg, gap, events);
  }

  SvtConfig svt;
  svt.xi = 1.0;
  svt.eps_prime = cfg.epsilon;
  svt.cap = 1;
  const double gap = cfg.gap < 0.0 ? cfg.epsilon * svt.xi / 2.0 : cfg.gap;
  events = {{"above"}, {"below"}};
  for (std::int64_t i = 0; i < cfg.trials; ++i) {
    const bool a = !svt_select({{0, 0.0}}, 0.0, svt, rng_first).selected.empty();
    const bool b = !svt_select({{0, gap}}, 0.0, svt, rng_second).selected.empty();
    events[0].first += a;
    events[0].second += b;
    events[1].first += !a;
    events[1].second += !b;
  }
  return detail::summarize_probe(cfg, gap, events);
}

}  // namespace ptlasso
