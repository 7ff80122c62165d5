#pragma once

// Mean cumulative-regret curves rendered as a standalone SVG from
// trajectory.csv.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ptlasso/error.hpp"

namespace ptlasso {

struct RegretCurve {
  std::string label;                 // "policy eps=..."
  std::vector<double> mean_regret;   // index t - 1
};

/// Averages cum_regret over replications for each (policy, epsilon).
inline std::vector<RegretCurve> read_regret_curves(const std::filesystem::path& trajectory_csv) {
  std::ifstream in(trajectory_csv);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + trajectory_csv.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIoError, "empty trajectory file");

  struct Accumulator {
    std::vector<double> sum;
    std::vector<int> count;
  };
  std::map<std::string, Accumulator> acc;
  std::vector<std::string> order;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string f; std::getline(ss, f, ',');) fields.push_back(f);
    if (fields.size() != 10) throw Error(ErrorCode::kIoError, "malformed row: " + line);
    const std::string label = fields[0] + " eps=" + fields[1];
    const auto t = static_cast<std::size_t>(std::stoll(fields[3]));
    const double cum = std::stod(fields[7]);
    auto [it, inserted] = acc.try_emplace(label);
    if (inserted) order.push_back(label);
    auto& a = it->second;
    if (a.sum.size() < t) {
      a.sum.resize(t, 0.0);
      a.count.resize(t, 0);
    }
    a.sum[t - 1] += cum;
    a.count[t - 1] += 1;
  }
  std::vector<RegretCurve> curves;
  for (const auto& label : order) {
    const auto& a = acc.at(label);
    RegretCurve c{label, {}};
    for (std::size_t i = 0; i < a.sum.size(); ++i) {
      c.mean_regret.push_back(a.count[i] > 0 ? a.sum[i] / a.count[i] : 0.0);
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

inline std::string render_regret_svg(const std::vector<RegretCurve>& curves) {
  constexpr double kWidth = 800, kHeight = 500, kMargin = 60;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};
  std::size_t horizon = 1;
  double top = 1e-12;
  for (const auto& c : curves) {
    horizon = std::max(horizon, c.mean_regret.size());
    for (double v : c.mean_regret) top = std::max(top, v);
  }
  const double plot_w = kWidth - 2 * kMargin, plot_h = kHeight - 2 * kMargin;
  auto px = [&](std::size_t t) { return kMargin + plot_w * double(t) / double(horizon); };
  auto py = [&](double v) { return kHeight - kMargin - plot_h * v / top; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 20 << "\" text-anchor=\"middle\">round t (T = "
      << horizon << ")</text>\n"
      << "<text x=\"15\" y=\"" << kHeight / 2 << "\" transform=\"rotate(-90 15 " << kHeight / 2
      << ")\" text-anchor=\"middle\">mean cumulative regret (max " << top << ")</text>\n";
  // Thin long curves to at most ~1000 vertices.
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const std::size_t stride = std::max<std::size_t>(1, c.mean_regret.size() / 1000);
    svg << "<polyline fill=\"none\" stroke=\"" << kColors[k % 8] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.mean_regret.size(); i += stride) {
      svg << px(i + 1) << ',' << py(c.mean_regret[i]) << ' ';
    }
    if (!c.mean_regret.empty()) svg << px(c.mean_regret.size()) << ',' << py(c.mean_regret.back());
    svg << "\"/>\n<text x=\"" << kMargin + 10 << "\" y=\"" << kMargin + 15 * (k + 1) << "\" fill=\""
        << kColors[k % 8] << "\">" << c.label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

/// Reads <dir>/trajectory.csv and writes <dir>/regret.svg; returns the SVG path.
inline std::filesystem::path plot_regret(const std::filesystem::path& dir) {
  const auto curves = read_regret_curves(dir / "trajectory.csv");
  const auto path = dir / "regret.svg";
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  out << render_regret_svg(curves);
  if (!out) throw Error(ErrorCode::kIoError, "failed writing '" + path.string() + "'");
  return path;
}

}  // namespace ptlasso
