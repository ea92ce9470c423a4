#include "cmarl/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "cmarl/errors.hpp"
#include "cmarl/metrics_io.hpp"

namespace cmarl {

namespace {

constexpr double kWidth = 820, kHeight = 460;
constexpr double kLeft = 80, kRight = 190, kTop = 40, kBottom = 60;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void settle() {
    if (lo > hi) lo = 0, hi = 1;
    if (hi - lo < 1e-12) {
      const double pad = std::max(std::abs(lo) * 0.1, 0.5);
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string render_svg(const LineChart& chart) {
  Range xr, yr;
  for (const auto& s : chart.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
  }
  if (chart.zero_line) yr.add(0.0);
  xr.settle();
  yr.settle();
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
  auto py = [&](double y) { return kTop + (yr.hi - y) / (yr.hi - yr.lo) * ph; };

  std::string o;
  o += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
       "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" +
       escape(chart.title) + "</text>\n";
  o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
       "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 5; ++i) {
    const double xv = xr.lo + (xr.hi - xr.lo) * i / 5.0, yv = yr.lo + (yr.hi - yr.lo) * i / 5.0;
    o += "<line x1=\"" + num(px(xv)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(px(xv)) + "\" y2=\"" +
         num(kTop + ph + 5) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(px(xv)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" + num(xv) +
         "</text>\n";
    o += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(py(yv)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
         num(py(yv)) + "\" stroke=\"black\"/>\n";
    o += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
         "</text>\n";
  }
  o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 16) + "\" text-anchor=\"middle\">" +
       escape(chart.x_label) + "</text>\n";
  o += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
       escape(chart.y_label) + "</text>\n";

  if (chart.zero_line) {
    o += "<line x1=\"" + num(kLeft) + "\" y1=\"" + num(py(0)) + "\" x2=\"" + num(kLeft + pw) + "\" y2=\"" +
         num(py(0)) + "\" stroke=\"#444\" stroke-dasharray=\"2,3\"/>\n";
  }

  std::size_t i = 0;
  for (const auto& s : chart.series) {
    const char* color = kPalette[i % std::size(kPalette)];
    std::string pts;
    for (std::size_t j = 0; j < std::min(s.x.size(), s.y.size()); ++j) {
      if (!std::isfinite(s.x[j]) || !std::isfinite(s.y[j])) continue;
      pts += num(px(s.x[j])) + "," + num(py(s.y[j])) + " ";
    }
    if (!pts.empty()) {
      o += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\"" +
           (s.dashed ? " stroke-dasharray=\"6,3\"" : "") + " points=\"" + pts + "\"/>\n";
    }
    const double ly = kTop + 12 + 18.0 * static_cast<double>(i);
    o += "<line x1=\"" + num(kLeft + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(kLeft + pw + 36) + "\" y2=\"" +
         num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"" + (s.dashed ? " stroke-dasharray=\"6,3\"" : "") +
         "/>\n";
    o += "<text x=\"" + num(kLeft + pw + 42) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.name) + "</text>\n";
    ++i;
  }
  o += "</svg>\n";
  return o;
}

ChartFiles emit_report(const std::filesystem::path& dir) {
  const auto metrics_path = dir / kMetricsFile;
  if (!std::filesystem::exists(metrics_path)) throw IoError("no " + std::string(kMetricsFile) + " in '" + dir.string() + "'");
  const CsvTable m = read_csv(metrics_path);

  std::size_t K = 0;
  while (m.find("G_gap_" + std::to_string(K + 1)) != static_cast<std::size_t>(-1)) ++K;
  std::vector<std::string> missing;
  for (const auto& c : metrics_columns(K)) {
    if (m.find(c) == static_cast<std::size_t>(-1)) missing.push_back(c);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& c : missing) list += (list.empty() ? "" : ", ") + c;
    throw ConfigError("'" + metrics_path.string() + "' is missing columns: " + list);
  }

  const auto steps = m.column("step");
  LineChart lam{"Local multiplier estimates", "step", "lambda", {}, false};
  const auto lpath = dir / kLambdasFile;
  bool per_agent = false;
  if (std::filesystem::exists(lpath)) {
    const CsvTable l = read_csv(lpath);
    if (l.find("step") != static_cast<std::size_t>(-1)) {
      const auto lsteps = l.column("step");
      for (const auto& c : l.columns) {
        if (c == "step") continue;
        lam.series.push_back({c, lsteps, l.column(c), false});
        per_agent = true;
      }
    }
  }
  if (!per_agent) {
    for (std::size_t k = 1; k <= K; ++k) {
      const auto name = "lambda_mean_" + std::to_string(k);
      lam.series.push_back({name, steps, m.column(name), false});
    }
  }
  lam.series.push_back({"||lambda_perp||", steps, m.column("lambda_disagreement"), true});

  LineChart costs{"Objective and constraint gap", "step", "cost", {}, true};
  costs.series.push_back({"J", steps, m.column("J"), false});
  for (std::size_t k = 1; k <= K; ++k) {
    const auto name = "G_gap_" + std::to_string(k);
    costs.series.push_back({"<G_" + std::to_string(k) + "> - b", steps, m.column(name), false});
  }

  ChartFiles files{dir / kLambdaChart, dir / kCostChart};
  for (const auto& [path, chart] : {std::pair{files.lambda, &lam}, std::pair{files.costs, &costs}}) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << render_svg(*chart);
  }
  return files;
}

}  // namespace cmarl
