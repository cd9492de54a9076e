// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

namespace qcov {

inline constexpr const char* kVersion = "1.0.0";

/// Builds a CSV table in memory. Numbers are printed with %.17g so a table
/// round-trips exactly and does not depend on locale or thread count.
class CsvTable {
 public:
  CsvTable(std::string name, std::vector<std::string> columns) : name_(std::move(name)), columns_(std::move(columns)) {}

  /// Extra "# ..." line between the version line and the header.
  void note(const std::string& text) { notes_.push_back(text); }

  CsvTable& row() {
    rows_.emplace_back();
    return *this;
  }
  CsvTable& cell(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return push(buf);
  }
  CsvTable& cell(std::size_t v) { return push(std::to_string(v)); }
  CsvTable& cell(bool v) { return push(v ? "1" : "0"); }
  CsvTable& cell(const std::string& v) { return push(v); }
  CsvTable& cell(const char* v) { return push(v); }

  [[nodiscard]] std::string text() const {
    std::string out = "# qcov " + name_ + " v1\n";
    for (const auto& n : notes_) out += "# " + n + "\n";
    out += join(columns_);
    for (const auto& r : rows_) {
      if (r.size() != columns_.size()) throw std::logic_error("csv row width mismatch in " + name_);
      out += join(r);
    }
    return out;
  }
  [[nodiscard]] const std::string& name() const { return name_; }

 private:
  CsvTable& push(std::string v) {
    if (rows_.empty()) throw std::logic_error("csv cell before row()");
    if (v.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : v) quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
      v = quoted + "\"";
    }
    rows_.back().push_back(std::move(v));
    return *this;
  }
  static std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + xs[i];
    return out + "\n";
  }

  std::string name_;
  std::vector<std::string> columns_;
  std::vector<std::string> notes_;
  std::vector<std::vector<std::string>> rows_;
};

/// Writes through a sibling temporary and renames, so readers never see a
/// partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << text;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

struct PlotSeries {
  std::string label;
  std::vector<double> x{};
  std::vector<double> y{};
  std::vector<double> low{};  // optional whiskers, same length as y
  std::vector<double> high{};
  std::string color = "#1f77b4";
  bool line = true;
  bool markers = true;
  bool dashed = false;
};

/// Static log-log SVG. Nonpositive values are skipped.
inline std::string loglog_svg(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<PlotSeries>& series) {
  constexpr double width = 640, height = 440, left = 80, right = 170, top = 40, bottom = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  auto extend = [](double v, double& lo, double& hi) {
    if (v > 0.0 && std::isfinite(v)) {
      lo = std::min(lo, std::log10(v));
      hi = std::max(hi, std::log10(v));
    }
  };
  for (const auto& s : series) {
    for (double v : s.x) extend(v, xmin, xmax);
    for (double v : s.y) extend(v, ymin, ymax);
    for (double v : s.low) extend(v, ymin, ymax);
    for (double v : s.high) extend(v, ymin, ymax);
  }
  if (!std::isfinite(xmin)) xmin = -1, xmax = 0;
  if (!std::isfinite(ymin)) ymin = -1, ymax = 0;
  xmin = std::floor(xmin * 4) / 4 - 0.05, xmax = std::ceil(xmax * 4) / 4 + 0.05;
  ymin = std::floor(ymin), ymax = std::ceil(ymax);
  if (xmax - xmin < 0.2) xmin -= 0.1, xmax += 0.1;
  if (ymax - ymin < 1.0) ymin -= 0.5, ymax += 0.5;
  const double pw = width - left - right, ph = height - top - bottom;
  auto px = [&](double v) { return left + (std::log10(v) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return top + (ymax - std::log10(v)) / (ymax - ymin) * ph; };
  auto ok = [](double v) { return v > 0.0 && std::isfinite(v); };

  std::string svg;
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" font-family=\"sans-serif\" "
                "font-size=\"12\">\n<rect width=\"100%%\" height=\"100%%\" fill=\"white\"/>\n",
                width, height);
  svg += buf;
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"22\" font-size=\"14\">%s</text>\n", left, title.c_str());
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.1f\" y=\"%.1f\" width=\"%.1f\" height=\"%.1f\" fill=\"none\" stroke=\"#333\"/>\n", left, top,
                pw, ph);
  svg += buf;
  for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
    const double y = py(std::pow(10.0, e));
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#ddd\"/><text x=\"%.1f\" y=\"%.1f\" "
                  "text-anchor=\"end\">1e%d</text>\n",
                  left, y, left + pw, y, left - 6, y + 4, e);
    svg += buf;
  }
  for (double t = std::ceil(xmin * 4) / 4; t <= xmax; t += 0.25) {
    const double v = std::pow(10.0, t);
    const double x = px(v);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#eee\"/><text x=\"%.1f\" y=\"%.1f\" "
                  "text-anchor=\"middle\">%.3g</text>\n",
                  x, top, x, top + ph, x, top + ph + 16, v);
    svg += buf;
  }
  std::snprintf(buf, sizeof buf, "<text x=\"%.1f\" y=\"%.1f\" text-anchor=\"middle\">%s</text>\n", left + pw / 2,
                height - 18, xlabel.c_str());
  svg += buf;
  std::snprintf(buf, sizeof buf,
                "<text x=\"18\" y=\"%.1f\" text-anchor=\"middle\" transform=\"rotate(-90 18 %.1f)\">%s</text>\n",
                top + ph / 2, top + ph / 2, ylabel.c_str());
  svg += buf;

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    std::string pts;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ok(s.x[i]) || !ok(s.y[i])) continue;
      std::snprintf(buf, sizeof buf, "%.2f,%.2f ", px(s.x[i]), py(s.y[i]));
      pts += buf;
    }
    if (s.line && !pts.empty()) {
      svg += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\"" +
             (s.dashed ? std::string(" stroke-dasharray=\"6 4\"") : std::string()) + " points=\"" + pts + "\"/>\n";
    }
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!ok(s.x[i])) continue;
      const double x = px(s.x[i]);
      if (i < s.low.size() && i < s.high.size() && ok(s.high[i])) {
        const double lo = ok(s.low[i]) ? s.low[i] : std::pow(10.0, ymin);
        std::snprintf(buf, sizeof buf, "<line x1=\"%.2f\" y1=\"%.2f\" x2=\"%.2f\" y2=\"%.2f\" stroke=\"%s\"/>\n", x,
                      py(lo), x, py(s.high[i]), s.color.c_str());
        svg += buf;
      }
      if (s.markers && ok(s.y[i])) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"3\" fill=\"%s\"/>\n", x, py(s.y[i]),
                      s.color.c_str());
        svg += buf;
      }
    }
    const double ly = top + 14 + 18 * static_cast<double>(si);
    std::snprintf(buf, sizeof buf,
                  "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"%s\" stroke-width=\"2\"%s/>"
                  "<text x=\"%.1f\" y=\"%.1f\">%s</text>\n",
                  left + pw + 10, ly, left + pw + 30, ly, s.color.c_str(),
                  s.dashed ? " stroke-dasharray=\"6 4\"" : "", left + pw + 36, ly + 4, s.label.c_str());
    svg += buf;
  }
  svg += "</svg>\n";
  return svg;
}

inline std::string utc_timestamp(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Run record written next to the outputs. Its "config" member is a complete
/// config echo that load_config accepts.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  unsigned threads = 1;
  std::chrono::system_clock::time_point started;
  std::chrono::system_clock::time_point finished;
  double wall_seconds = 0.0;
  std::vector<std::string> outputs;
  int exit_code = 0;

  [[nodiscard]] nlohmann::json to_json() const {
    return {{"artifact", "qcov"},
            {"version", kVersion},
            {"command", command},
            {"config", config},
            {"seed", seed},
            {"threads", threads},
            {"started", utc_timestamp(started)},
            {"finished", utc_timestamp(finished)},
            {"wall_seconds", wall_seconds},
            {"outputs", outputs},
            {"exit_code", exit_code}};
  }
};

}  // namespace qcov
