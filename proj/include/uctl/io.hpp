#pragma once

// Text renderings of results: trajectory CSV, SVG plots of d(x(t)) against a
// KL envelope, and small formatting helpers. All output is deterministic.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "uctl/core.hpp"

namespace uctl::io {

/// Shortest round-trip decimal form.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

/// Columns t, x_1..x_n, u_1..u_m (or w0, w_1..w_m), d_to_target. Row k carries the control
/// held on [t_k, t_{k+1}); the last row repeats the last held control. A trailing comment
/// records the status.
inline std::string trajectory_csv(const TrajectoryRecord& rec, const Target& target, int n, int m) {
  std::string out = "t";
  for (int i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  if (rec.control_kind == ControlKind::Extended) out += ",w0";
  for (int i = 1; i <= m; ++i) out += (rec.control_kind == ControlKind::Extended ? ",w_" : ",u_") + std::to_string(i);
  out += ",d_to_target\n";
  const int width = m + (rec.control_kind == ControlKind::Extended ? 1 : 0);
  for (std::size_t k = 0; k < rec.size(); ++k) {
    out += fmt(rec.times[k]);
    for (int i = 0; i < n; ++i) out += "," + fmt(rec.states[k][i]);
    const Control* c = nullptr;
    if (k < rec.controls.size()) c = &rec.controls[k];
    else if (!rec.controls.empty()) c = &rec.controls.back();
    for (int i = 0; i < width; ++i) out += "," + (c ? fmt((*c)[i]) : std::string());
    out += "," + fmt(target(rec.states[k])) + "\n";
  }
  out += "# status=" + std::string(to_string(rec.status)) + " time=" + fmt(rec.status_time) + "\n";
  return out;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<double> t;
  std::vector<double> v;
};

/// Static SVG with a logarithmic vertical axis; non-positive values are dropped.
inline std::string svg_plot(const std::vector<Series>& series, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 30, B = 40;
  double t0 = std::numeric_limits<double>::infinity(), t1 = -t0, lo = t0, hi = -t0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!(s.v[i] > 0.0) || !std::isfinite(s.v[i])) continue;
      t0 = std::min(t0, s.t[i]);
      t1 = std::max(t1, s.t[i]);
      lo = std::min(lo, std::log10(s.v[i]));
      hi = std::max(hi, std::log10(s.v[i]));
    }
  }
  if (!std::isfinite(t0)) t0 = 0, t1 = 1, lo = 0, hi = 1;
  if (t1 <= t0) t1 = t0 + 1;
  lo = std::floor(lo);
  hi = std::ceil(hi);
  if (hi <= lo) hi = lo + 1;
  auto px = [&](double t) { return L + (t - t0) / (t1 - t0) * (W - L - R); };
  auto py = [&](double v) { return T + (hi - std::log10(v)) / (hi - lo) * (H - T - B); };
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), std::round(v * 100.0) / 100.0);
    return std::string(buf, res.ptr);
  };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  out += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(W / 2) + "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" + title + "</text>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(H - B) + "\" x2=\"" + num(W - R) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  out += "<line x1=\"" + num(L) + "\" y1=\"" + num(T) + "\" x2=\"" + num(L) + "\" y2=\"" + num(H - B) +
         "\" stroke=\"black\"/>\n";
  for (int e = static_cast<int>(lo); e <= static_cast<int>(hi); ++e) {
    const double y = py(std::pow(10.0, e));
    out += "<text x=\"" + num(L - 6) + "\" y=\"" + num(y + 4) + "\" text-anchor=\"end\" font-size=\"11\">1e" +
           std::to_string(e) + "</text>\n";
  }
  out += "<text x=\"" + num(L) + "\" y=\"" + num(H - B + 16) + "\" font-size=\"11\">" + fmt(t0) + "</text>\n";
  out += "<text x=\"" + num(W - R) + "\" y=\"" + num(H - B + 16) + "\" text-anchor=\"end\" font-size=\"11\">" +
         fmt(t1) + "</text>\n";
  double legend_y = T + 14;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.t.size(); ++i) {
      if (!(s.v[i] > 0.0) || !std::isfinite(s.v[i])) continue;
      if (!pts.empty()) pts += ' ';
      pts += num(px(s.t[i])) + "," + num(py(s.v[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    out += "<text x=\"" + num(W - R - 4) + "\" y=\"" + num(legend_y) + "\" text-anchor=\"end\" font-size=\"12\" fill=\"" +
           s.color + "\">" + s.label + "</text>\n";
    legend_y += 16;
  }
  out += "</svg>\n";
  return out;
}

/// d(x(t)) of a record and, when beta is given, the envelope beta(d(z), t) on a fine grid.
inline std::string trajectory_svg(const TrajectoryRecord& rec, const Target& target,
                                  const std::function<double(double, double)>* beta) {
  std::vector<Series> series;
  Series d{"d(x(t))", "#1f77b4", {}, {}};
  for (std::size_t k = 0; k < rec.size(); ++k) {
    d.t.push_back(rec.times[k]);
    d.v.push_back(target(rec.states[k]));
  }
  if (beta && !rec.states.empty()) {
    Series env{"beta(d(z), t)", "#d62728", {}, {}};
    const double dz = target(rec.states.front());
    const double end = rec.times.back();
    for (int i = 0; i <= 200; ++i) {
      const double t = end * i / 200.0;
      env.t.push_back(t);
      env.v.push_back((*beta)(dz, t));
    }
    series.push_back(std::move(env));
  }
  series.push_back(std::move(d));
  return svg_plot(series, "distance to target");
}

}  // namespace uctl::io
