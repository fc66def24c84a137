#pragma once

// Static SVG line chart: D_V and D_T against time on a log axis, with the
// certificate's exponential envelopes drawn dashed.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "tcs/certificates.hpp"
#include "tcs/diagnostics.hpp"

namespace tcs {

namespace plot_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Series {
  std::string label, color;
  bool dashed = false;
  std::vector<std::pair<double, double>> pts;
};

}  // namespace plot_detail

inline void write_decay_svg(const std::vector<DiagnosticsFrame>& frames, const FlockingCertificate* cert,
                            std::ostream& out) {
  using plot_detail::num;
  using plot_detail::Series;
  if (frames.empty()) throw std::invalid_argument("write_decay_svg: no frames");

  constexpr double W = 720, H = 440, L = 70, R = 20, T = 30, B = 50;
  constexpr double floor_val = 1e-16;

  std::vector<Series> series{{"D_V", "#1f77b4", false, {}}, {"D_T", "#d62728", false, {}}};
  const double t0 = frames.front().time;
  for (const auto& f : frames) {
    series[0].pts.emplace_back(f.time, f.d_v);
    series[1].pts.emplace_back(f.time, f.d_t);
  }
  if (cert != nullptr && cert->satisfied) {
    Series bv{"D_V bound", "#1f77b4", true, {}}, bt{"D_T bound", "#d62728", true, {}};
    for (const auto& f : frames) {
      bv.pts.emplace_back(f.time, frames.front().d_v * std::exp(-cert->rate_v * (f.time - t0)));
      bt.pts.emplace_back(f.time, frames.front().d_t * std::exp(-cert->rate_t * (f.time - t0)));
    }
    series.push_back(std::move(bv));
    series.push_back(std::move(bt));
  }

  double tmin = t0, tmax = frames.back().time;
  if (!(tmax > tmin)) tmax = tmin + 1.0;
  double lo = kInf, hi = -kInf;
  for (const auto& s : series)
    for (auto [t, y] : s.pts) {
      const double v = std::max(y, floor_val);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  double dlo = std::floor(std::log10(lo)), dhi = std::ceil(std::log10(hi));
  if (dhi <= dlo) dhi = dlo + 1;

  auto px = [&](double t) { return L + (t - tmin) / (tmax - tmin) * (W - L - R); };
  auto py = [&](double y) {
    const double ly = std::log10(std::max(y, floor_val));
    return T + (dhi - ly) / (dhi - dlo) * (H - T - B);
  };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
      << "\" fill=\"none\" stroke=\"black\"/>\n";

  // decade gridlines
  const int step = std::max(1, static_cast<int>((dhi - dlo) / 8));
  for (int e = static_cast<int>(dlo); e <= static_cast<int>(dhi); e += step) {
    const double y = py(std::pow(10.0, e));
    out << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << num(y) << "\" y2=\"" << num(y)
        << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">1e" << e << "</text>\n";
  }
  for (int k = 0; k <= 5; ++k) {
    const double t = tmin + (tmax - tmin) * k / 5.0;
    out << "<text x=\"" << num(px(t)) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">t</text>\n";

  for (const auto& s : series) {
    out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\"";
    if (s.dashed) out << " stroke-dasharray=\"6 4\"";
    out << " points=\"";
    for (std::size_t k = 0; k < s.pts.size(); ++k) {
      if (k) out << ' ';
      out << num(px(s.pts[k].first)) << ',' << num(py(s.pts[k].second));
    }
    out << "\"/>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = T + 16 + 16.0 * static_cast<double>(k);
    out << "<line x1=\"" << W - R - 130 << "\" x2=\"" << W - R - 105 << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"" << series[k].color << "\" stroke-width=\"1.5\""
        << (series[k].dashed ? " stroke-dasharray=\"6 4\"" : "") << "/>\n";
    out << "<text x=\"" << W - R - 100 << "\" y=\"" << y + 4 << "\">" << series[k].label << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write_decay_svg: write failed");
}

}  // namespace tcs
