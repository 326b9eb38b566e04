#include "escore/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace escore {

namespace {

constexpr int kPanelW = 380;
constexpr int kPanelH = 300;
constexpr int kMarginL = 56;
constexpr int kMarginR = 16;
constexpr int kMarginT = 34;
constexpr int kMarginB = 44;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f",
                          "#bcbd22", "#e377c2"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void include(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (!(lo < hi)) {
      lo -= 1.0;
      hi += 1.0;
    }
    const double d = 0.05 * (hi - lo);
    lo -= d;
    hi += d;
  }
};

struct Scale {
  Range r;
  double px0, px1;
  double operator()(double v) const {
    return px0 + (v - r.lo) / (r.hi - r.lo) * (px1 - px0);
  }
};

void panel_frame(std::ostringstream& out, int ox, const std::string& title,
                 const std::string& x_label, const std::string& y_label,
                 const Scale& sx, const Scale& sy) {
  out << "<rect x='" << ox + kMarginL << "' y='" << kMarginT << "' width='"
      << kPanelW - kMarginL - kMarginR << "' height='"
      << kPanelH - kMarginT - kMarginB
      << "' fill='none' stroke='#333' stroke-width='1'/>\n";
  out << "<text x='" << ox + kPanelW / 2 << "' y='18' text-anchor='middle' "
      << "font-size='13' font-family='sans-serif'>" << title << "</text>\n";
  out << "<text x='" << ox + kPanelW / 2 << "' y='" << kPanelH - 8
      << "' text-anchor='middle' font-size='11' font-family='sans-serif'>"
      << x_label << "</text>\n";
  out << "<text x='" << ox + 14 << "' y='" << kPanelH / 2
      << "' text-anchor='middle' font-size='11' font-family='sans-serif' "
      << "transform='rotate(-90 " << ox + 14 << " " << kPanelH / 2 << ")'>"
      << y_label << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double xv = sx.r.lo + k * (sx.r.hi - sx.r.lo) / 4.0;
    const double yv = sy.r.lo + k * (sy.r.hi - sy.r.lo) / 4.0;
    out << "<text x='" << num(sx(xv)) << "' y='" << kPanelH - kMarginB + 14
        << "' text-anchor='middle' font-size='9' font-family='sans-serif'>"
        << num(xv) << "</text>\n";
    out << "<text x='" << ox + kMarginL - 4 << "' y='" << num(sy(yv) + 3)
        << "' text-anchor='end' font-size='9' font-family='sans-serif'>"
        << num(yv) << "</text>\n";
  }
}

}  // namespace

std::string svg_line_chart(const std::vector<SvgPanel>& panels) {
  const int width = kPanelW * static_cast<int>(panels.size());
  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << kPanelH << "' viewBox='0 0 " << width << " "
      << kPanelH << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const int ox = static_cast<int>(p) * kPanelW;
    Range rx, ry;
    for (const auto& s : panel.series) {
      for (const auto& [x, y] : s.points) {
        rx.include(x);
        ry.include(y);
      }
    }
    for (double h : panel.hlines) ry.include(h);
    rx.pad();
    ry.pad();
    if (panel.diagonal) {
      const double lo = std::min(rx.lo, ry.lo), hi = std::max(rx.hi, ry.hi);
      rx.lo = ry.lo = lo;
      rx.hi = ry.hi = hi;
    }
    const Scale sx{rx, static_cast<double>(ox + kMarginL),
                   static_cast<double>(ox + kPanelW - kMarginR)};
    const Scale sy{ry, static_cast<double>(kPanelH - kMarginB),
                   static_cast<double>(kMarginT)};
    panel_frame(out, ox, panel.title, panel.x_label, panel.y_label, sx, sy);
    if (panel.diagonal) {
      out << "<line x1='" << num(sx(rx.lo)) << "' y1='" << num(sy(rx.lo))
          << "' x2='" << num(sx(rx.hi)) << "' y2='" << num(sy(rx.hi))
          << "' stroke='#999' stroke-dasharray='4,3'/>\n";
    }
    for (double h : panel.hlines) {
      out << "<line x1='" << num(sx(rx.lo)) << "' y1='" << num(sy(h))
          << "' x2='" << num(sx(rx.hi)) << "' y2='" << num(sy(h))
          << "' stroke='#d62728' stroke-dasharray='5,3'/>\n";
    }
    for (std::size_t si = 0; si < panel.series.size(); ++si) {
      const auto& s = panel.series[si];
      const char* color = kPalette[si % 10];
      if (!s.points_only && s.points.size() > 1) {
        out << "<polyline fill='none' stroke='" << color
            << "' stroke-width='1.5' points='";
        for (const auto& [x, y] : s.points)
          out << num(sx(x)) << ',' << num(sy(y)) << ' ';
        out << "'/>\n";
      }
      for (const auto& [x, y] : s.points) {
        out << "<circle cx='" << num(sx(x)) << "' cy='" << num(sy(y))
            << "' r='2.4' fill='" << color << "'/>\n";
      }
      out << "<text x='" << ox + kMarginL + 8 << "' y='"
          << kMarginT + 14 + 13 * static_cast<int>(si) << "' font-size='10' "
          << "font-family='sans-serif' fill='" << color << "'>" << s.label
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_heatmap(const std::vector<SvgHeatPanel>& panels) {
  const int width = kPanelW * static_cast<int>(panels.size());
  std::ostringstream out;
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << kPanelH << "' viewBox='0 0 " << width << " "
      << kPanelH << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& panel = panels[p];
    const int ox = static_cast<int>(p) * kPanelW;
    Range rz;
    for (const auto& row : panel.z)
      for (double v : row) rz.include(v);
    rz.pad();
    Range rx, ry;
    for (double x : panel.xs) rx.include(x);
    for (double y : panel.ys) ry.include(y);
    rx.pad();
    ry.pad();
    const Scale sx{rx, static_cast<double>(ox + kMarginL),
                   static_cast<double>(ox + kPanelW - kMarginR)};
    const Scale sy{ry, static_cast<double>(kPanelH - kMarginB),
                   static_cast<double>(kMarginT)};
    panel_frame(out, ox, panel.title, panel.x_label, panel.y_label, sx, sy);
    const double cw = (sx(rx.hi) - sx(rx.lo)) / static_cast<double>(panel.xs.size() + 1);
    const double ch = (sy(ry.hi) - sy(ry.lo)) / static_cast<double>(panel.ys.size() + 1);
    for (std::size_t iy = 0; iy < panel.ys.size(); ++iy) {
      for (std::size_t ix = 0; ix < panel.xs.size(); ++ix) {
        const double t = (panel.z[iy][ix] - rz.lo) / (rz.hi - rz.lo);
        const int red = static_cast<int>(255 * t);
        const int blue = static_cast<int>(255 * (1.0 - t));
        out << "<rect x='" << num(sx(panel.xs[ix]) - 0.5 * cw) << "' y='"
            << num(sy(panel.ys[iy]) + 0.5 * ch) << "' width='" << num(cw)
            << "' height='" << num(-ch) << "' fill='rgb(" << red << ",80,"
            << blue << ")'/>\n";
      }
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace escore
