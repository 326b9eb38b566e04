#pragma once

#include <string>
#include <utility>
#include <vector>

namespace escore {

/// Minimal deterministic SVG charts for the figure analogues. Element
/// order follows insertion order, so identical inputs give identical bytes.
struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
  bool points_only = false;
};

struct SvgPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<SvgSeries> series;
  std::vector<double> hlines;   // reference lines (e.g. alpha = 0.05)
  bool diagonal = false;        // y = x reference
};

std::string svg_line_chart(const std::vector<SvgPanel>& panels);

struct SvgHeatPanel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> xs;
  std::vector<double> ys;
  std::vector<std::vector<double>> z;  // z[iy][ix]
};

std::string svg_heatmap(const std::vector<SvgHeatPanel>& panels);

}  // namespace escore
