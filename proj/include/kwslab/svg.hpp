#pragma once

#include <string>
#include <vector>

namespace kws {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  double width = 640;
  double height = 480;
};

/// Line plot with axes, ticks and a legend. On log axes, non-positive values
/// are dropped from the drawn path.
std::string line_plot_svg(const std::vector<Series>& series, const PlotSpec& spec);

}  // namespace kws
