#pragma once

#include <string>
#include <utility>
#include <vector>

#include "report.hpp"

namespace lab {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
  bool dashed = false;
};

struct ChartOptions {
  std::string title;
  std::string x_label = "n";
  std::string y_label = "value";
  bool log_x = true;
  bool log_y = true;
  int width = 720;
  int height = 480;
};

// Line chart, one <polyline> per series, with axes, ticks and a legend.
std::string render_svg(const std::vector<Series>& series, const ChartOptions& options);

// Groups rows by variant, metric and any config column that separates rows at
// the same x; seeds are aggregated by median.
// Metrics starting with "bound" are drawn dashed.
std::vector<Series> series_from_rows(const std::vector<ResultRow>& rows, const std::string& x);

}  // namespace lab
