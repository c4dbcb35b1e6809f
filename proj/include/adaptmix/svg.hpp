#pragma once

#include <string>
#include <vector>

namespace adaptmix {

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

// Self-contained line chart: fixed 800x500 viewBox, one polyline per
// series, axis labels and a text legend. No plotting dependency.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series);

}  // namespace adaptmix
