#include "adaptmix/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace adaptmix {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kMarginLeft = 70.0;
constexpr double kMarginRight = 160.0;  // legend gutter
constexpr double kMarginTop = 40.0;
constexpr double kMarginBottom = 50.0;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string escape_xml(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (const char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label, const std::vector<SvgSeries>& series) {
  if (series.empty()) throw std::invalid_argument("render_line_chart: no series");

  double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
  bool first = true;
  for (const SvgSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (first) {
        x_lo = x_hi = x;
        y_lo = y_hi = y;
        first = false;
      } else {
        x_lo = std::min(x_lo, x);
        x_hi = std::max(x_hi, x);
        y_lo = std::min(y_lo, y);
        y_hi = std::max(y_hi, y);
      }
    }
  }
  if (first) throw std::invalid_argument("render_line_chart: all series empty");
  if (x_hi == x_lo) x_hi = x_lo + 1.0;
  if (y_hi == y_lo) y_hi = y_lo + 1.0;

  const double plot_w = kWidth - kMarginLeft - kMarginRight;
  const double plot_h = kHeight - kMarginTop - kMarginBottom;
  const auto sx = [&](double x) { return kMarginLeft + (x - x_lo) / (x_hi - x_lo) * plot_w; };
  const auto sy = [&](double y) { return kMarginTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h; };

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 500\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"500\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << escape_xml(title) << "</text>\n";

  // frame
  os << "<rect x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(kMarginTop) << "\" width=\"" << fmt(plot_w)
     << "\" height=\"" << fmt(plot_h) << "\" fill=\"none\" stroke=\"#333333\"/>\n";

  // axis ticks: min and max on each axis
  os << "<text x=\"" << fmt(kMarginLeft) << "\" y=\"" << fmt(kHeight - kMarginBottom + 18)
     << "\" font-size=\"11\">" << fmt(x_lo) << "</text>\n";
  os << "<text x=\"" << fmt(kWidth - kMarginRight) << "\" y=\"" << fmt(kHeight - kMarginBottom + 18)
     << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(x_hi) << "</text>\n";
  os << "<text x=\"" << fmt(kMarginLeft - 6) << "\" y=\"" << fmt(kMarginTop + 12)
     << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y_hi) << "</text>\n";
  os << "<text x=\"" << fmt(kMarginLeft - 6) << "\" y=\"" << fmt(kHeight - kMarginBottom)
     << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(y_lo) << "</text>\n";

  os << "<text x=\"" << fmt(kMarginLeft + plot_w / 2) << "\" y=\"" << fmt(kHeight - 12)
     << "\" text-anchor=\"middle\" font-size=\"13\">" << escape_xml(x_label) << "</text>\n";
  os << "<text x=\"18\" y=\"" << fmt(kMarginTop + plot_h / 2)
     << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
     << fmt(kMarginTop + plot_h / 2) << ")\">" << escape_xml(y_label) << "</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].points) {
      os << fmt(sx(x)) << ',' << fmt(sy(y)) << ' ';
    }
    os << "\"/>\n";
    const double ly = kMarginTop + 16.0 + 18.0 * static_cast<double>(i);
    os << "<line x1=\"" << fmt(kWidth - kMarginRight + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
       << fmt(kWidth - kMarginRight + 34) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(kWidth - kMarginRight + 40) << "\" y=\"" << fmt(ly)
       << "\" font-size=\"12\">" << escape_xml(series[i].label) << "</text>\n";
  }

  os << "</svg>\n";
  return os.str();
}

}  // namespace adaptmix
