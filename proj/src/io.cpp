#include "mresgld/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace mresgld {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string format_real(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

SvgPlot::SvgPlot(std::string title, std::string x_label, std::string y_label)
    : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

void SvgPlot::set_range(double x_min, double x_max, double y_min, double y_max) {
  x_min_ = x_min;
  x_max_ = x_max;
  y_min_ = y_min;
  y_max_ = y_max;
  range_set_ = true;
}

void SvgPlot::add_scatter(std::vector<std::pair<double, double>> points, std::string color,
                          double radius, double opacity) {
  series_.push_back({Series::scatter, std::move(points), {}, std::move(color), {}, radius, opacity});
}

void SvgPlot::add_line(std::vector<std::pair<double, double>> points, std::string color,
                       std::string label) {
  series_.push_back({Series::line, std::move(points), {}, std::move(color), std::move(label), 0, 1});
}

void SvgPlot::add_markers(std::vector<std::pair<double, double>> points, std::string color,
                          double radius) {
  series_.push_back({Series::markers, std::move(points), {}, std::move(color), {}, radius, 1});
}

void SvgPlot::add_circle(double cx, double cy, double r, std::string color) {
  series_.push_back({Series::circle, {{cx, cy}}, {r}, std::move(color), {}, 0, 1});
}

void SvgPlot::add_band(std::vector<double> x, std::vector<double> lower, std::vector<double> upper,
                       std::string color) {
  if (x.size() != lower.size() || x.size() != upper.size())
    throw std::invalid_argument("band arrays must have equal length");
  std::vector<std::pair<double, double>> pts;
  for (std::size_t i = 0; i < x.size(); ++i) pts.emplace_back(x[i], lower[i]);
  series_.push_back({Series::band, std::move(pts), std::move(upper), std::move(color), {}, 0, 0.3});
}

void SvgPlot::auto_range() {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series_) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (log_y_ && y <= 0) continue;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    for (double y : s.extra) {
      if (s.kind == Series::band && std::isfinite(y)) ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  x_min_ = xmin;
  x_max_ = xmax;
  y_min_ = ymin;
  y_max_ = ymax;
}

double SvgPlot::map_x(double x) const {
  return kLeft + (x - x_min_) / (x_max_ - x_min_) * (kWidth - kLeft - kRight);
}

double SvgPlot::map_y(double y) const {
  double lo = y_min_, hi = y_max_, v = y;
  if (log_y_) {
    lo = std::log10(std::max(lo, 1e-300));
    hi = std::log10(std::max(hi, 1e-300));
    v = std::log10(std::max(v, 1e-300));
  }
  return kHeight - kBottom - (v - lo) / (hi - lo) * (kHeight - kTop - kBottom);
}

std::string SvgPlot::render() const {
  SvgPlot copy = *this;
  if (!copy.range_set_) copy.auto_range();
  const SvgPlot& p = copy;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape(title_) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
      << "\" height=\"" << kHeight - kTop - kBottom << "\" fill=\"none\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double fx = p.x_min_ + (p.x_max_ - p.x_min_) * i / 4.0;
    svg << "<text x=\"" << num(p.map_x(fx)) << "\" y=\"" << kHeight - kBottom + 16
        << "\" text-anchor=\"middle\">" << tick(fx) << "</text>\n";
    double fy;
    if (log_y_) {
      const double lo = std::log10(std::max(p.y_min_, 1e-300));
      const double hi = std::log10(std::max(p.y_max_, 1e-300));
      fy = std::pow(10.0, lo + (hi - lo) * i / 4.0);
    } else {
      fy = p.y_min_ + (p.y_max_ - p.y_min_) * i / 4.0;
    }
    svg << "<text x=\"" << kLeft - 6 << "\" y=\"" << num(p.map_y(fy) + 4)
        << "\" text-anchor=\"end\">" << tick(fy) << "</text>\n";
  }
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">"
      << escape(x_label_) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << kHeight / 2 << ")\">" << escape(y_label_) << "</text>\n";

  int legend_row = 0;
  for (const auto& s : series_) {
    switch (s.kind) {
      case Series::scatter:
      case Series::markers:
        for (const auto& [x, y] : s.points) {
          if (!std::isfinite(x) || !std::isfinite(y)) continue;
          svg << "<circle cx=\"" << num(p.map_x(x)) << "\" cy=\"" << num(p.map_y(y)) << "\" r=\""
              << s.radius << "\" fill=\"" << s.color << "\" fill-opacity=\"" << s.opacity
              << "\"/>\n";
        }
        break;
      case Series::line: {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.points) {
          if (!std::isfinite(y) || (log_y_ && y <= 0)) continue;
          svg << num(p.map_x(x)) << ',' << num(p.map_y(y)) << ' ';
        }
        svg << "\"/>\n";
        if (!s.label.empty()) {
          const double ly = kTop + 16 + 16 * legend_row++;
          svg << "<line x1=\"" << kWidth - 170 << "\" y1=\"" << ly - 4 << "\" x2=\"" << kWidth - 145
              << "\" y2=\"" << ly - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
          svg << "<text x=\"" << kWidth - 140 << "\" y=\"" << ly << "\">" << escape(s.label)
              << "</text>\n";
        }
        break;
      }
      case Series::circle: {
        const auto [cx, cy] = s.points.front();
        const double rx = std::abs(p.map_x(cx + s.extra[0]) - p.map_x(cx));
        const double ry = std::abs(p.map_y(cy + s.extra[0]) - p.map_y(cy));
        svg << "<ellipse cx=\"" << num(p.map_x(cx)) << "\" cy=\"" << num(p.map_y(cy)) << "\" rx=\""
            << num(rx) << "\" ry=\"" << num(ry) << "\" fill=\"none\" stroke=\"" << s.color
            << "\" stroke-width=\"2\"/>\n";
        break;
      }
      case Series::band: {
        svg << "<polygon fill=\"" << s.color << "\" fill-opacity=\"" << s.opacity << "\" points=\"";
        for (const auto& [x, y] : s.points) svg << num(p.map_x(x)) << ',' << num(p.map_y(y)) << ' ';
        for (std::size_t i = s.points.size(); i-- > 0;)
          svg << num(p.map_x(s.points[i].first)) << ',' << num(p.map_y(s.extra[i])) << ' ';
        svg << "\"/>\n";
        break;
      }
    }
  }
  svg << "</svg>\n";
  return svg.str();
}

void SvgPlot::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << render();
}

}  // namespace mresgld
