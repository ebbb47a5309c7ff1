#pragma once

#include <string>
#include <utility>
#include <vector>

namespace mresgld {

// Floats in every CSV are written with 9 significant digits.
std::string format_real(double value);

// Minimal static SVG plot: axes box, tick labels, scatter and line series.
class SvgPlot {
 public:
  SvgPlot(std::string title, std::string x_label, std::string y_label);

  void set_range(double x_min, double x_max, double y_min, double y_max);
  void set_log_y(bool log_y) { log_y_ = log_y; }

  void add_scatter(std::vector<std::pair<double, double>> points, std::string color,
                   double radius = 1.5, double opacity = 0.35);
  void add_line(std::vector<std::pair<double, double>> points, std::string color,
                std::string label);
  void add_markers(std::vector<std::pair<double, double>> points, std::string color,
                   double radius = 4.0);
  void add_circle(double cx, double cy, double r, std::string color);
  // Shaded band between lower and upper over the same abscissae.
  void add_band(std::vector<double> x, std::vector<double> lower, std::vector<double> upper,
                std::string color);

  std::string render() const;
  void write(const std::string& path) const;

 private:
  struct Series {
    enum Kind { scatter, line, markers, circle, band } kind;
    std::vector<std::pair<double, double>> points;
    std::vector<double> extra;
    std::string color;
    std::string label;
    double radius = 1.5;
    double opacity = 1.0;
  };

  double map_x(double x) const;
  double map_y(double y) const;
  void auto_range();

  std::string title_, x_label_, y_label_;
  std::vector<Series> series_;
  bool range_set_ = false;
  bool log_y_ = false;
  double x_min_ = 0, x_max_ = 1, y_min_ = 0, y_max_ = 1;
};

}  // namespace mresgld
