#pragma once
// Minimal static SVG charts for evaluation reports.

#include <filesystem>
#include <string>
#include <vector>

namespace sixdgs::cli {

struct Point {
  double x, y;
  std::string label;
};

void write_scatter_svg(const std::filesystem::path& path, const std::vector<Point>& points,
                       const std::string& title, const std::string& x_label, const std::string& y_label);

// Bins `values` into `bins` equal-width buckets over [lo, hi].
void write_histogram_svg(const std::filesystem::path& path, const std::vector<double>& values, double lo,
                         double hi, int bins, const std::string& title, const std::string& x_label);

}  // namespace sixdgs::cli
