#include "plots.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sixdgs/common.hpp"

namespace sixdgs::cli {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 20, kTop = 40, kBottom = 60;

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

// 1, 2 or 5 times a power of ten, giving roughly five ticks.
double tick_step(double span) {
  if (!(span > 0.0)) return 1.0;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

struct Frame {
  double x0, x1, y0, y1;
  [[nodiscard]] double px(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight); }
  [[nodiscard]] double py(double y) const { return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom); }
};

void axes(std::ostream& out, const Frame& f, const std::string& title, const std::string& xl, const std::string& yl) {
  out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">" << escape(title)
      << "</text>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << kWidth - kRight << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\"/>\n";
  const double sx = tick_step(f.x1 - f.x0), sy = tick_step(f.y1 - f.y0);
  for (double x = std::ceil(f.x0 / sx) * sx; x <= f.x1 + 1e-12; x += sx)
    out << "<text x=\"" << f.px(x) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\" font-size=\"11\">"
        << x << "</text>\n";
  for (double y = std::ceil(f.y0 / sy) * sy; y <= f.y1 + 1e-12; y += sy)
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << f.py(y) + 4 << "\" text-anchor=\"end\" font-size=\"11\">" << y
        << "</text>\n";
  out << "<text x=\"" << kWidth / 2 << "\" y=\"" << kHeight - 16 << "\" text-anchor=\"middle\" font-size=\"13\">"
      << escape(xl) << "</text>\n";
  out << "<text x=\"18\" y=\"" << kHeight / 2 << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << kHeight / 2 << ")\">" << escape(yl) << "</text>\n";
}

void save(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << body << "</svg>\n";
}

}  // namespace

void write_scatter_svg(const std::filesystem::path& path, const std::vector<Point>& points, const std::string& title,
                       const std::string& x_label, const std::string& y_label) {
  Frame f{0.0, 1.0, 0.0, 1.0};
  for (const auto& p : points) {
    f.x1 = std::max(f.x1, p.x * 1.1);
    f.y1 = std::max(f.y1, p.y * 1.1);
  }
  std::ostringstream body;
  axes(body, f, title, x_label, y_label);
  for (const auto& p : points)
    body << "<circle cx=\"" << f.px(p.x) << "\" cy=\"" << f.py(p.y) << "\" r=\"4\" fill=\"#1f77b4\"><title>"
         << escape(p.label) << "</title></circle>\n";
  save(path, body.str());
}

void write_histogram_svg(const std::filesystem::path& path, const std::vector<double>& values, double lo, double hi,
                         int bins, const std::string& title, const std::string& x_label) {
  std::vector<int> counts(static_cast<std::size_t>(std::max(bins, 1)), 0);
  for (double v : values) {
    const int b = std::clamp(static_cast<int>((v - lo) / (hi - lo) * bins), 0, bins - 1);
    ++counts[static_cast<std::size_t>(b)];
  }
  const int top = std::max(1, *std::max_element(counts.begin(), counts.end()));
  Frame f{lo, hi, 0.0, static_cast<double>(top)};
  std::ostringstream body;
  axes(body, f, title, x_label, "views");
  const double w = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    const double x0 = f.px(lo + b * w), x1 = f.px(lo + (b + 1) * w);
    const double y = f.py(counts[static_cast<std::size_t>(b)]);
    body << "<rect x=\"" << x0 + 1 << "\" y=\"" << y << "\" width=\"" << std::max(0.0, x1 - x0 - 2) << "\" height=\""
         << f.py(0) - y << "\" fill=\"#ff7f0e\"/>\n";
  }
  save(path, body.str());
}

}  // namespace sixdgs::cli
