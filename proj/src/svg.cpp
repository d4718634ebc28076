#include "icra/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "icra/format.hpp"

namespace icra::svg {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 150.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double x) { return format_fixed(x, 2); }

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '&':
        out += "&amp;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string header(const std::string& title) {
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
  return o.str();
}

}  // namespace

std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label, bool loglog) {
  auto tx = [&](double v) { return loglog ? std::log10(v) : v; };
  double xmin = std::numeric_limits<double>::infinity();
  double xmax = -xmin;
  double ymin = xmin;
  double ymax = -xmin;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (loglog && (s.x[i] <= 0.0 || s.y[i] <= 0.0)) continue;
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xmin = std::min(xmin, tx(s.x[i]));
      xmax = std::max(xmax, tx(s.x[i]));
      ymin = std::min(ymin, tx(s.y[i]));
      ymax = std::max(ymax, tx(s.y[i]));
    }
  }
  std::ostringstream o;
  o << header(title);
  if (!std::isfinite(xmin)) {
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight / 2) << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return o.str();
  }
  if (xmax == xmin) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return kTop + ph - (tx(v) - ymin) / (ymax - ymin) * ph; };

  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  // Axis ticks at the data extremes (in the original units).
  auto label_value = [&](double t) { return loglog ? std::pow(10.0, t) : t; };
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    const double sx = kLeft + pw * i / 4.0;
    const double sy = kTop + ph - ph * i / 4.0;
    o << "<text x=\"" << num(sx) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">"
      << escape(format_fixed(label_value(fx), loglog ? 0 : 2)) << "</text>\n";
    std::ostringstream yl;
    const double v = label_value(fy);
    yl << (std::abs(v) < 1e-2 || std::abs(v) >= 1e4 ? format_double(std::round(v * 1e6) / 1e6) : format_fixed(v, 3));
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\">" << escape(yl.str())
      << "</text>\n";
  }
  o << "<text x=\"" << num(kLeft + pw / 2) << "\" y=\"" << num(kHeight - 12) << "\" text-anchor=\"middle\">"
    << escape(x_label + (loglog ? " (log)" : "")) << "</text>\n";
  o << "<text x=\"16\" y=\"" << num(kTop + ph / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num(kTop + ph / 2) << ")\">" << escape(y_label + (loglog ? " (log)" : "")) << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % (sizeof kPalette / sizeof kPalette[0])];
    std::ostringstream path;
    bool first = true;
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (loglog && (s.x[i] <= 0.0 || s.y[i] <= 0.0))) continue;
      path << (first ? "M" : " L") << num(px(s.x[i])) << ' ' << num(py(s.y[i]));
      o << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\"" << num(py(s.y[i])) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
      first = false;
    }
    if (!first) o << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(si);
    o << "<rect x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
      << color << "\"/>\n<text x=\"" << num(kWidth - kRight + 26) << "\" y=\"" << num(ly) << "\">" << escape(s.label)
      << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string bar_chart(const std::vector<BarGroup>& groups, const std::vector<std::string>& bar_names,
                      const std::string& title) {
  std::ostringstream o;
  o << header(title);
  if (groups.empty() || bar_names.empty()) {
    o << "<text x=\"" << num(kWidth / 2) << "\" y=\"" << num(kHeight / 2) << "\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return o.str();
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  o << "<rect x=\"" << num(kLeft) << "\" y=\"" << num(kTop) << "\" width=\"" << num(pw) << "\" height=\"" << num(ph)
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double sy = kTop + ph - ph * i / 4.0;
    o << "<text x=\"" << num(kLeft - 6) << "\" y=\"" << num(sy + 4) << "\" text-anchor=\"end\">"
      << format_fixed(i / 4.0, 2) << "</text>\n";
  }
  const double group_w = pw / static_cast<double>(groups.size());
  const double bar_w = 0.8 * group_w / static_cast<double>(bar_names.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = kLeft + group_w * static_cast<double>(g) + 0.1 * group_w;
    for (std::size_t b = 0; b < bar_names.size() && b < groups[g].values.size(); ++b) {
      const double v = groups[g].values[b];
      if (!std::isfinite(v)) continue;
      const double h = std::clamp(v, 0.0, 1.0) * ph;
      o << "<rect x=\"" << num(gx + bar_w * static_cast<double>(b)) << "\" y=\"" << num(kTop + ph - h) << "\" width=\""
        << num(bar_w * 0.95) << "\" height=\"" << num(h) << "\" fill=\""
        << kPalette[b % (sizeof kPalette / sizeof kPalette[0])] << "\"/>\n";
    }
    o << "<text x=\"" << num(gx + 0.4 * group_w) << "\" y=\"" << num(kTop + ph + 16) << "\" text-anchor=\"middle\">"
      << escape(groups[g].label) << "</text>\n";
  }
  for (std::size_t b = 0; b < bar_names.size(); ++b) {
    const double ly = kTop + 14.0 + 18.0 * static_cast<double>(b);
    o << "<rect x=\"" << num(kWidth - kRight + 10) << "\" y=\"" << num(ly - 9) << "\" width=\"10\" height=\"10\" fill=\""
      << kPalette[b % (sizeof kPalette / sizeof kPalette[0])] << "\"/>\n<text x=\"" << num(kWidth - kRight + 26)
      << "\" y=\"" << num(ly) << "\">" << escape(bar_names[b]) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace icra::svg
