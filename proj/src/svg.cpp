#include "apg/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace apg {

namespace {

constexpr int kWidth = 640, kHeight = 400;
constexpr int kMarginL = 60, kMarginR = 20, kMarginT = 40, kMarginB = 40;

const char* kPalette[] = {"#1f6fb2", "#d1495b", "#3a7d44", "#8d5a97", "#c7802d"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

void open_svg(std::ostringstream& os, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
     << kHeight << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" "
     << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";
}

}  // namespace

std::string line_chart_svg(const std::vector<Series>& series, const std::string& title) {
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const Series& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        xmin = xmax = s.x[i];
        ymin = ymax = s.y[i];
        any = true;
      }
      xmin = std::min(xmin, s.x[i]);
      xmax = std::max(xmax, s.x[i]);
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (xmax - xmin < 1e-12) xmax = xmin + 1.0;
  if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
  const double pw = kWidth - kMarginL - kMarginR;
  const double ph = kHeight - kMarginT - kMarginB;
  auto px = [&](double x) { return kMarginL + (x - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return kHeight - kMarginB - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream os;
  open_svg(os, title);
  os << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#555\"/>\n";
  os << "<text x=\"" << kMarginL - 8 << "\" y=\"" << py(ymin) << "\" text-anchor=\"end\" "
     << "font-family=\"sans-serif\" font-size=\"11\">" << num(ymin) << "</text>\n";
  os << "<text x=\"" << kMarginL - 8 << "\" y=\"" << py(ymax) + 10
     << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(ymax)
     << "</text>\n";
  for (size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = kPalette[k % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      os << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << kWidth - kMarginR - 4 << "\" y=\""
       << kMarginT + 16 + 16 * static_cast<int>(k) << "\" text-anchor=\"end\" fill=\""
       << color << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title) {
  double ymax = 1e-12;
  for (const auto& b : bars) ymax = std::max(ymax, b.second);
  const double pw = kWidth - kMarginL - kMarginR;
  const double ph = kHeight - kMarginT - kMarginB;
  const int n = std::max<int>(1, static_cast<int>(bars.size()));
  const double slot = pw / n;

  std::ostringstream os;
  open_svg(os, title);
  os << "<rect x=\"" << kMarginL << "\" y=\"" << kMarginT << "\" width=\"" << pw
     << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#555\"/>\n";
  for (size_t k = 0; k < bars.size(); ++k) {
    const double h = bars[k].second / ymax * (ph - 10);
    const double x = kMarginL + slot * k + slot * 0.15;
    const double y = kHeight - kMarginB - h;
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(slot * 0.7)
       << "\" height=\"" << num(h) << "\" fill=\"" << kPalette[k % 5] << "\"/>\n";
    os << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << kHeight - kMarginB + 16
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << bars[k].first << "</text>\n";
    os << "<text x=\"" << num(x + slot * 0.35) << "\" y=\"" << num(y - 4)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << num(bars[k].second) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace apg
