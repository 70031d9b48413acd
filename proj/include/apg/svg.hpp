#pragma once

#include <string>
#include <utility>
#include <vector>

namespace apg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Minimal deterministic plots; axes are auto-scaled to the data range.
std::string line_chart_svg(const std::vector<Series>& series, const std::string& title);
std::string bar_chart_svg(const std::vector<std::pair<std::string, double>>& bars,
                          const std::string& title);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace apg
