#pragma once

#include <string>
#include <vector>

#include "xwalk/evaluate.hpp"

namespace xwalk::plot {

struct Series {
  std::string name;
  std::string color;  // any SVG color
  std::vector<double> x;
  std::vector<double> y;
};

struct Labels {
  std::string title;
  std::string x;
  std::string y;
};

/// Self-contained SVG documents with fixed-precision coordinates, so equal
/// data gives byte-equal files.
std::string scatter_svg(const std::vector<Series>& series, const Labels& labels);
std::string line_svg(const std::vector<Series>& series, const Labels& labels);
std::string box_svg(const std::vector<std::pair<std::string, BoxStats>>& boxes, const Labels& labels);

}  // namespace xwalk::plot
