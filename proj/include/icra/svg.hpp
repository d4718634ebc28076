#pragma once

#include <string>
#include <vector>

namespace icra::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Line chart with markers. In log-log mode non-positive points are dropped.
/// Output contains no timestamps, so identical input gives identical bytes.
std::string line_chart(const std::vector<Series>& series, const std::string& title, const std::string& x_label,
                       const std::string& y_label, bool loglog);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per bar name, NaN draws no bar
};

/// Grouped bar chart on [0, 1] (accuracies).
std::string bar_chart(const std::vector<BarGroup>& groups, const std::vector<std::string>& bar_names,
                      const std::string& title);

}  // namespace icra::svg
