#pragma once

#include "descramble/matrix.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace descramble::harness {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
  std::vector<double> column(const std::string& name) const;
};

void write_table_csv(const Table& t, const std::filesystem::path& path);
Table read_table_csv(const std::filesystem::path& path);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  bool logx = false;
  bool logy = false;
};

/// Static SVG line plot; nonpositive values are skipped on log axes.
void write_line_svg(const std::vector<Series>& series, const PlotSpec& spec, const std::filesystem::path& path);

/// Static SVG heatmap with a diverging palette centred at zero (or a
/// sequential one when every entry is nonnegative).
void write_heatmap_svg(const Matrix& a, const std::string& title, const std::filesystem::path& path);

/// Least-squares slope of log10(y) against log10(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace descramble::harness
