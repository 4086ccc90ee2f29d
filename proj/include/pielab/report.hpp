#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pielab::report {

/// Rows of a comma-separated table (RFC 4180 quoting), header included.
using Table = std::vector<std::vector<std::string>>;
Table parse_csv(std::string_view text);

/// One line of a chart. `y` holds the CSV cells verbatim; "undefined" cells
/// leave a gap.
struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<std::string> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  /// Tick positions and their labels along x.
  std::vector<std::pair<double, std::string>> x_ticks;
  std::vector<Series> series;
  /// Horizontal reference line (e.g. parity at 1.0).
  std::optional<double> reference;
};

/// Renders panels in a grid as a standalone SVG document. Every plotted point
/// carries its CSV cell in a data-value attribute and a tooltip.
std::string render_svg(std::string_view title, const std::vector<Panel>& panels, int columns = 2);

/// Input tables the report reads from a run directory, relative to its root.
const std::vector<std::string>& required_inputs();

struct Bundle {
  std::vector<std::filesystem::path> files;
};

/// Copies the analysis tables into `out_dir` and renders the five figures
/// (pie_fraction.svg, accuracy_pies.svg, class_distribution.svg,
/// influence_bins.svg, readability_ratios.svg). Missing inputs are reported
/// together in one MissingInputError before anything is written.
Bundle write_report(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace pielab::report
