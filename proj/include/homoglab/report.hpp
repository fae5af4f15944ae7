#pragma once

// CSV tables and static SVG log-log plots.

#include <cstdint>
#include <string>
#include <vector>

namespace homoglab {

/// Shortest round-trip decimal form; identical on every run.
std::string format_number(double v);
std::string format_number(std::int64_t v);
std::string format_number(std::uint64_t v);
inline std::string format_number(int v) { return format_number(static_cast<std::int64_t>(v)); }

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row);
  std::string to_csv() const;
};

std::uint64_t fnv1a64(const std::string& s);

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool line = true;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::string provenance;  ///< e.g. "config=<hash> seed=<seed>"
};

/// Log-log plot with ticks at powers of two; non-positive points are dropped.
/// Returns an empty string when no series has a plottable point.
std::string render_svg(const PlotSpec& plot);

/// Writes text to path, creating parent directories; throws IoError.
void write_file(const std::string& path, const std::string& text);

} // namespace homoglab
