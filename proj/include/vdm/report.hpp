#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "vdm/errors.hpp"

namespace vdm {

// Lossless decimal rendering: 17 significant digits round-trip any double.
std::string render_number(double v);

// CSV emitter: always a header row; numeric cells rendered losslessly so
// re-running with the same config and seed is byte-identical.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header);
    void row(const std::vector<double>& values);
    void row_mixed(const std::vector<std::string>& cells);
    ~CsvWriter();

  private:
    std::ofstream out_;
    std::string path_;
    std::size_t n_cols_;
};

// Minimal line-plot renderer; presentation only, never feeds back into
// numerics. One polyline per series over a shared x axis.
struct SvgSeries {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<double> x, y;
};
void svg_line_plot(const std::string& path, const std::string& title,
                   const std::vector<SvgSeries>& series);

// Scatter variant for 2-D samples.
void svg_scatter_plot(const std::string& path, const std::string& title,
                      const std::vector<SvgSeries>& series);

// Run manifest: config echo, code version, wall clock, metrics, verification
// summary. Written to a temp file and renamed, so it appears atomically.
class Manifest {
  public:
    void add(const std::string& key, const std::string& value) { lines_.push_back(key + ": " + value); }
    void add_num(const std::string& key, double v) { add(key, render_number(v)); }
    void write(const std::string& path) const;

  private:
    std::vector<std::string> lines_;
};

}  // namespace vdm
