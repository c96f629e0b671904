#include "vdm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace vdm {

std::string render_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : out_(path), path_(path), n_cols_(header.size()) {
    if (!out_) throw IoError("cannot open csv for writing: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) {
        out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
    }
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != n_cols_) throw DimensionError("csv row width differs from header: " + path_);
    for (std::size_t i = 0; i < values.size(); ++i) {
        out_ << render_number(values[i]) << (i + 1 < values.size() ? "," : "\n");
    }
}

void CsvWriter::row_mixed(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_) throw DimensionError("csv row width differs from header: " + path_);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        out_ << cells[i] << (i + 1 < cells.size() ? "," : "\n");
    }
}

CsvWriter::~CsvWriter() { out_.flush(); }

namespace {

constexpr int kW = 640, kH = 420, kPad = 50;

struct Extent {
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
};

Extent extent_of(const std::vector<SvgSeries>& series) {
    Extent e;
    bool first = true;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (first) {
                e = {s.x[i], s.x[i], s.y[i], s.y[i]};
                first = false;
            }
            e.xmin = std::min(e.xmin, s.x[i]);
            e.xmax = std::max(e.xmax, s.x[i]);
            e.ymin = std::min(e.ymin, s.y[i]);
            e.ymax = std::max(e.ymax, s.y[i]);
        }
    }
    if (e.xmax == e.xmin) e.xmax = e.xmin + 1;
    if (e.ymax == e.ymin) e.ymax = e.ymin + 1;
    return e;
}

void svg_header(std::ofstream& out, const std::string& title) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << title << "</text>\n"
        << "<rect x=\"" << kPad << "\" y=\"" << kPad << "\" width=\"" << kW - 2 * kPad << "\" height=\""
        << kH - 2 * kPad << "\" fill=\"none\" stroke=\"#999\"/>\n";
}

double sx(const Extent& e, double x) { return kPad + (x - e.xmin) / (e.xmax - e.xmin) * (kW - 2 * kPad); }
double sy(const Extent& e, double y) { return kH - kPad - (y - e.ymin) / (e.ymax - e.ymin) * (kH - 2 * kPad); }

void svg_legend(std::ofstream& out, const std::vector<SvgSeries>& series) {
    int y = kPad + 14;
    for (const auto& s : series) {
        out << "<text x=\"" << kPad + 8 << "\" y=\"" << y << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
            << s.color << "\">" << s.label << "</text>\n";
        y += 14;
    }
}

}  // namespace

void svg_line_plot(const std::string& path, const std::string& title,
                   const std::vector<SvgSeries>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open svg for writing: " + path);
    const Extent e = extent_of(series);
    svg_header(out, title);
    for (const auto& s : series) {
        out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << sx(e, s.x[i]) << "," << sy(e, s.y[i]) << " ";
        }
        out << "\"/>\n";
    }
    svg_legend(out, series);
    out << "</svg>\n";
}

void svg_scatter_plot(const std::string& path, const std::string& title,
                      const std::vector<SvgSeries>& series) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open svg for writing: " + path);
    const Extent e = extent_of(series);
    svg_header(out, title);
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            out << "<circle cx=\"" << sx(e, s.x[i]) << "\" cy=\"" << sy(e, s.y[i])
                << "\" r=\"1.5\" fill=\"" << s.color << "\" fill-opacity=\"0.6\"/>\n";
        }
    }
    svg_legend(out, series);
    out << "</svg>\n";
}

void Manifest::write(const std::string& path) const {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot open manifest for writing: " + tmp);
        for (const auto& l : lines_) out << l << "\n";
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move manifest into place: " + path);
}

}  // namespace vdm
