#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "errors.hpp"

namespace fsdde {
namespace io {

/// Full-precision numeric formatting shared by every emitted file:
/// 17 significant digits, '.' decimal separator.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// CSV with '\n' line endings, written in binary mode so the bytes are the
/// same on every platform.
class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) {
        out_.open(path, std::ios::binary);
        if (!out_) throw ConfigError("cannot open output file: " + path);
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) out_ << ',';
            out_ << header[i];
        }
        out_ << '\n';
    }

    void row(std::initializer_list<double> values) {
        std::size_t i = 0;
        for (double v : values) {
            if (i++) out_ << ',';
            out_ << fmt(v);
        }
        out_ << '\n';
    }

    void row_mixed(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

/// Minimal SVG polyline chart; the numeric payload is deterministic, only
/// the byte-identity guarantee of CSV/JSON is not extended to it.
class SvgPlot {
public:
    SvgPlot(double width = 720, double height = 480) : w_(width), h_(height) {}

    void add_series(const std::vector<double>& xs, const std::vector<double>& ys,
                    const std::string& color, const std::string& label) {
        series_.push_back({xs, ys, color, label});
    }

    void write(const std::string& path) const {
        double x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
        bool first = true;
        for (const auto& s : series_)
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (first) {
                    x_lo = x_hi = s.xs[i];
                    y_lo = y_hi = s.ys[i];
                    first = false;
                }
                x_lo = std::min(x_lo, s.xs[i]);
                x_hi = std::max(x_hi, s.xs[i]);
                y_lo = std::min(y_lo, s.ys[i]);
                y_hi = std::max(y_hi, s.ys[i]);
            }
        if (x_hi <= x_lo) x_hi = x_lo + 1;
        if (y_hi <= y_lo) y_hi = y_lo + 1;

        const double pad = 48;
        const auto px = [&](double x) { return pad + (x - x_lo) / (x_hi - x_lo) * (w_ - 2 * pad); };
        const auto py = [&](double y) { return h_ - pad - (y - y_lo) / (y_hi - y_lo) * (h_ - 2 * pad); };

        std::ofstream out(path, std::ios::binary);
        if (!out) throw ConfigError("cannot open output file: " + path);
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
            << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<line x1=\"" << pad << "\" y1=\"" << h_ - pad << "\" x2=\"" << w_ - pad << "\" y2=\""
            << h_ - pad << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
            << h_ - pad << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << pad << "\" y=\"" << h_ - pad / 3 << "\" font-size=\"12\">" << fmt(x_lo)
            << "</text>\n";
        out << "<text x=\"" << w_ - pad * 2 << "\" y=\"" << h_ - pad / 3 << "\" font-size=\"12\">"
            << fmt(x_hi) << "</text>\n";
        out << "<text x=\"4\" y=\"" << h_ - pad << "\" font-size=\"12\">" << fmt(y_lo)
            << "</text>\n";
        out << "<text x=\"4\" y=\"" << pad << "\" font-size=\"12\">" << fmt(y_hi) << "</text>\n";
        double legend_y = pad;
        for (const auto& s : series_) {
            out << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.xs.size(); ++i) {
                if (i) out << ' ';
                out << px(s.xs[i]) << ',' << py(s.ys[i]);
            }
            out << "\"/>\n";
            out << "<text x=\"" << w_ - pad * 3 << "\" y=\"" << legend_y << "\" font-size=\"12\" fill=\""
                << s.color << "\">" << s.label << "</text>\n";
            legend_y += 16;
        }
        out << "</svg>\n";
    }

private:
    struct Series {
        std::vector<double> xs, ys;
        std::string color, label;
    };
    double w_, h_;
    std::vector<Series> series_;
};

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory: " + dir);
}

} // namespace io
} // namespace fsdde
