#include "occlab/output.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace occlab {

namespace fs = std::filesystem;

void prepare_output_dir(const std::string& dir, bool force) {
    if (dir.empty()) throw std::invalid_argument("output directory is empty");
    const fs::path p(dir);
    if (fs::exists(p)) {
        if (!fs::is_directory(p)) throw OutputCollision("output path exists and is not a directory: " + dir);
        if (!fs::is_empty(p) && !force)
            throw OutputCollision("output directory " + dir + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(p);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string metrics_csv(const std::vector<MetricsRecord>& records) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "experiment,method,seed,x,metric,value\n";
    for (const MetricsRecord& r : records)
        os << r.experiment << ',' << r.method << ',' << r.seed << ',' << r.x << ',' << r.metric << ',' << r.value
           << '\n';
    return os.str();
}

std::string timing_csv(const std::vector<TimingRecord>& records) {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "experiment,method,seed,x,seconds\n";
    for (const TimingRecord& r : records)
        os << r.experiment << ',' << r.method << ',' << r.seed << ',' << r.x << ',' << r.seconds << '\n';
    return os.str();
}

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
    const double left = 70, right = 170, top = 40, bottom = 50;
    const double pw = opt.width - left - right;
    const double ph = opt.height - top - bottom;
    auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!opt.log_x || x > 0) && (!opt.log_y || y > 0);
    };

    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const PlotSeries& s : series) {
        for (std::size_t k = 0; k < s.points.size(); ++k) {
            const auto [x, y] = s.points[k];
            const double b = k < s.band.size() ? s.band[k] : 0.0;
            for (double yy : {y - b, y, y + b}) {
                if (!usable(x, yy)) continue;
                x0 = std::min(x0, tx(x));
                x1 = std::max(x1, tx(x));
                y0 = std::min(y0, ty(yy));
                y1 = std::max(y1, ty(yy));
            }
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-12) x1 = x0 + 1;
    if (y1 - y0 < 1e-12) y1 = y0 + 1;
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    auto px = [&](double x) { return left + (tx(x) - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return top + ph - (ty(y) - y0) / (y1 - y0) * ph; };

    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opt.width << "\" height=\"" << opt.height
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << opt.width / 2.0 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
       << escape(opt.title) << "</text>\n";
    os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0;
        const double fy = y0 + (y1 - y0) * k / 4.0;
        const double vx = opt.log_x ? std::pow(10.0, fx) : fx;
        const double vy = opt.log_y ? std::pow(10.0, fy) : fy;
        const double gx = left + pw * k / 4.0;
        const double gy = top + ph - ph * k / 4.0;
        os << "<line x1=\"" << gx << "\" y1=\"" << top + ph << "\" x2=\"" << gx << "\" y2=\"" << top + ph + 5
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << gx << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << std::setprecision(3)
           << vx << "</text>\n";
        os << "<line x1=\"" << left - 5 << "\" y1=\"" << gy << "\" x2=\"" << left << "\" y2=\"" << gy
           << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << left - 8 << "\" y=\"" << gy + 4 << "\" text-anchor=\"end\">" << vy << "</text>\n"
           << std::setprecision(6);
    }
    os << "<text x=\"" << left + pw / 2 << "\" y=\"" << opt.height - 12 << "\" text-anchor=\"middle\">"
       << escape(opt.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
       << top + ph / 2 << ")\">" << escape(opt.y_label) << "</text>\n";

    for (std::size_t i = 0; i < series.size(); ++i) {
        const PlotSeries& s = series[i];
        const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
        if (!s.band.empty()) {
            std::ostringstream upper, lower;
            for (std::size_t k = 0; k < s.points.size(); ++k) {
                const auto [x, y] = s.points[k];
                const double b = k < s.band.size() ? s.band[k] : 0.0;
                if (!usable(x, y + b) || !usable(x, y - b)) continue;
                upper << px(x) << ',' << py(y + b) << ' ';
                lower.str(std::to_string(px(x)) + "," + std::to_string(py(y - b)) + " " + lower.str());
            }
            os << "<polygon points=\"" << upper.str() << lower.str() << "\" fill=\"" << color
               << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        }
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
        for (const auto& [x, y] : s.points)
            if (usable(x, y)) os << px(x) << ',' << py(y) << ' ';
        os << "\"/>\n";
        const double ly = top + 14 + 18 * static_cast<double>(i);
        os << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 32 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << left + pw + 36 << "\" y=\"" << ly + 4 << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace occlab
