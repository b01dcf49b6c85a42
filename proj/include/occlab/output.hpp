#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "occlab/experiments.hpp"

namespace occlab {

/// Raised when an output directory already holds files and overwriting was not requested.
class OutputCollision : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Creates `dir` (and parents). Throws OutputCollision if it is non-empty and `force` is false.
void prepare_output_dir(const std::string& dir, bool force);

void write_text(const std::string& path, const std::string& content);

/// Header `experiment,method,seed,x,metric,value`; values printed with 17 significant digits.
std::string metrics_csv(const std::vector<MetricsRecord>& records);
/// Header `experiment,method,seed,x,seconds`.
std::string timing_csv(const std::vector<TimingRecord>& records);

struct PlotSeries {
    std::string name;
    std::vector<std::pair<double, double>> points;
    /// Optional ±band around each point (same length as points or empty).
    std::vector<double> band;
};

struct PlotOptions {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    int width = 640;
    int height = 420;
};

/// Self-contained SVG line chart.
std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotOptions& options);

}  // namespace occlab
