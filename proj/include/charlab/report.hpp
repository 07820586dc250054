#pragma once

#include <map>
#include <string>
#include <vector>

#include "charlab/metrics.hpp"

namespace charlab::report {

struct Series {
    std::string name;
    std::vector<eval::CurvePoint> points;
};

// Minimal line plot as an SVG image file.
void write_plot_svg(const std::string& path, const std::string& title, const std::vector<Series>& series,
                    const std::string& x_label, const std::string& y_label);

// What one run directory left behind: the config echo, the training log and
// the final summary key=value file.
struct RunSummary {
    std::string dir;
    std::map<std::string, std::string> config;  // from config.txt
    std::map<std::string, std::string> final_info;  // from final.txt
    std::vector<eval::CurvePoint> loss_curve;
    std::vector<eval::CurvePoint> eval_loss_curve;
    std::vector<eval::CurvePoint> task_curve;
};

RunSummary summarize_run(const std::string& dir);

// Aggregates run directories into summary.csv, an architecture-grid CSV, a
// vocabulary-sweep CSV (when runs carry vocab_size), and loss-curve plots.
void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

std::string csv_escape(const std::string& s);

}  // namespace charlab::report
