#include "charlab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "charlab/errors.hpp"

namespace charlab::report {

namespace fs = std::filesystem;

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream in(path);
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        std::string k = line.substr(0, eq);
        std::string v = line.substr(eq + 1);
        auto strip = [](std::string& s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
        };
        strip(k);
        strip(v);
        kv[k] = v;
    }
    return kv;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (const char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

}  // namespace

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

void write_plot_svg(const std::string& path, const std::string& title, const std::vector<Series>& series,
                    const std::string& x_label, const std::string& y_label) {
    constexpr double w = 720, h = 420, ml = 70, mr = 20, mt = 40, mb = 50;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    bool any = false;
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            const double x = static_cast<double>(p.step);
            if (!any) {
                x_min = x_max = x;
                y_min = y_max = p.value;
                any = true;
            } else {
                x_min = std::min(x_min, x);
                x_max = std::max(x_max, x);
                y_min = std::min(y_min, p.value);
                y_max = std::max(y_max, p.value);
            }
        }
    }
    if (x_max <= x_min) x_max = x_min + 1;
    if (y_max <= y_min) y_max = y_min + 1;
    auto sx = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * (w - ml - mr); };
    auto sy = [&](double y) { return h - mb - (y - y_min) / (y_max - y_min) * (h - mt - mb); };

    std::ofstream out(path);
    if (!out) throw DataError("report: cannot write " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << w / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title << "</text>\n";
    out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
        << "' stroke='black'/>\n";
    out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb << "' stroke='black'/>\n";
    out << "<text x='" << w / 2 << "' y='" << h - 12 << "' text-anchor='middle' font-size='12'>" << x_label
        << "</text>\n";
    out << "<text x='16' y='" << h / 2 << "' font-size='12' transform='rotate(-90 16 " << h / 2 << ")'>" << y_label
        << "</text>\n";
    for (const double t : {0.0, 0.5, 1.0}) {
        const double xv = x_min + t * (x_max - x_min);
        const double yv = y_min + t * (y_max - y_min);
        out << "<text x='" << sx(xv) << "' y='" << h - mb + 16 << "' text-anchor='middle' font-size='10'>"
            << fmt(xv) << "</text>\n";
        out << "<text x='" << ml - 6 << "' y='" << sy(yv) + 4 << "' text-anchor='end' font-size='10'>" << fmt(yv)
            << "</text>\n";
    }
    size_t color = 0;
    double legend_y = mt;
    for (const auto& s : series) {
        const char* stroke = kPalette[color % (sizeof(kPalette) / sizeof(kPalette[0]))];
        ++color;
        if (!s.points.empty()) {
            out << "<polyline fill='none' stroke='" << stroke << "' stroke-width='1.5' points='";
            for (const auto& p : s.points) out << sx(static_cast<double>(p.step)) << ',' << sy(p.value) << ' ';
            out << "'/>\n";
        }
        if (series.size() > 1) {
            out << "<rect x='" << w - mr - 150 << "' y='" << legend_y << "' width='12' height='3' fill='" << stroke
                << "'/>\n";
            out << "<text x='" << w - mr - 132 << "' y='" << legend_y + 5 << "' font-size='10'>" << s.name
                << "</text>\n";
            legend_y += 16;
        }
    }
    out << "</svg>\n";
}

RunSummary summarize_run(const std::string& dir) {
    RunSummary s;
    s.dir = dir;
    s.config = read_kv_file(dir + "/config.txt");
    s.final_info = read_kv_file(dir + "/final.txt");
    std::ifstream in(dir + "/metrics.csv");
    if (in) {
        std::string line;
        std::getline(in, line);  // header: step,loss,lr,grad_norm,eval_loss,task_f1
        while (std::getline(in, line)) {
            const auto cells = split_csv_line(line);
            if (cells.size() < 3 || cells[0].empty()) continue;
            const int64_t step = std::stoll(cells[0]);
            if (!cells[1].empty()) s.loss_curve.push_back({step, std::stod(cells[1])});
            if (cells.size() > 4 && !cells[4].empty()) s.eval_loss_curve.push_back({step, std::stod(cells[4])});
            if (cells.size() > 5 && !cells[5].empty()) s.task_curve.push_back({step, std::stod(cells[5])});
        }
    }
    return s;
}

void write_report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::vector<RunSummary> runs;
    for (const auto& dir : run_dirs) runs.push_back(summarize_run(dir));

    {
        std::ofstream out(out_dir + "/summary.csv");
        out << "run,model,downsampler,upsampler,masking,target,vocab_size,final_loss,best_eval_loss,best_task_f1,"
               "task_auc_f1\n";
        for (const auto& r : runs) {
            auto get = [&](const std::map<std::string, std::string>& m, const char* k) {
                const auto it = m.find(k);
                return it == m.end() ? std::string() : it->second;
            };
            std::string auc;
            if (!r.task_curve.empty() && !get(r.config, "total_steps").empty()) {
                const int64_t total = std::stoll(get(r.config, "total_steps"));
                if (r.task_curve.back().step <= total)
                    auc = fmt(eval::auc_f1(r.task_curve, total));
            }
            std::string best_eval, best_f1;
            if (!r.eval_loss_curve.empty()) {
                double best = r.eval_loss_curve[0].value;
                for (const auto& p : r.eval_loss_curve) best = std::min(best, p.value);
                best_eval = fmt(best);
            }
            if (!r.task_curve.empty()) {
                double best = r.task_curve[0].value;
                for (const auto& p : r.task_curve) best = std::max(best, p.value);
                best_f1 = fmt(best);
            }
            out << csv_escape(r.dir) << ',' << get(r.config, "model") << ',' << get(r.config, "downsampler") << ','
                << get(r.config, "upsampler") << ',' << get(r.config, "masking") << ',' << get(r.config, "target")
                << ',' << get(r.final_info, "vocab_size") << ',' << get(r.final_info, "final_loss") << ','
                << best_eval << ',' << best_f1 << ',' << auc << '\n';
        }
    }

    // architecture grid (downsampler x upsampler), one row per cell seen
    {
        std::ofstream out(out_dir + "/architecture_grid.csv");
        out << "upsampler,downsampler,final_loss,best_eval_loss,best_task_f1\n";
        for (const char* up : {"canine", "perceiver"}) {
            for (const char* down : {"canine", "charformer", "perceiver"}) {
                for (const auto& r : runs) {
                    const auto cu = r.config.find("upsampler");
                    const auto cd = r.config.find("downsampler");
                    const auto cm = r.config.find("model");
                    if (cu == r.config.end() || cd == r.config.end()) continue;
                    if (cm != r.config.end() && cm->second != "char") continue;
                    if (cu->second != up || cd->second != down) continue;
                    std::string best_eval, best_f1;
                    if (!r.eval_loss_curve.empty()) {
                        double best = r.eval_loss_curve[0].value;
                        for (const auto& p : r.eval_loss_curve) best = std::min(best, p.value);
                        best_eval = fmt(best);
                    }
                    if (!r.task_curve.empty()) {
                        double best = r.task_curve[0].value;
                        for (const auto& p : r.task_curve) best = std::max(best, p.value);
                        best_f1 = fmt(best);
                    }
                    const auto fl = r.final_info.find("final_loss");
                    out << up << ',' << down << ',' << (fl == r.final_info.end() ? "" : fl->second) << ','
                        << best_eval << ',' << best_f1 << '\n';
                }
            }
        }
    }

    // vocabulary sweep (model rows x vocab size columns), when present
    {
        std::set<int64_t> sizes;
        std::map<std::pair<std::string, int64_t>, std::string> cells;
        for (const auto& r : runs) {
            const auto vs = r.final_info.find("vocab_size");
            const auto tf = r.final_info.find("task_f1");
            const auto cm = r.config.find("model");
            if (vs == r.final_info.end() || cm == r.config.end()) continue;
            const int64_t size = std::stoll(vs->second);
            sizes.insert(size);
            std::string metric = tf != r.final_info.end() ? tf->second : std::string();
            if (metric.empty()) {
                const auto fl = r.final_info.find("final_loss");
                if (fl != r.final_info.end()) metric = fl->second;
            }
            cells[{cm->second, size}] = metric;
        }
        if (!sizes.empty()) {
            std::ofstream out(out_dir + "/vocab_sweep.csv");
            out << "model";
            for (const int64_t s : sizes) out << ",vocab_" << s;
            out << '\n';
            for (const char* m : {"token", "char"}) {
                out << m;
                for (const int64_t s : sizes) {
                    const auto it = cells.find({m, s});
                    out << ',' << (it == cells.end() ? "" : it->second);
                }
                out << '\n';
            }
        }
    }

    // loss curves, one plot across runs
    std::vector<Series> loss_series;
    for (const auto& r : runs) {
        if (r.loss_curve.empty()) continue;
        loss_series.push_back({fs::path(r.dir).filename().string(), r.loss_curve});
    }
    if (!loss_series.empty())
        write_plot_svg(out_dir + "/loss_curves.svg", "training loss", loss_series, "step", "loss");
    for (const auto& r : runs) {
        if (r.task_curve.empty()) continue;
        write_plot_svg(out_dir + "/task_curve_" + fs::path(r.dir).filename().string() + ".svg",
                       "rolling task metric", {{fs::path(r.dir).filename().string(), r.task_curve}}, "step", "f1");
    }
}

}  // namespace charlab::report
