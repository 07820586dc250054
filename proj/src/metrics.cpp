#include "charlab/metrics.hpp"

#include <algorithm>
#include <set>

namespace charlab::eval {

PRF span_f1(const std::vector<std::vector<LabelledSpan>>& predictions,
            const std::vector<std::vector<LabelledSpan>>& gold) {
    if (predictions.size() != gold.size())
        throw DataError("span_f1: prediction and gold example counts differ");
    size_t n_pred = 0, n_gold = 0, n_correct = 0;
    for (size_t ex = 0; ex < gold.size(); ++ex) {
        std::vector<LabelledSpan> g = gold[ex];
        std::sort(g.begin(), g.end());
        for (size_t i = 0; i + 1 < g.size(); ++i) {
            if (g[i + 1].start < g[i].end && g[i].start < g[i + 1].end)
                throw DataError("span_f1: overlapping gold spans in example " + std::to_string(ex));
        }
        const std::set<LabelledSpan> gold_set(g.begin(), g.end());
        std::set<LabelledSpan> seen;
        for (const auto& p : predictions[ex]) {
            if (!seen.insert(p).second) continue;  // duplicate predictions count once
            if (gold_set.count(p)) ++n_correct;
        }
        n_pred += seen.size();
        n_gold += gold_set.size();
    }
    PRF out;
    out.precision = n_pred == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n_pred);
    out.recall = n_gold == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n_gold);
    out.f1 = (out.precision + out.recall) == 0.0
                 ? 0.0
                 : 2.0 * out.precision * out.recall / (out.precision + out.recall);
    return out;
}

double macro_average(const std::vector<double>& per_language) {
    if (per_language.empty()) throw DataError("macro_average: no languages");
    double total = 0.0;
    for (const double v : per_language) total += v;
    return total / static_cast<double>(per_language.size());
}

double auc_f1(const std::vector<CurvePoint>& curve, int64_t total_steps) {
    if (curve.empty()) throw DataError("auc_f1: curve needs at least one point");
    if (total_steps <= 0) throw DataError("auc_f1: total_steps must be positive");
    for (size_t i = 0; i + 1 < curve.size(); ++i)
        if (curve[i + 1].step <= curve[i].step) throw DataError("auc_f1: curve steps must be strictly increasing");
    if (curve.front().step < 0 || curve.back().step > total_steps)
        throw DataError("auc_f1: curve steps must lie within [0, total_steps]");

    double area = 0.0;
    // zero before the first point contributes nothing
    for (size_t i = 0; i + 1 < curve.size(); ++i) {
        const double w = static_cast<double>(curve[i + 1].step - curve[i].step);
        area += 0.5 * (curve[i].value + curve[i + 1].value) * w;
    }
    area += curve.back().value * static_cast<double>(total_steps - curve.back().step);  // hold the last value
    return area / static_cast<double>(total_steps);
}

}  // namespace charlab::eval
