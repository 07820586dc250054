#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "charlab/errors.hpp"

namespace charlab::eval {

// A labelled character-index interval, [start, end) exclusive.
struct LabelledSpan {
    int64_t start = 0;
    int64_t end = 0;
    std::string label;

    bool operator==(const LabelledSpan& o) const { return start == o.start && end == o.end && label == o.label; }
    bool operator<(const LabelledSpan& o) const {
        if (start != o.start) return start < o.start;
        if (end != o.end) return end < o.end;
        return label < o.label;
    }
};

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Exact-span matching over parallel example lists. No predictions against a
// nonempty gold set scores precision 0 by convention. Overlapping gold spans
// within an example are a dataset error and rejected.
PRF span_f1(const std::vector<std::vector<LabelledSpan>>& predictions,
            const std::vector<std::vector<LabelledSpan>>& gold);

// Unweighted mean over languages.
double macro_average(const std::vector<double>& per_language);

struct CurvePoint {
    int64_t step = 0;
    double value = 0.0;
};

// Trapezoidal area under the curve from step 0 to total_steps, divided by
// total_steps. The metric is 0 before the first point and holds its last
// value after the final point.
double auc_f1(const std::vector<CurvePoint>& curve, int64_t total_steps);

}  // namespace charlab::eval
