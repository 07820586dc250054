#include "charlab/masking.hpp"

#include <algorithm>
#include <cmath>

#include "charlab/errors.hpp"

namespace charlab::objectives {

std::string to_string(MaskingScheme m) {
    switch (m) {
        case MaskingScheme::random: return "random";
        case MaskingScheme::whitespace: return "whitespace";
        case MaskingScheme::tokeniser: return "tokeniser";
    }
    return "?";
}

std::string to_string(PredictionTarget t) {
    switch (t) {
        case PredictionTarget::token: return "token";
        case PredictionTarget::indep_char: return "indep_char";
        case PredictionTarget::autoreg_char: return "autoreg_char";
    }
    return "?";
}

MaskingScheme masking_from_string(const std::string& s) {
    if (s == "random") return MaskingScheme::random;
    if (s == "whitespace") return MaskingScheme::whitespace;
    if (s == "tokeniser") return MaskingScheme::tokeniser;
    throw ConfigError("unknown masking scheme '" + s + "' (expected random | whitespace | tokeniser)");
}

PredictionTarget target_from_string(const std::string& s) {
    if (s == "token") return PredictionTarget::token;
    if (s == "indep_char") return PredictionTarget::indep_char;
    if (s == "autoreg_char") return PredictionTarget::autoreg_char;
    throw ConfigError("unknown prediction target '" + s + "' (expected token | indep_char | autoreg_char)");
}

void check_objective_cell(MaskingScheme m, PredictionTarget t) {
    if (!objective_cell_valid(m, t))
        throw ConfigError("objective cell " + to_string(m) + " x " + to_string(t) +
                          " is undefined: token targets classify a masked token id, and only tokeniser-aligned "
                          "spans carry one; use masking = tokeniser or a character-level target");
}

namespace {

std::vector<uint8_t> maskable_positions(const std::vector<uint32_t>& seq) {
    std::vector<uint8_t> ok(seq.size(), 0);
    for (size_t i = 0; i < seq.size(); ++i) ok[i] = text::is_special(seq[i]) ? 0 : 1;
    return ok;
}

size_t count_ones(const std::vector<uint8_t>& v) {
    size_t n = 0;
    for (const uint8_t b : v) n += b;
    return n;
}

void sort_spans(MaskingPlan& plan) {
    std::sort(plan.spans.begin(), plan.spans.end(),
              [](const MaskSpan& a, const MaskSpan& b) { return a.char_start < b.char_start; });
}

MaskSpan make_span(const std::vector<uint32_t>& seq, size_t start, size_t end) {
    MaskSpan s;
    s.char_start = start;
    s.char_end = end;
    s.gold.assign(seq.begin() + static_cast<long>(start), seq.begin() + static_cast<long>(end));
    return s;
}

}  // namespace

size_t sample_span_length(Rng& rng) {
    constexpr double kMeanLength = 4.0;  // matches the downsampling rate
    constexpr size_t kCap = 10;
    return std::min<size_t>(rng.geometric(1.0 / kMeanLength), kCap);
}

MaskingPlan plan_random(const std::vector<uint32_t>& seq, double mask_rate, Rng& rng) {
    if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("mask_rate must be in [0, 1]");
    MaskingPlan plan;
    plan.mask_rate = mask_rate;
    const std::vector<uint8_t> ok = maskable_positions(seq);
    plan.maskable_chars = count_ones(ok);
    if (plan.maskable_chars == 0) {
        plan.budget_shortfall = mask_rate > 0.0;
        return plan;
    }
    const size_t budget = static_cast<size_t>(std::llround(mask_rate * static_cast<double>(plan.maskable_chars)));
    if (budget == 0) return plan;

    std::vector<uint8_t> occupied(seq.size(), 0);
    size_t covered = 0;
    const size_t max_attempts = 64 + 32 * seq.size();
    size_t attempts = 0;
    while (covered < budget && attempts < max_attempts) {
        ++attempts;
        const size_t len = sample_span_length(rng);
        if (len > seq.size()) continue;
        const size_t start = static_cast<size_t>(rng.below(seq.size() - len + 1));
        bool usable = true;
        for (size_t i = start; i < start + len; ++i) {
            if (!ok[i] || occupied[i]) {
                usable = false;
                break;
            }
        }
        if (!usable) continue;
        for (size_t i = start; i < start + len; ++i) occupied[i] = 1;
        plan.spans.push_back(make_span(seq, start, start + len));
        covered += len;
    }
    if (covered < budget) plan.budget_shortfall = true;
    sort_spans(plan);
    return plan;
}

MaskingPlan plan_whitespace(const std::vector<uint32_t>& seq, double mask_rate, Rng& rng) {
    if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("mask_rate must be in [0, 1]");
    const std::vector<uint8_t> ok = maskable_positions(seq);

    // candidate spans: maximal runs of non-whitespace maskable characters
    std::vector<std::pair<size_t, size_t>> units;
    bool saw_whitespace = false;
    size_t i = 0;
    while (i < seq.size()) {
        if (!ok[i]) {
            ++i;
            continue;
        }
        if (text::is_whitespace(seq[i])) {
            saw_whitespace = true;
            ++i;
            continue;
        }
        const size_t start = i;
        while (i < seq.size() && ok[i] && !text::is_whitespace(seq[i])) ++i;
        units.emplace_back(start, i);
    }

    if (!saw_whitespace || units.empty()) {
        // unsegmented orthography: no whitespace-delimited units to sample
        MaskingPlan plan = plan_random(seq, mask_rate, rng);
        plan.whitespace_fallback = true;
        return plan;
    }

    MaskingPlan plan;
    plan.mask_rate = mask_rate;
    plan.maskable_chars = count_ones(ok);
    const size_t budget = static_cast<size_t>(std::llround(mask_rate * static_cast<double>(plan.maskable_chars)));
    if (budget == 0) return plan;

    std::vector<size_t> order(units.size());
    for (size_t u = 0; u < order.size(); ++u) order[u] = u;
    rng.shuffle(order);
    size_t covered = 0;
    for (const size_t u : order) {
        if (covered >= budget) break;
        const auto& [start, end] = units[u];
        plan.spans.push_back(make_span(seq, start, end));
        covered += end - start;
    }
    if (covered < budget) plan.budget_shortfall = true;
    sort_spans(plan);
    return plan;
}

MaskingPlan plan_tokeniser(const std::vector<uint32_t>& seq, const unigram::UnigramModel& model, double mask_rate,
                           Rng& rng) {
    if (mask_rate < 0.0 || mask_rate > 1.0) throw ConfigError("mask_rate must be in [0, 1]");
    MaskingPlan plan;
    plan.mask_rate = mask_rate;
    const std::vector<uint8_t> ok = maskable_positions(seq);
    plan.maskable_chars = count_ones(ok);
    if (plan.maskable_chars == 0) {
        plan.budget_shortfall = mask_rate > 0.0;
        return plan;
    }

    // segment the de-specialed text; positions map back through this index
    std::vector<size_t> position_of;
    std::vector<uint32_t> stripped;
    for (size_t i = 0; i < seq.size(); ++i) {
        if (ok[i]) {
            position_of.push_back(i);
            stripped.push_back(seq[i]);
        }
    }
    const unigram::Segmentation seg = model.segment(stripped);

    // candidates are whole non-whitespace tokens with a known vocabulary id
    struct Candidate {
        size_t start, end;  // positions in the original sequence
        int token_id;
    };
    std::vector<Candidate> candidates;
    for (const auto& span : seg.spans) {
        if (span.token_id < 0) continue;
        bool whitespace_only = true;
        for (size_t p = span.char_start; p < span.char_end; ++p)
            whitespace_only = whitespace_only && text::is_whitespace(stripped[p]);
        if (whitespace_only) continue;
        const size_t start = position_of[span.char_start];
        const size_t end = position_of[span.char_end - 1] + 1;
        if (end - start != span.char_end - span.char_start) continue;  // split by specials; cannot happen mid-text
        candidates.push_back({start, end, span.token_id});
    }
    const size_t budget = static_cast<size_t>(std::llround(mask_rate * static_cast<double>(plan.maskable_chars)));
    if (budget == 0) return plan;
    if (candidates.empty()) {
        plan.budget_shortfall = true;
        return plan;
    }

    std::vector<size_t> order(candidates.size());
    for (size_t u = 0; u < order.size(); ++u) order[u] = u;
    rng.shuffle(order);
    size_t covered = 0;
    for (const size_t u : order) {
        if (covered >= budget) break;
        const Candidate& c = candidates[u];
        MaskSpan span = make_span(seq, c.start, c.end);
        span.token_id = c.token_id;
        plan.spans.push_back(std::move(span));
        covered += c.end - c.start;
    }
    if (covered < budget) plan.budget_shortfall = true;
    sort_spans(plan);
    return plan;
}

std::vector<uint32_t> corrupt(const std::vector<uint32_t>& seq, MaskingPlan& plan,
                              const std::vector<uint32_t>& random_pool, Rng& rng, const CorruptionPolicy& policy) {
    if (policy.mask_prob < 0 || policy.random_prob < 0 || policy.mask_prob + policy.random_prob > 1.0)
        throw ConfigError("corruption probabilities must be non-negative and sum to at most 1");
    std::vector<uint32_t> out = seq;
    for (MaskSpan& span : plan.spans) {
        const double roll = rng.uniform();
        if (roll < policy.mask_prob) {
            span.action = CorruptAction::mask_chars;
            for (size_t i = span.char_start; i < span.char_end; ++i) out[i] = text::Specials::mask;
        } else if (roll < policy.mask_prob + policy.random_prob) {
            span.action = CorruptAction::random_chars;
            if (random_pool.empty()) throw DataError("corrupt: random replacement needs a codepoint pool");
            for (size_t i = span.char_start; i < span.char_end; ++i)
                out[i] = random_pool[rng.below(random_pool.size())];
        } else {
            span.action = CorruptAction::keep;
        }
    }
    return out;
}

}  // namespace charlab::objectives
