#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "charlab/rng.hpp"
#include "charlab/text.hpp"
#include "charlab/unigram.hpp"

namespace charlab::objectives {

enum class MaskingScheme { random, whitespace, tokeniser };
enum class PredictionTarget { token, indep_char, autoreg_char };

std::string to_string(MaskingScheme m);
std::string to_string(PredictionTarget t);
MaskingScheme masking_from_string(const std::string& s);
PredictionTarget target_from_string(const std::string& s);

// Token targets need token identities, which only tokeniser-aligned spans
// carry; the other masking schemes cannot feed a token classifier.
inline bool objective_cell_valid(MaskingScheme m, PredictionTarget t) {
    return t != PredictionTarget::token || m == MaskingScheme::tokeniser;
}

void check_objective_cell(MaskingScheme m, PredictionTarget t);  // throws ConfigError when invalid

enum class CorruptAction { mask_chars, random_chars, keep };

struct MaskSpan {
    size_t char_start = 0;  // [char_start, char_end)
    size_t char_end = 0;
    std::vector<uint32_t> gold;  // the original characters of the span
    int token_id = -1;           // tokeniser-aligned spans carry the token id
    CorruptAction action = CorruptAction::mask_chars;

    size_t length() const { return char_end - char_start; }
};

struct MaskingPlan {
    std::vector<MaskSpan> spans;  // disjoint, sorted by char_start
    double mask_rate = 0.0;
    size_t maskable_chars = 0;       // non-special characters in the sequence
    bool budget_shortfall = false;   // budget unattainable; plan is best-effort
    bool whitespace_fallback = false;  // whitespace scheme fell back to random

    size_t covered() const {
        size_t n = 0;
        for (const auto& s : spans) n += s.length();
        return n;
    }
    double covered_fraction() const {
        return maskable_chars == 0 ? 0.0 : static_cast<double>(covered()) / static_cast<double>(maskable_chars);
    }
};

// Span length distribution for random masking: geometric with mean 4,
// capped at 10. Exposed so its distribution can be tested directly.
size_t sample_span_length(Rng& rng);

// Random contiguous spans over non-special characters until the budget
// round(mask_rate * maskable) is covered; overlaps are resampled.
MaskingPlan plan_random(const std::vector<uint32_t>& seq, double mask_rate, Rng& rng);

// Spans are whole whitespace-delimited units, sampled without replacement;
// whitespace characters are never inside a span. Sequences without any
// whitespace fall back to plan_random with the fallback flag set.
MaskingPlan plan_whitespace(const std::vector<uint32_t>& seq, double mask_rate, Rng& rng);

// Spans are whole Viterbi tokens of the de-specialed text; each span carries
// both the token id (for token classification) and the characters.
MaskingPlan plan_tokeniser(const std::vector<uint32_t>& seq, const unigram::UnigramModel& model, double mask_rate,
                           Rng& rng);

struct CorruptionPolicy {
    double mask_prob = 0.8;
    double random_prob = 0.1;  // remainder keeps the span intact
};

// Applies the per-span corruption roll: replace the whole span with the mask
// codepoint, replace each character with a random corpus codepoint, or keep.
// Characters outside spans are never touched. Records each span's action.
std::vector<uint32_t> corrupt(const std::vector<uint32_t>& seq, MaskingPlan& plan,
                              const std::vector<uint32_t>& random_pool, Rng& rng,
                              const CorruptionPolicy& policy = {});

}  // namespace charlab::objectives
