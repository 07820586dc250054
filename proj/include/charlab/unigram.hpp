#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "charlab/errors.hpp"

namespace charlab::unigram {

// One segment of a segmentation: token string, [char_start, char_end) in the
// input, vocabulary id (-1 for an unknown-codepoint fallback segment).
struct TokenSpan {
    std::string token;
    size_t char_start = 0;
    size_t char_end = 0;
    int token_id = -1;
};

struct Segmentation {
    std::vector<TokenSpan> spans;
    double score = 0.0;  // sum of token log-probs
    size_t unk_count = 0;
};

struct Marginals {
    std::unordered_map<std::string, double> expected_counts;
    double log_partition = 0.0;  // log sum over all segmentations
};

struct TrainOptions {
    int seed_multiplier = 10;     // seed vocabulary capped at multiplier x target
    int em_iters_per_round = 2;   // EM iterations between prunes
    double prune_fraction = 0.2;  // fraction of prunable tokens removed per round
    size_t max_seed_token_len = 8;
};

struct TrainStats {
    // log-likelihood before each M-step, grouped by EM round; non-decreasing
    // within a round is the EM guarantee the tests pin down
    std::vector<std::vector<double>> round_log_likelihoods;
    size_t rounds = 0;
};

// Unigram language model over token strings. Token ids index the vocabulary
// in lexicographic (UTF-8 byte) order, which is also the serialisation order.
// Every codepoint observed in training data stays in the vocabulary, so any
// training-corpus string remains segmentable.
class UnigramModel {
public:
    UnigramModel() = default;

    static UnigramModel train(const std::vector<std::vector<uint32_t>>& docs, size_t target_vocab_size,
                              const TrainOptions& options = {}, TrainStats* stats = nullptr);

    size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::vector<double>& log_probs() const { return log_probs_; }
    int token_id(const std::string& token) const;
    double log_prob(int token_id) const { return log_probs_[static_cast<size_t>(token_id)]; }
    bool is_singleton_codepoint(uint32_t codepoint) const;

    // Highest-scoring segmentation. Whitespace is pre-split: whitespace
    // characters become their own single-character segments and multi-char
    // tokens never span whitespace. Offsets tile the input exactly.
    Segmentation segment(const std::vector<uint32_t>& text) const;

    // Forward-backward expected token counts over all segmentations.
    Marginals marginals(const std::vector<uint32_t>& text) const;

    // Sum over whitespace-delimited words of the log marginal likelihood.
    double corpus_log_likelihood(const std::vector<std::vector<uint32_t>>& docs) const;

    // One "token<TAB>log_prob" line per token, sorted by token, UTF-8.
    void save(const std::string& path) const;
    static UnigramModel load(const std::string& path);

    double unk_log_prob() const { return min_log_prob_ - 10.0; }

private:
    friend class Trainer;

    void finalize();  // sort, build lookup, record singleton codepoints

    std::vector<std::string> tokens_;
    std::vector<double> log_probs_;
    std::unordered_map<std::string, int> lookup_;
    std::unordered_map<uint32_t, int> singleton_ids_;
    size_t max_token_chars_ = 1;
    double min_log_prob_ = 0.0;
};

}  // namespace charlab::unigram
