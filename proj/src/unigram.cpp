#include "charlab/unigram.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "charlab/text.hpp"

namespace charlab::unigram {

namespace {

using U32String = std::basic_string<uint32_t>;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    if (a < b) std::swap(a, b);
    return a + std::log1p(std::exp(b - a));
}

std::string u32_to_utf8(const uint32_t* data, size_t len) {
    std::string out;
    for (size_t i = 0; i < len; ++i) out += text::encode_utf8(data[i]);
    return out;
}

// Whitespace-delimited words of a document, with character offsets.
struct Word {
    U32String chars;
    size_t offset = 0;
};

std::vector<Word> split_words(const std::vector<uint32_t>& cps) {
    std::vector<Word> words;
    size_t i = 0;
    while (i < cps.size()) {
        if (text::is_whitespace(cps[i])) {
            ++i;
            continue;
        }
        Word w;
        w.offset = i;
        while (i < cps.size() && !text::is_whitespace(cps[i])) w.chars.push_back(cps[i++]);
        words.push_back(std::move(w));
    }
    return words;
}

// Lattice edges over one word against a (token -> id) lookup; each start
// position lists (length, token id). Unknown codepoints produce no edge.
struct Lattice {
    size_t n = 0;
    std::vector<std::vector<std::pair<size_t, int>>> starts;  // per position
};

Lattice build_lattice(const U32String& word, const std::unordered_map<std::string, int>& lookup,
                      size_t max_token_chars) {
    Lattice lat;
    lat.n = word.size();
    lat.starts.resize(lat.n);
    for (size_t i = 0; i < lat.n; ++i) {
        std::string key;
        const size_t max_len = std::min(max_token_chars, lat.n - i);
        for (size_t len = 1; len <= max_len; ++len) {
            key += text::encode_utf8(word[i + len - 1]);
            const auto it = lookup.find(key);
            if (it != lookup.end()) lat.starts[i].emplace_back(len, it->second);
        }
    }
    return lat;
}

}  // namespace

// ---------------------------------------------------------------------------
// model plumbing
// ---------------------------------------------------------------------------

int UnigramModel::token_id(const std::string& token) const {
    const auto it = lookup_.find(token);
    return it == lookup_.end() ? -1 : it->second;
}

bool UnigramModel::is_singleton_codepoint(uint32_t codepoint) const {
    return singleton_ids_.count(codepoint) > 0;
}

void UnigramModel::finalize() {
    std::vector<size_t> order(tokens_.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return tokens_[a] < tokens_[b]; });
    std::vector<std::string> tokens;
    std::vector<double> log_probs;
    tokens.reserve(order.size());
    log_probs.reserve(order.size());
    for (const size_t i : order) {
        tokens.push_back(std::move(tokens_[i]));
        log_probs.push_back(log_probs_[i]);
    }
    tokens_ = std::move(tokens);
    log_probs_ = std::move(log_probs);
    lookup_.clear();
    singleton_ids_.clear();
    max_token_chars_ = 1;
    min_log_prob_ = 0.0;
    for (size_t i = 0; i < tokens_.size(); ++i) {
        lookup_[tokens_[i]] = static_cast<int>(i);
        const text::DecodeResult dec = text::decode_text(tokens_[i]);
        max_token_chars_ = std::max(max_token_chars_, dec.sequence.size());
        if (dec.sequence.size() == 1) singleton_ids_[dec.sequence.codepoints[0]] = static_cast<int>(i);
        min_log_prob_ = std::min(min_log_prob_, log_probs_[i]);
    }
}

// ---------------------------------------------------------------------------
// Viterbi segmentation
// ---------------------------------------------------------------------------

Segmentation UnigramModel::segment(const std::vector<uint32_t>& text_cps) const {
    if (text_cps.empty()) throw DataError("unigram: cannot segment empty text");
    Segmentation out;
    size_t i = 0;
    while (i < text_cps.size()) {
        if (text::is_whitespace(text_cps[i])) {
            // whitespace characters are their own segments, never part of a token
            TokenSpan span;
            span.token = text::encode_utf8(text_cps[i]);
            span.char_start = i;
            span.char_end = i + 1;
            span.token_id = token_id(span.token);
            if (span.token_id >= 0) {
                out.score += log_probs_[static_cast<size_t>(span.token_id)];
            } else {
                out.score += unk_log_prob();
                ++out.unk_count;
            }
            out.spans.push_back(std::move(span));
            ++i;
            continue;
        }
        U32String word;
        const size_t word_offset = i;
        while (i < text_cps.size() && !text::is_whitespace(text_cps[i])) word.push_back(text_cps[i++]);

        const Lattice lat = build_lattice(word, lookup_, max_token_chars_);
        const size_t n = lat.n;
        std::vector<double> best(n + 1, kNegInf);
        std::vector<std::pair<size_t, int>> back(n + 1, {0, -2});  // (prev position, token id)
        best[0] = 0.0;
        for (size_t pos = 0; pos < n; ++pos) {
            if (best[pos] == kNegInf) continue;
            bool has_edge = false;
            for (const auto& [len, id] : lat.starts[pos]) {
                has_edge = has_edge || (len == 1);
                const double cand = best[pos] + log_probs_[static_cast<size_t>(id)];
                if (cand > best[pos + len]) {
                    best[pos + len] = cand;
                    back[pos + len] = {pos, id};
                }
            }
            if (!has_edge) {
                // unknown codepoint: fall back to a floor-probability singleton
                const double cand = best[pos] + unk_log_prob();
                if (cand > best[pos + 1]) {
                    best[pos + 1] = cand;
                    back[pos + 1] = {pos, -1};
                }
            }
        }
        std::vector<TokenSpan> word_spans;
        size_t pos = n;
        while (pos > 0) {
            const auto& [prev, id] = back[pos];
            TokenSpan span;
            span.char_start = word_offset + prev;
            span.char_end = word_offset + pos;
            span.token = u32_to_utf8(word.data() + prev, pos - prev);
            span.token_id = id;
            if (id == -1) ++out.unk_count;
            word_spans.push_back(std::move(span));
            pos = prev;
        }
        std::reverse(word_spans.begin(), word_spans.end());
        out.score += best[n];
        for (auto& s : word_spans) out.spans.push_back(std::move(s));
    }
    return out;
}

// ---------------------------------------------------------------------------
// forward-backward marginals
// ---------------------------------------------------------------------------

Marginals UnigramModel::marginals(const std::vector<uint32_t>& text_cps) const {
    if (text_cps.empty()) throw DataError("unigram: cannot take marginals of empty text");
    Marginals out;
    size_t i = 0;
    while (i < text_cps.size()) {
        if (text::is_whitespace(text_cps[i])) {
            const std::string tok = text::encode_utf8(text_cps[i]);
            out.expected_counts[tok] += 1.0;
            const int id = token_id(tok);
            out.log_partition += id >= 0 ? log_probs_[static_cast<size_t>(id)] : unk_log_prob();
            ++i;
            continue;
        }
        U32String word;
        while (i < text_cps.size() && !text::is_whitespace(text_cps[i])) word.push_back(text_cps[i++]);

        const Lattice lat = build_lattice(word, lookup_, max_token_chars_);
        const size_t n = lat.n;
        // add unknown-codepoint fallback edges so the lattice always connects
        std::vector<std::vector<std::pair<size_t, double>>> edges(n);  // (len, logp) per start
        std::vector<std::vector<int>> edge_ids(n);
        for (size_t pos = 0; pos < n; ++pos) {
            bool has_singleton = false;
            for (const auto& [len, id] : lat.starts[pos]) {
                edges[pos].emplace_back(len, log_probs_[static_cast<size_t>(id)]);
                edge_ids[pos].push_back(id);
                has_singleton = has_singleton || (len == 1);
            }
            if (!has_singleton) {
                edges[pos].emplace_back(1, unk_log_prob());
                edge_ids[pos].push_back(-1);
            }
        }
        std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
        alpha[0] = 0.0;
        for (size_t pos = 0; pos < n; ++pos) {
            if (alpha[pos] == kNegInf) continue;
            for (const auto& [len, lp] : edges[pos]) alpha[pos + len] = log_add(alpha[pos + len], alpha[pos] + lp);
        }
        beta[n] = 0.0;
        for (size_t pos = n; pos-- > 0;) {
            for (const auto& [len, lp] : edges[pos])
                if (beta[pos + len] != kNegInf) beta[pos] = log_add(beta[pos], lp + beta[pos + len]);
        }
        const double z = alpha[n];
        out.log_partition += z;
        for (size_t pos = 0; pos < n; ++pos) {
            if (alpha[pos] == kNegInf) continue;
            for (size_t e = 0; e < edges[pos].size(); ++e) {
                const auto& [len, lp] = edges[pos][e];
                if (beta[pos + len] == kNegInf) continue;
                const double posterior = std::exp(alpha[pos] + lp + beta[pos + len] - z);
                const int id = edge_ids[pos][e];
                const std::string tok =
                    id >= 0 ? tokens_[static_cast<size_t>(id)] : u32_to_utf8(word.data() + pos, len);
                out.expected_counts[tok] += posterior;
            }
        }
    }
    return out;
}

double UnigramModel::corpus_log_likelihood(const std::vector<std::vector<uint32_t>>& docs) const {
    double total = 0.0;
    for (const auto& doc : docs)
        for (const Word& w : split_words(doc)) {
            Marginals m = marginals(std::vector<uint32_t>(w.chars.begin(), w.chars.end()));
            total += m.log_partition;
        }
    return total;
}

// ---------------------------------------------------------------------------
// serialisation: "token<TAB>log_prob" per line, sorted by token
// ---------------------------------------------------------------------------

void UnigramModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("unigram: cannot write " + path);
    char buf[64];
    for (size_t i = 0; i < tokens_.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g", log_probs_[i]);
        out << tokens_[i] << '\t' << buf << '\n';
    }
}

UnigramModel UnigramModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("unigram: cannot open " + path);
    UnigramModel model;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const size_t tab = line.rfind('\t');
        if (tab == std::string::npos || tab == 0)
            throw DataError("unigram: " + path + ": line " + std::to_string(line_no) + ": expected token<TAB>log_prob");
        model.tokens_.push_back(line.substr(0, tab));
        try {
            model.log_probs_.push_back(std::stod(line.substr(tab + 1)));
        } catch (const std::exception&) {
            throw DataError("unigram: " + path + ": line " + std::to_string(line_no) + ": bad log_prob");
        }
        if (model.log_probs_.back() > 0.0)
            throw DataError("unigram: " + path + ": line " + std::to_string(line_no) + ": log_prob must be <= 0");
    }
    if (model.tokens_.empty()) throw DataError("unigram: " + path + " holds no tokens");
    model.finalize();
    return model;
}

// ---------------------------------------------------------------------------
// training: seed with frequent substrings, EM + prune until the target size
// ---------------------------------------------------------------------------

namespace {

struct WordCount {
    U32String chars;
    int64_t freq = 0;
};

struct TrainState {
    std::vector<U32String> tokens;
    std::vector<double> log_probs;
    std::vector<bool> is_singleton;
    std::unordered_map<std::string, int> lookup;
    size_t max_token_chars = 1;

    void rebuild_lookup() {
        lookup.clear();
        max_token_chars = 1;
        for (size_t i = 0; i < tokens.size(); ++i) {
            lookup[u32_to_utf8(tokens[i].data(), tokens[i].size())] = static_cast<int>(i);
            max_token_chars = std::max(max_token_chars, tokens[i].size());
        }
    }
};

// E-step over all words; returns (expected counts, corpus log-likelihood).
std::pair<std::vector<double>, double> e_step(const TrainState& st, const std::vector<WordCount>& words) {
    std::vector<double> counts(st.tokens.size(), 0.0);
    double ll = 0.0;
    for (const WordCount& wc : words) {
        const Lattice lat = build_lattice(wc.chars, st.lookup, st.max_token_chars);
        const size_t n = lat.n;
        std::vector<double> alpha(n + 1, kNegInf), beta(n + 1, kNegInf);
        alpha[0] = 0.0;
        for (size_t pos = 0; pos < n; ++pos) {
            if (alpha[pos] == kNegInf) continue;
            for (const auto& [len, id] : lat.starts[pos])
                alpha[pos + len] = log_add(alpha[pos + len], alpha[pos] + st.log_probs[static_cast<size_t>(id)]);
        }
        beta[n] = 0.0;
        for (size_t pos = n; pos-- > 0;) {
            for (const auto& [len, id] : lat.starts[pos])
                if (beta[pos + len] != kNegInf)
                    beta[pos] = log_add(beta[pos], st.log_probs[static_cast<size_t>(id)] + beta[pos + len]);
        }
        const double z = alpha[n];
        ll += z * static_cast<double>(wc.freq);
        for (size_t pos = 0; pos < n; ++pos) {
            if (alpha[pos] == kNegInf) continue;
            for (const auto& [len, id] : lat.starts[pos]) {
                if (beta[pos + len] == kNegInf) continue;
                const double post =
                    std::exp(alpha[pos] + st.log_probs[static_cast<size_t>(id)] + beta[pos + len] - z);
                counts[static_cast<size_t>(id)] += post * static_cast<double>(wc.freq);
            }
        }
    }
    return {std::move(counts), ll};
}

// M-step: renormalise token probabilities from expected counts. Tokens with
// zero count (singletons that only occur in whitespace) get a floor instead,
// which cannot affect word-lattice likelihoods.
void m_step(TrainState& st, const std::vector<double>& counts) {
    double total = 0.0;
    for (const double c : counts) total += c;
    double min_lp = 0.0;
    for (size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] > 0.0) {
            st.log_probs[i] = std::log(counts[i]) - std::log(total);
            min_lp = std::min(min_lp, st.log_probs[i]);
        }
    }
    for (size_t i = 0; i < counts.size(); ++i)
        if (counts[i] <= 0.0) st.log_probs[i] = min_lp - 10.0;
}

// Best alternative segmentation score of token i's own string with the token
// itself excluded; used to rank pruning candidates by likelihood loss.
double alternative_score(const TrainState& st, size_t token_index) {
    const U32String& word = st.tokens[token_index];
    const Lattice lat = build_lattice(word, st.lookup, st.max_token_chars);
    const size_t n = lat.n;
    std::vector<double> best(n + 1, kNegInf);
    best[0] = 0.0;
    for (size_t pos = 0; pos < n; ++pos) {
        if (best[pos] == kNegInf) continue;
        for (const auto& [len, id] : lat.starts[pos]) {
            if (static_cast<size_t>(id) == token_index) continue;
            best[pos + len] = std::max(best[pos + len], best[pos] + st.log_probs[static_cast<size_t>(id)]);
        }
    }
    return best[n];
}

}  // namespace

UnigramModel UnigramModel::train(const std::vector<std::vector<uint32_t>>& docs, size_t target_vocab_size,
                                 const TrainOptions& options, TrainStats* stats) {
    // gather word frequencies and the codepoint inventory
    std::map<U32String, int64_t> word_freq;
    std::map<uint32_t, int64_t> codepoints;
    for (const auto& doc : docs) {
        for (const uint32_t c : doc) ++codepoints[c];
        for (const Word& w : split_words(doc)) ++word_freq[w.chars];
    }
    if (codepoints.empty()) throw DataError("unigram: training corpus is empty");
    if (target_vocab_size < codepoints.size())
        throw ConfigError("unigram: target vocabulary size " + std::to_string(target_vocab_size) +
                          " is smaller than the codepoint inventory (" + std::to_string(codepoints.size()) + ")");

    std::vector<WordCount> words;
    words.reserve(word_freq.size());
    for (const auto& [chars, freq] : word_freq) words.push_back({chars, freq});

    // substring occurrence counts, up to max_seed_token_len characters
    std::map<U32String, int64_t> substring_counts;
    for (const WordCount& wc : words) {
        const size_t n = wc.chars.size();
        for (size_t i = 0; i < n; ++i) {
            const size_t max_len = std::min(options.max_seed_token_len, n - i);
            for (size_t len = 2; len <= max_len; ++len)
                substring_counts[wc.chars.substr(i, len)] += wc.freq;
        }
    }

    TrainState st;
    // singletons first: every observed codepoint, never pruned
    for (const auto& [cp, freq] : codepoints) {
        st.tokens.push_back(U32String(1, cp));
        st.log_probs.push_back(static_cast<double>(freq));  // raw counts; normalised below
        st.is_singleton.push_back(true);
    }
    // then the highest-scoring substrings (frequency x length, deterministic ties)
    const size_t seed_cap = static_cast<size_t>(options.seed_multiplier) * target_vocab_size;
    std::vector<std::pair<const U32String*, int64_t>> ranked;
    ranked.reserve(substring_counts.size());
    for (const auto& [sub, count] : substring_counts)
        ranked.emplace_back(&sub, count * static_cast<int64_t>(sub.size()));
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return *a.first < *b.first;
    });
    for (const auto& [sub, score] : ranked) {
        if (st.tokens.size() >= seed_cap) break;
        st.tokens.push_back(*sub);
        st.log_probs.push_back(static_cast<double>(substring_counts.at(*sub)));
        st.is_singleton.push_back(false);
    }
    // initial probabilities proportional to raw occurrence counts
    {
        double total = 0.0;
        for (const double c : st.log_probs) total += c;
        for (double& lp : st.log_probs) lp = std::log(lp) - std::log(total);
    }
    st.rebuild_lookup();

    TrainStats local_stats;
    TrainStats& ts = stats ? *stats : local_stats;
    for (;;) {
        // EM round
        ts.round_log_likelihoods.emplace_back();
        std::vector<double> counts;
        for (int iter = 0; iter < options.em_iters_per_round; ++iter) {
            auto [c, ll] = e_step(st, words);
            counts = std::move(c);
            ts.round_log_likelihoods.back().push_back(ll);
            m_step(st, counts);
        }
        ++ts.rounds;
        if (st.tokens.size() <= target_vocab_size) break;

        // prune the tokens whose removal costs the least likelihood
        struct Candidate {
            size_t index;
            double loss;
        };
        std::vector<Candidate> candidates;
        size_t prunable = 0;
        for (size_t i = 0; i < st.tokens.size(); ++i) {
            if (st.is_singleton[i]) continue;
            ++prunable;
            const double alt = alternative_score(st, i);
            const double count = counts.empty() ? 0.0 : counts[i];
            const double loss = alt == kNegInf ? std::numeric_limits<double>::max()
                                               : count * (st.log_probs[i] - alt);
            candidates.push_back({i, loss});
        }
        size_t n_drop = static_cast<size_t>(std::ceil(options.prune_fraction * static_cast<double>(prunable)));
        n_drop = std::min(n_drop, st.tokens.size() - target_vocab_size);
        n_drop = std::max<size_t>(n_drop, 1);
        n_drop = std::min(n_drop, candidates.size());
        std::sort(candidates.begin(), candidates.end(), [&](const Candidate& a, const Candidate& b) {
            if (a.loss != b.loss) return a.loss < b.loss;
            return st.tokens[a.index] < st.tokens[b.index];
        });
        std::vector<bool> drop(st.tokens.size(), false);
        for (size_t k = 0; k < n_drop; ++k) drop[candidates[k].index] = true;
        TrainState next;
        for (size_t i = 0; i < st.tokens.size(); ++i) {
            if (drop[i]) continue;
            next.tokens.push_back(st.tokens[i]);
            next.log_probs.push_back(st.log_probs[i]);
            next.is_singleton.push_back(st.is_singleton[i]);
        }
        st = std::move(next);
        st.rebuild_lookup();
    }

    UnigramModel model;
    for (size_t i = 0; i < st.tokens.size(); ++i) {
        model.tokens_.push_back(u32_to_utf8(st.tokens[i].data(), st.tokens[i].size()));
        model.log_probs_.push_back(st.log_probs[i]);
    }
    model.finalize();
    return model;
}

}  // namespace charlab::unigram
