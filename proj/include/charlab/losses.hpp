#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "charlab/hashing.hpp"
#include "charlab/masking.hpp"
#include "charlab/model.hpp"
#include "charlab/nn.hpp"
#include "charlab/tensor.hpp"

// Loss constructors for the masking-scheme x prediction-target grid, applied
// to character-level model outputs. No loss term is ever attached to a
// position outside a masked span.

namespace charlab::objectives {

using nn::ForwardContext;
using nn::ParamStore;
using tensor::Tensor;

// Which character position of a masked span carries the token loss.
enum class TokenLossPosition { first, all_averaged };

// Linear classifier over the tokeniser vocabulary at the first character of
// each masked span (or averaged over all in-span positions).
template <typename Real>
class TokenLossHead {
public:
    TokenLossHead() = default;
    TokenLossHead(ParamStore<Real>& store, int64_t d, int64_t vocab_size, Rng& rng)
        : vocab_size_(vocab_size), head_(store, "head.token", d, vocab_size, rng) {}

    Tensor<Real> loss(const ForwardContext& ctx, const Tensor<Real>& char_out, const MaskingPlan& plan,
                      TokenLossPosition position = TokenLossPosition::first) const {
        std::vector<int64_t> rows;
        std::vector<int64_t> targets;
        for (const MaskSpan& span : plan.spans) {
            if (span.token_id < 0)
                throw DataError("token loss: masked span at " + std::to_string(span.char_start) +
                                " carries no token id (tokeniser-aligned masking required)");
            if (position == TokenLossPosition::first) {
                rows.push_back(static_cast<int64_t>(span.char_start));
                targets.push_back(span.token_id);
            } else {
                for (size_t p = span.char_start; p < span.char_end; ++p) {
                    rows.push_back(static_cast<int64_t>(p));
                    targets.push_back(span.token_id);
                }
            }
        }
        if (rows.empty()) throw DataError("token loss: plan has no masked spans");
        const Tensor<Real> logits = head_.forward(ctx, tensor::gather_rows(char_out, rows));
        return tensor::cross_entropy(logits, targets);
    }

    int64_t vocab_size() const { return vocab_size_; }
    const nn::Linear<Real>& head() const { return head_; }

private:
    int64_t vocab_size_ = 0;
    nn::Linear<Real> head_;
};

// Eight independent bucket classifications of the true codepoint's hashes at
// every masked character position; the hash functions are the embedder's.
template <typename Real>
class HashLossHead {
public:
    HashLossHead() = default;
    HashLossHead(ParamStore<Real>& store, const std::string& name, const CodepointHasher& hasher, int64_t d,
                 Rng& rng)
        : hasher_(hasher) {
        for (int k = 0; k < hasher_.num_hashes(); ++k)
            heads_.emplace_back(store, name + ".hash" + std::to_string(k), d, hasher_.buckets(), rng);
    }

    const CodepointHasher& hasher() const { return hasher_; }

    // states [P, d], gold[i] = true codepoint at that position;
    // loss = sum over hashes of the mean cross-entropy over positions
    Tensor<Real> loss_at(const ForwardContext& ctx, const Tensor<Real>& states,
                         const std::vector<uint32_t>& gold) const {
        if (states.dim(0) != static_cast<int64_t>(gold.size()))
            throw DataError("hash loss: one gold codepoint per state row required");
        Tensor<Real> total;
        std::vector<int64_t> targets(gold.size());
        for (int k = 0; k < hasher_.num_hashes(); ++k) {
            for (size_t i = 0; i < gold.size(); ++i) targets[i] = hasher_.bucket(gold[i], k);
            const Tensor<Real> term =
                tensor::cross_entropy(heads_[static_cast<size_t>(k)].forward(ctx, states), targets);
            total = k == 0 ? term : tensor::add(total, term);
        }
        return total;
    }

    // Per-position loss values (sum over hashes), computed from forward
    // values only; used by tests and greedy decoding diagnostics.
    std::vector<double> per_position_losses(const ForwardContext& ctx, const Tensor<Real>& states,
                                            const std::vector<uint32_t>& gold) const {
        std::vector<double> out(gold.size(), 0.0);
        for (int k = 0; k < hasher_.num_hashes(); ++k) {
            const Tensor<Real> logits = heads_[static_cast<size_t>(k)].forward(ctx, states);
            const int64_t b = logits.dim(1);
            for (size_t i = 0; i < gold.size(); ++i) {
                const Real* row = logits.values().data() + static_cast<int64_t>(i) * b;
                double mx = -1e300;
                for (int64_t j = 0; j < b; ++j) mx = std::max(mx, static_cast<double>(row[j]));
                double denom = 0.0;
                for (int64_t j = 0; j < b; ++j) denom += std::exp(static_cast<double>(row[j]) - mx);
                const int64_t target = hasher_.bucket(gold[i], k);
                out[i] += mx + std::log(denom) - static_cast<double>(row[target]);
            }
        }
        return out;
    }

    // Recover codepoints by intersecting the top-1 bucket of each hash over a
    // candidate alphabet; falls back to the best summed logit when the
    // intersection is not a single character.
    std::vector<uint32_t> decode(const ForwardContext& ctx, const Tensor<Real>& states,
                                 const std::vector<uint32_t>& alphabet) const {
        const int64_t p = states.dim(0);
        const int k_total = hasher_.num_hashes();
        std::vector<Tensor<Real>> logits;
        for (int k = 0; k < k_total; ++k) logits.push_back(heads_[static_cast<size_t>(k)].forward(ctx, states));
        std::vector<uint32_t> decoded(static_cast<size_t>(p));
        for (int64_t i = 0; i < p; ++i) {
            std::vector<int64_t> top(static_cast<size_t>(k_total));
            for (int k = 0; k < k_total; ++k) {
                const Real* row = logits[static_cast<size_t>(k)].values().data() + i * hasher_.buckets();
                top[static_cast<size_t>(k)] = static_cast<int64_t>(
                    std::max_element(row, row + hasher_.buckets()) - row);
            }
            uint32_t unique_match = 0;
            int matches = 0;
            double best_score = -1e300;
            uint32_t best_char = alphabet.empty() ? 0 : alphabet[0];
            for (const uint32_t c : alphabet) {
                bool all = true;
                double score = 0.0;
                for (int k = 0; k < k_total; ++k) {
                    const int64_t bucket = hasher_.bucket(c, k);
                    all = all && bucket == top[static_cast<size_t>(k)];
                    score += static_cast<double>(
                        logits[static_cast<size_t>(k)].values()[i * hasher_.buckets() + bucket]);
                }
                if (all) {
                    ++matches;
                    unique_match = c;
                }
                if (score > best_score) {
                    best_score = score;
                    best_char = c;
                }
            }
            decoded[static_cast<size_t>(i)] = matches == 1 ? unique_match : best_char;
        }
        return decoded;
    }

private:
    CodepointHasher hasher_;
    std::vector<nn::Linear<Real>> heads_;
};

// Independent character prediction over every masked position of the plan.
template <typename Real>
Tensor<Real> loss_independent_chars(const ForwardContext& ctx, const HashLossHead<Real>& heads,
                                    const Tensor<Real>& char_out, const MaskingPlan& plan) {
    std::vector<int64_t> rows;
    std::vector<uint32_t> gold;
    for (const MaskSpan& span : plan.spans)
        for (size_t p = span.char_start; p < span.char_end; ++p) {
            rows.push_back(static_cast<int64_t>(p));
            gold.push_back(span.gold[p - span.char_start]);
        }
    if (rows.empty()) throw DataError("independent char loss: plan has no masked spans");
    return heads.loss_at(ctx, tensor::gather_rows(char_out, rows), gold);
}

// Autoregressive per-span decoding: one transformer layer with span-causal
// attention consumes, per masked position, the model output plus the
// embedding of the previously revealed gold character (a learnt begin marker
// at the first in-span position), then classifies the eight hash buckets.
// Teacher forcing throughout: the prediction at in-span index t sees revealed
// characters strictly before t.
template <typename Real>
class SpanDecoder {
public:
    SpanDecoder() = default;
    SpanDecoder(ParamStore<Real>& store, const CodepointHasher& hasher, int64_t d, int64_t heads,
                int64_t ffw_hidden, Rng& rng)
        : hasher_(hasher), d_(d) {
        if (d % hasher.num_hashes() != 0) throw ConfigError("span decoder: hash count must divide model width");
        const int64_t slice = d / hasher.num_hashes();
        for (int k = 0; k < hasher.num_hashes(); ++k)
            prev_tables_.push_back(store.add("decoder.prev" + std::to_string(k),
                                             Tensor<Real>::randn({hasher.buckets(), slice}, rng, 0.02), true));
        begin_ = store.add("decoder.begin", Tensor<Real>::randn({1, d}, rng, 0.02), true);
        layer_ = nn::TransformerLayer<Real>(store, "decoder.layer", d, heads, ffw_hidden, rng);
        loss_heads_ = HashLossHead<Real>(store, "decoder.head", hasher, d, rng);
    }

    const HashLossHead<Real>& heads() const { return loss_heads_; }

    Tensor<Real> loss(const ForwardContext& ctx, const Tensor<Real>& char_out, const MaskingPlan& plan,
                      const std::vector<std::vector<uint32_t>>* forced_reveals = nullptr) const {
        std::vector<uint32_t> gold;
        const Tensor<Real> h = decode_states(ctx, char_out, plan, forced_reveals, &gold);
        return loss_heads_.loss_at(ctx, h, gold);
    }

    // Per-term losses in span-concatenation order, for the causality checks.
    std::vector<double> per_term_losses(const ForwardContext& ctx, const Tensor<Real>& char_out,
                                        const MaskingPlan& plan,
                                        const std::vector<std::vector<uint32_t>>* forced_reveals = nullptr) const {
        std::vector<uint32_t> gold;
        const Tensor<Real> h = decode_states(ctx, char_out, plan, forced_reveals, &gold);
        return loss_heads_.per_position_losses(ctx, h, gold);
    }

    // Greedy left-to-right decode of each span over a candidate alphabet.
    std::vector<std::vector<uint32_t>> greedy_decode(const ForwardContext& ctx, const Tensor<Real>& char_out,
                                                     const MaskingPlan& plan,
                                                     const std::vector<uint32_t>& alphabet) const {
        std::vector<std::vector<uint32_t>> revealed(plan.spans.size());
        size_t longest = 0;
        for (const auto& s : plan.spans) longest = std::max(longest, s.length());
        for (size_t t = 0; t < longest; ++t) {
            std::vector<uint32_t> gold;
            const Tensor<Real> h = decode_states(ctx, char_out, plan, &revealed, &gold);
            const std::vector<uint32_t> step = loss_heads_.decode(ctx, h, alphabet);
            size_t offset = 0;
            for (size_t si = 0; si < plan.spans.size(); ++si) {
                const size_t len = plan.spans[si].length();
                if (t < len) revealed[si].push_back(step[offset + t]);
                offset += len;
            }
        }
        return revealed;
    }

private:
    // Decoder inputs/outputs for all spans concatenated in order. Reveals
    // default to the gold characters (teacher forcing); tests may force a
    // different reveal stream to probe causality.
    Tensor<Real> decode_states(const ForwardContext& ctx, const Tensor<Real>& char_out, const MaskingPlan& plan,
                               const std::vector<std::vector<uint32_t>>* forced_reveals,
                               std::vector<uint32_t>* gold_out) const {
        if (plan.spans.empty()) throw DataError("span decoder: plan has no masked spans");
        std::vector<int64_t> rows;
        std::vector<int64_t> span_of;
        std::vector<Tensor<Real>> prev_parts;
        for (size_t si = 0; si < plan.spans.size(); ++si) {
            const MaskSpan& span = plan.spans[si];
            const size_t len = span.length();
            for (size_t p = 0; p < len; ++p) {
                rows.push_back(static_cast<int64_t>(span.char_start + p));
                span_of.push_back(static_cast<int64_t>(si));
                gold_out->push_back(span.gold[p]);
            }
            prev_parts.push_back(begin_);
            if (len > 1) {
                std::vector<uint32_t> reveals(span.gold.begin(), span.gold.end() - 1);
                if (forced_reveals) {
                    const auto& forced = (*forced_reveals)[si];
                    for (size_t p = 0; p < reveals.size() && p < forced.size(); ++p) reveals[p] = forced[p];
                }
                prev_parts.push_back(embed_reveals(reveals));
            }
        }
        const Tensor<Real> x = tensor::add(tensor::gather_rows(char_out, rows), tensor::concat(prev_parts, 0));
        const int64_t t_total = x.dim(0);
        Tensor<Real> mask = Tensor<Real>::zeros({t_total, t_total});
        auto& mv = mask.values();
        for (int64_t i = 0; i < t_total; ++i)
            for (int64_t j = 0; j < t_total; ++j)
                if (span_of[static_cast<size_t>(i)] != span_of[static_cast<size_t>(j)] || j > i)
                    mv[i * t_total + j] = static_cast<Real>(nn::kMaskOff);
        return layer_.forward(ctx, x, mask);
    }

    Tensor<Real> embed_reveals(const std::vector<uint32_t>& reveals) const {
        std::vector<Tensor<Real>> slices;
        std::vector<int64_t> buckets(reveals.size());
        for (int k = 0; k < hasher_.num_hashes(); ++k) {
            for (size_t i = 0; i < reveals.size(); ++i) buckets[i] = hasher_.bucket(reveals[i], k);
            slices.push_back(tensor::gather_rows(prev_tables_[static_cast<size_t>(k)], buckets));
        }
        return tensor::concat(slices, 1);
    }

    CodepointHasher hasher_;
    int64_t d_ = 0;
    std::vector<Tensor<Real>> prev_tables_;
    Tensor<Real> begin_;
    nn::TransformerLayer<Real> layer_;
    HashLossHead<Real> loss_heads_;
};

// The heads for one configured objective cell, built against a model's
// hasher so input embeddings and prediction targets share hash parameters.
template <typename Real>
class ObjectiveHeads {
public:
    ObjectiveHeads(ParamStore<Real>& store, MaskingScheme scheme, PredictionTarget target,
                   const CodepointHasher& hasher, int64_t d, int64_t heads, int64_t ffw_hidden,
                   int64_t token_vocab_size, Rng& rng)
        : scheme_(scheme), target_(target) {
        check_objective_cell(scheme, target);
        switch (target) {
            case PredictionTarget::token:
                token_head_ = TokenLossHead<Real>(store, d, token_vocab_size, rng);
                break;
            case PredictionTarget::indep_char:
                hash_head_ = HashLossHead<Real>(store, "head", hasher, d, rng);
                break;
            case PredictionTarget::autoreg_char:
                decoder_ = SpanDecoder<Real>(store, hasher, d, heads, ffw_hidden, rng);
                break;
        }
    }

    Tensor<Real> loss(const ForwardContext& ctx, const Tensor<Real>& char_out, const MaskingPlan& plan,
                      TokenLossPosition position = TokenLossPosition::first) const {
        switch (target_) {
            case PredictionTarget::token: return token_head_->loss(ctx, char_out, plan, position);
            case PredictionTarget::indep_char: return loss_independent_chars(ctx, *hash_head_, char_out, plan);
            case PredictionTarget::autoreg_char: return decoder_->loss(ctx, char_out, plan);
        }
        throw ConfigError("objective heads: unreachable target");
    }

    MaskingScheme scheme() const { return scheme_; }
    PredictionTarget target() const { return target_; }
    const std::optional<TokenLossHead<Real>>& token_head() const { return token_head_; }
    const std::optional<HashLossHead<Real>>& hash_head() const { return hash_head_; }
    const std::optional<SpanDecoder<Real>>& decoder() const { return decoder_; }

private:
    MaskingScheme scheme_;
    PredictionTarget target_;
    std::optional<TokenLossHead<Real>> token_head_;
    std::optional<HashLossHead<Real>> hash_head_;
    std::optional<SpanDecoder<Real>> decoder_;
};

}  // namespace charlab::objectives
