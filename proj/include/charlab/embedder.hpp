#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "charlab/hashing.hpp"
#include "charlab/nn.hpp"
#include "charlab/tensor.hpp"
#include "charlab/text.hpp"

namespace charlab::model {

using nn::ForwardContext;
using nn::ParamStore;
using tensor::Tensor;

// Character input states: concatenated hash-embedding slices (K hashes into
// B buckets each, slice width d/K) plus a learnt table for the Basic
// Multilingual Plane plus learnt absolute position embeddings, then layer
// norm and dropout. Codepoints at or above 0x10000 draw nothing from the BMP
// table. The hash_only ablation zeroes the BMP contribution without changing
// any shape.
template <typename Real>
class CharEmbedder {
public:
    static constexpr int64_t kBmpSize = 65536;

    CharEmbedder() = default;

    CharEmbedder(ParamStore<Real>& store, const CodepointHasher& hasher, int64_t d, int64_t max_len, Rng& rng,
                 bool hash_only = false)
        : hasher_(hasher), d_(d), max_len_(max_len), hash_only_(hash_only) {
        const int k = hasher_.num_hashes();
        if (d % k != 0) throw ConfigError("embedder: hash count must divide model width");
        const int64_t slice = d / k;
        for (int h = 0; h < k; ++h)
            hash_tables_.push_back(store.add("embed.hash" + std::to_string(h),
                                             Tensor<Real>::randn({hasher_.buckets(), slice}, rng, 0.02), true));
        bmp_ = store.add("embed.bmp", Tensor<Real>::randn({kBmpSize, d}, rng, 0.02), true);
        pos_ = store.add("embed.pos", Tensor<Real>::randn({max_len, d}, rng, 0.02), true);
        norm_ = nn::LayerNorm<Real>(store, "embed.norm", d);
    }

    const CodepointHasher& hasher() const { return hasher_; }
    int64_t width() const { return d_; }
    int64_t max_len() const { return max_len_; }

    Tensor<Real> forward(const ForwardContext& ctx, const std::vector<uint32_t>& codepoints) const {
        const int64_t n = static_cast<int64_t>(codepoints.size());
        if (n == 0) throw DataError("embedder: empty sequence");
        if (n > max_len_)
            throw DataError("embedder: sequence length " + std::to_string(n) + " exceeds maximum " +
                            std::to_string(max_len_));
        const int k = hasher_.num_hashes();
        std::vector<Tensor<Real>> slices;
        slices.reserve(static_cast<size_t>(k));
        std::vector<int64_t> buckets(static_cast<size_t>(n));
        for (int h = 0; h < k; ++h) {
            for (int64_t i = 0; i < n; ++i)
                buckets[static_cast<size_t>(i)] = hasher_.bucket(codepoints[static_cast<size_t>(i)], h);
            slices.push_back(tensor::gather_rows(hash_tables_[static_cast<size_t>(h)], buckets));
        }
        Tensor<Real> x = tensor::concat(slices, 1);
        if (!hash_only_) {
            std::vector<int64_t> bmp_idx(static_cast<size_t>(n));
            Tensor<Real> in_bmp = Tensor<Real>::zeros({n, 1});
            for (int64_t i = 0; i < n; ++i) {
                const uint32_t c = codepoints[static_cast<size_t>(i)];
                bmp_idx[static_cast<size_t>(i)] = c < kBmpSize ? static_cast<int64_t>(c) : 0;
                in_bmp.values()[static_cast<size_t>(i)] = c < kBmpSize ? Real(1) : Real(0);
            }
            x = tensor::add(x, tensor::mul(tensor::gather_rows(bmp_, bmp_idx), in_bmp));
        }
        x = tensor::add(x, tensor::slice(pos_, 0, 0, n));
        return nn::maybe_dropout(ctx, norm_.forward(x));
    }

private:
    CodepointHasher hasher_;
    int64_t d_ = 0;
    int64_t max_len_ = 0;
    bool hash_only_ = false;
    std::vector<Tensor<Real>> hash_tables_;
    Tensor<Real> bmp_;
    Tensor<Real> pos_;
    nn::LayerNorm<Real> norm_;
};

}  // namespace charlab::model
