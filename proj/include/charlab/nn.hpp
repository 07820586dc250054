#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "charlab/tensor.hpp"

// Parameter registry and the transformer building blocks shared by the
// downsamplers, the deep core, and the upsamplers.

namespace charlab::nn {

using tensor::Tensor;

template <typename Real>
struct Param {
    std::string name;
    Tensor<Real> value;
    bool decay = true;  // weight decay skips biases and norm parameters
};

template <typename Real>
class ParamStore {
public:
    Tensor<Real> add(const std::string& name, Tensor<Real> t, bool decay) {
        t.set_requires_grad(true);
        params_.push_back(Param<Real>{name, t, decay});
        return t;
    }

    std::vector<Param<Real>>& params() { return params_; }
    const std::vector<Param<Real>>& params() const { return params_; }

    void zero_grads() {
        for (auto& p : params_) p.value.zero_grad();
    }

    int64_t count_values() const {
        int64_t n = 0;
        for (const auto& p : params_) n += p.value.numel();
        return n;
    }

private:
    std::vector<Param<Real>> params_;
};

// Per-forward context: dropout configuration and its RNG stream.
struct ForwardContext {
    double keep_prob = 1.0;  // 1 - dropout rate
    Rng* rng = nullptr;
};

template <typename Real>
Tensor<Real> maybe_dropout(const ForwardContext& ctx, const Tensor<Real>& x) {
    if (ctx.keep_prob >= 1.0 || tensor::eval_mode() || ctx.rng == nullptr) return x;
    return tensor::dropout(x, ctx.keep_prob, *ctx.rng);
}

// Dense layer; dropout is applied after the matrix multiply, matching the
// training recipe of dropping out after every matmul.
template <typename Real>
class Linear {
public:
    Linear() = default;
    Linear(ParamStore<Real>& store, const std::string& name, int64_t in, int64_t out, Rng& rng,
           double init_std = 0.02) {
        w_ = store.add(name + ".w", Tensor<Real>::randn({in, out}, rng, init_std), true);
        b_ = store.add(name + ".b", Tensor<Real>::zeros({out}), false);
    }

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& x) const {
        return maybe_dropout(ctx, tensor::bias_add(tensor::matmul(x, w_), b_));
    }

    const Tensor<Real>& weight() const { return w_; }
    const Tensor<Real>& bias() const { return b_; }

private:
    Tensor<Real> w_, b_;
};

template <typename Real>
class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamStore<Real>& store, const std::string& name, int64_t d) {
        gain_ = store.add(name + ".gain", Tensor<Real>::full({d}, Real(1)), false);
        bias_ = store.add(name + ".bias", Tensor<Real>::zeros({d}), false);
    }

    Tensor<Real> forward(const Tensor<Real>& x) const { return tensor::layer_norm(x, gain_, bias_); }

private:
    Tensor<Real> gain_, bias_;
};

// Additive attention masks: 0 where attention is allowed, -1e9 where not.
// Pads are excluded on the key side so their contents cannot reach any
// valid position.
inline constexpr double kMaskOff = -1e9;

template <typename Real>
Tensor<Real> key_mask(const std::vector<uint8_t>& key_valid, int64_t n_query) {
    const int64_t n_key = static_cast<int64_t>(key_valid.size());
    Tensor<Real> m = Tensor<Real>::zeros({n_query, n_key});
    auto& v = m.values();
    for (int64_t q = 0; q < n_query; ++q)
        for (int64_t k = 0; k < n_key; ++k)
            if (!key_valid[static_cast<size_t>(k)]) v[q * n_key + k] = static_cast<Real>(kMaskOff);
    return m;
}

template <typename Real>
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore<Real>& store, const std::string& name, int64_t d, int64_t heads, Rng& rng)
        : d_(d), heads_(heads) {
        if (d % heads != 0) throw std::invalid_argument("attention: head count must divide model width");
        wq_ = Linear<Real>(store, name + ".q", d, d, rng);
        wk_ = Linear<Real>(store, name + ".k", d, d, rng);
        wv_ = Linear<Real>(store, name + ".v", d, d, rng);
        wo_ = Linear<Real>(store, name + ".o", d, d, rng);
    }

    // queries [Nq, d], keys/values [Nk, d], additive mask [Nq, Nk] (or empty)
    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& queries, const Tensor<Real>& keys_values,
                         const Tensor<Real>& mask) const {
        const Tensor<Real> q = wq_.forward(ctx, queries);
        const Tensor<Real> k = wk_.forward(ctx, keys_values);
        const Tensor<Real> v = wv_.forward(ctx, keys_values);
        const int64_t dh = d_ / heads_;
        const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<Tensor<Real>> head_outputs;
        head_outputs.reserve(static_cast<size_t>(heads_));
        for (int64_t h = 0; h < heads_; ++h) {
            const Tensor<Real> qh = tensor::slice(q, 1, h * dh, dh);
            const Tensor<Real> kh = tensor::slice(k, 1, h * dh, dh);
            const Tensor<Real> vh = tensor::slice(v, 1, h * dh, dh);
            Tensor<Real> scores = tensor::scale(tensor::matmul(qh, kh, false, true), scale);
            const Tensor<Real> probs = tensor::softmax(scores, 1, mask);
            head_outputs.push_back(tensor::matmul(probs, vh));
        }
        return wo_.forward(ctx, tensor::concat(head_outputs, 1));
    }

private:
    int64_t d_ = 0, heads_ = 0;
    Linear<Real> wq_, wk_, wv_, wo_;
};

template <typename Real>
class FeedForward {
public:
    FeedForward() = default;
    FeedForward(ParamStore<Real>& store, const std::string& name, int64_t d, int64_t hidden, Rng& rng) {
        in_ = Linear<Real>(store, name + ".in", d, hidden, rng);
        out_ = Linear<Real>(store, name + ".out", hidden, d, rng);
    }

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& x) const {
        return out_.forward(ctx, tensor::gelu(in_.forward(ctx, x)));
    }

private:
    Linear<Real> in_, out_;
};

// Post-norm transformer layer (self-attention): the BERT-style arrangement
// that worked best for self-attention in this family of models.
template <typename Real>
class TransformerLayer {
public:
    TransformerLayer() = default;
    TransformerLayer(ParamStore<Real>& store, const std::string& name, int64_t d, int64_t heads, int64_t ffw_hidden,
                     Rng& rng)
        : attn_(store, name + ".attn", d, heads, rng),
          norm1_(store, name + ".norm1", d),
          ffw_(store, name + ".ffw", d, ffw_hidden, rng),
          norm2_(store, name + ".norm2", d) {}

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& x, const Tensor<Real>& mask) const {
        const Tensor<Real> attended = norm1_.forward(tensor::add(x, attn_.forward(ctx, x, x, mask)));
        return norm2_.forward(tensor::add(attended, ffw_.forward(ctx, attended)));
    }

    // Block-local variant: attention runs independently inside contiguous
    // windows of `window` positions; a final partial window stands alone.
    Tensor<Real> forward_windowed(const ForwardContext& ctx, const Tensor<Real>& x,
                                  const std::vector<uint8_t>& valid, int64_t window) const {
        const int64_t n = x.dim(0);
        std::vector<Tensor<Real>> blocks;
        const Tensor<Real> q = x;
        for (int64_t start = 0; start < n; start += window) {
            const int64_t len = std::min(window, n - start);
            const Tensor<Real> xw = tensor::slice(x, 0, start, len);
            std::vector<uint8_t> vw(valid.begin() + start, valid.begin() + start + len);
            blocks.push_back(attn_.forward(ctx, xw, xw, key_mask<Real>(vw, len)));
        }
        const Tensor<Real> attended = norm1_.forward(tensor::add(x, tensor::concat(blocks, 0)));
        return norm2_.forward(tensor::add(attended, ffw_.forward(ctx, attended)));
    }

private:
    MultiHeadAttention<Real> attn_;
    LayerNorm<Real> norm1_;
    FeedForward<Real> ffw_;
    LayerNorm<Real> norm2_;
};

// Pre-norm cross-attention block with a residual connection from the queries:
// out = q + attn(norm_q(q), norm_kv(kv)).
template <typename Real>
class CrossAttention {
public:
    CrossAttention() = default;
    CrossAttention(ParamStore<Real>& store, const std::string& name, int64_t d, int64_t heads, Rng& rng)
        : attn_(store, name + ".attn", d, heads, rng),
          norm_q_(store, name + ".norm_q", d),
          norm_kv_(store, name + ".norm_kv", d) {}

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& queries, const Tensor<Real>& keys_values,
                         const Tensor<Real>& mask) const {
        return tensor::add(queries, attn_.forward(ctx, norm_q_.forward(queries), norm_kv_.forward(keys_values), mask));
    }

private:
    MultiHeadAttention<Real> attn_;
    LayerNorm<Real> norm_q_;
    LayerNorm<Real> norm_kv_;
};

}  // namespace charlab::nn
