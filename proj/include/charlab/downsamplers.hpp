#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "charlab/nn.hpp"
#include "charlab/tensor.hpp"

// Three interchangeable ways to compress N character states to N/4 latents.
// All emit the same DownsampleOutput so the deep core and the upsamplers can
// treat them as drop-in replacements.

namespace charlab::model {

using nn::ForwardContext;
using nn::ParamStore;
using tensor::Tensor;

constexpr int64_t kDownsampleRate = 4;

template <typename Real>
struct DownsampleOutput {
    Tensor<Real> latents;           // [N/rate, d] (or bank size for the latent-query path)
    Tensor<Real> contextual_chars;  // [N, d]
    std::vector<uint8_t> latent_valid;
    int64_t rate = kDownsampleRate;
};

template <typename Real>
class Downsampler {
public:
    virtual ~Downsampler() = default;
    virtual DownsampleOutput<Real> forward(const ForwardContext& ctx, const Tensor<Real>& chars,
                                           const std::vector<uint8_t>& char_valid) const = 0;
};

// A latent pooled from chars [4i, 4i+4) is valid if any of them is valid.
inline std::vector<uint8_t> pooled_valid(const std::vector<uint8_t>& char_valid) {
    std::vector<uint8_t> out((char_valid.size() + kDownsampleRate - 1) / kDownsampleRate, 0);
    for (size_t i = 0; i < char_valid.size(); ++i)
        if (char_valid[i]) out[i / kDownsampleRate] = 1;
    return out;
}

// Windowed local attention over the characters, then a strided convolution
// (width 4, stride 4) with GeLU and layer norm.
template <typename Real>
class CanineDownsampler : public Downsampler<Real> {
public:
    CanineDownsampler(ParamStore<Real>& store, int64_t d, int64_t heads, int64_t ffw_hidden, int64_t window,
                      Rng& rng)
        : window_(window),
          local_layer_(store, "down.local", d, heads, ffw_hidden, rng),
          conv_w_(store.add("down.conv.w", Tensor<Real>::randn({4, d, d}, rng, 0.02), true)),
          conv_b_(store.add("down.conv.b", Tensor<Real>::zeros({d}), false)),
          norm_(store, "down.conv.norm", d) {}

    DownsampleOutput<Real> forward(const ForwardContext& ctx, const Tensor<Real>& chars,
                                   const std::vector<uint8_t>& char_valid) const override {
        if (chars.dim(0) % kDownsampleRate != 0)
            throw DataError("downsampler: sequence length must be divisible by the rate 4");
        DownsampleOutput<Real> out;
        out.contextual_chars = local_layer_.forward_windowed(ctx, chars, char_valid, window_);
        const Tensor<Real> conv = tensor::conv1d(out.contextual_chars, conv_w_, conv_b_, kDownsampleRate);
        out.latents = norm_.forward(tensor::gelu(nn::maybe_dropout(ctx, conv)));
        out.latent_valid = pooled_valid(char_valid);
        return out;
    }

private:
    int64_t window_;
    nn::TransformerLayer<Real> local_layer_;
    Tensor<Real> conv_w_, conv_b_;
    nn::LayerNorm<Real> norm_;
};

// Attention-weighted sum over densely applied convolutions of widths 1..5,
// scored per position by a 2-layer GeLU MLP, then mean pooling (width 4,
// stride 4). There is no first 1-d convolution and no transformer layer here.
template <typename Real>
class CharformerDownsampler : public Downsampler<Real> {
public:
    static constexpr int64_t kWidths[5] = {1, 2, 3, 4, 5};

    CharformerDownsampler(ParamStore<Real>& store, int64_t d, Rng& rng) {
        for (const int64_t w : kWidths) {
            conv_w_.push_back(store.add("down.conv" + std::to_string(w) + ".w",
                                        Tensor<Real>::randn({w, d, d}, rng, 0.02), true));
            conv_b_.push_back(store.add("down.conv" + std::to_string(w) + ".b", Tensor<Real>::zeros({d}), false));
        }
        score_hidden_ = nn::Linear<Real>(store, "down.score.hidden", d, d, rng);
        score_out_ = nn::Linear<Real>(store, "down.score.out", d, 1, rng);
    }

    DownsampleOutput<Real> forward(const ForwardContext& ctx, const Tensor<Real>& chars,
                                   const std::vector<uint8_t>& char_valid) const override {
        if (chars.dim(0) % kDownsampleRate != 0)
            throw DataError("downsampler: sequence length must be divisible by the rate 4");
        std::vector<Tensor<Real>> candidates;
        std::vector<Tensor<Real>> scores;
        for (size_t wi = 0; wi < conv_w_.size(); ++wi) {
            Tensor<Real> cand = nn::maybe_dropout(ctx, tensor::conv1d(chars, conv_w_[wi], conv_b_[wi], 1));
            scores.push_back(score_out_.forward(ctx, tensor::gelu(score_hidden_.forward(ctx, cand))));
            candidates.push_back(std::move(cand));
        }
        const Tensor<Real> weights = tensor::softmax(tensor::concat(scores, 1), 1);  // [N, 5]
        DownsampleOutput<Real> out;
        Tensor<Real> mixed;
        for (size_t wi = 0; wi < candidates.size(); ++wi) {
            const Tensor<Real> term =
                tensor::mul(tensor::slice(weights, 1, static_cast<int64_t>(wi), 1), candidates[wi]);
            mixed = wi == 0 ? term : tensor::add(mixed, term);
        }
        out.contextual_chars = mixed;
        out.latents = tensor::mean_pool1d(mixed, kDownsampleRate, kDownsampleRate);
        out.latent_valid = pooled_valid(char_valid);
        return out;
    }

    // Per-position weights over the five widths, for inspection in tests.
    Tensor<Real> width_weights(const ForwardContext& ctx, const Tensor<Real>& chars) const {
        std::vector<Tensor<Real>> scores;
        for (size_t wi = 0; wi < conv_w_.size(); ++wi) {
            Tensor<Real> cand = tensor::conv1d(chars, conv_w_[wi], conv_b_[wi], 1);
            scores.push_back(score_out_.forward(ctx, tensor::gelu(score_hidden_.forward(ctx, cand))));
        }
        return tensor::softmax(tensor::concat(scores, 1), 1);
    }

private:
    std::vector<Tensor<Real>> conv_w_, conv_b_;
    nn::Linear<Real> score_hidden_;
    nn::Linear<Real> score_out_;
};

// A learnt bank of latent query vectors cross-attends (pre-norm) into the
// character states. There is no separate contextualisation stage: the
// characters pass through unchanged.
template <typename Real>
class PerceiverDownsampler : public Downsampler<Real> {
public:
    PerceiverDownsampler(ParamStore<Real>& store, int64_t d, int64_t heads, int64_t bank_size, Rng& rng)
        : bank_(store.add("down.bank",
                          Tensor<Real>::randn({bank_size, d}, rng, 1.0 / std::sqrt(static_cast<double>(d))), true)),
          cross_(store, "down.cross", d, heads, rng) {}

    DownsampleOutput<Real> forward(const ForwardContext& ctx, const Tensor<Real>& chars,
                                   const std::vector<uint8_t>& char_valid) const override {
        DownsampleOutput<Real> out;
        out.contextual_chars = chars;
        out.latents = cross_.forward(ctx, bank_, chars, nn::key_mask<Real>(char_valid, bank_.dim(0)));
        out.latent_valid.assign(static_cast<size_t>(bank_.dim(0)), 1);
        return out;
    }

private:
    Tensor<Real> bank_;
    nn::CrossAttention<Real> cross_;
};

}  // namespace charlab::model
