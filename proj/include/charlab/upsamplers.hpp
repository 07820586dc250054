#pragma once

#include <cstdint>
#include <vector>

#include "charlab/downsamplers.hpp"
#include "charlab/nn.hpp"
#include "charlab/tensor.hpp"

// Restore an N x d character-aligned sequence from the core's latent outputs
// plus the contextualised character states.

namespace charlab::model {

template <typename Real>
class Upsampler {
public:
    virtual ~Upsampler() = default;
    virtual Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& core_out,
                                 const Tensor<Real>& contextual_chars, const std::vector<uint8_t>& char_valid,
                                 const std::vector<uint8_t>& latent_valid) const = 0;
};

// Repeat each core output 4 times, concatenate with the contextual characters
// to width 2d, project back to d with a width-4 stride-1 convolution (GeLU,
// layer norm), then one full all-to-all transformer layer.
template <typename Real>
class CanineUpsampler : public Upsampler<Real> {
public:
    CanineUpsampler(ParamStore<Real>& store, int64_t d, int64_t heads, int64_t ffw_hidden, Rng& rng)
        : conv_w_(store.add("up.conv.w", Tensor<Real>::randn({4, 2 * d, d}, rng, 0.02), true)),
          conv_b_(store.add("up.conv.b", Tensor<Real>::zeros({d}), false)),
          norm_(store, "up.conv.norm", d),
          final_layer_(store, "up.final", d, heads, ffw_hidden, rng) {}

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& core_out,
                         const Tensor<Real>& contextual_chars, const std::vector<uint8_t>& char_valid,
                         const std::vector<uint8_t>& /*latent_valid*/) const override {
        const int64_t n = contextual_chars.dim(0);
        if (core_out.dim(0) * kDownsampleRate != n)
            throw DataError("upsampler: latent length x 4 must equal the character length");
        // latent j covers character positions [4j, 4j+4) after the repeat
        const Tensor<Real> repeated = tensor::repeat_interleave(core_out, kDownsampleRate, 0);
        const Tensor<Real> merged = tensor::concat({repeated, contextual_chars}, 1);
        const Tensor<Real> conv = nn::maybe_dropout(ctx, tensor::conv1d(merged, conv_w_, conv_b_, 1));
        const Tensor<Real> h = norm_.forward(tensor::gelu(conv));
        return final_layer_.forward(ctx, h, nn::key_mask<Real>(char_valid, n));
    }

private:
    Tensor<Real> conv_w_, conv_b_;
    nn::LayerNorm<Real> norm_;
    nn::TransformerLayer<Real> final_layer_;
};

// Pre-norm cross-attention with the contextualised characters as queries and
// the core outputs as keys/values; the residual is the skip connection from
// the character input to the output.
template <typename Real>
class PerceiverUpsampler : public Upsampler<Real> {
public:
    PerceiverUpsampler(ParamStore<Real>& store, int64_t d, int64_t heads, Rng& rng)
        : cross_(store, "up.cross", d, heads, rng) {}

    Tensor<Real> forward(const ForwardContext& ctx, const Tensor<Real>& core_out,
                         const Tensor<Real>& contextual_chars, const std::vector<uint8_t>& /*char_valid*/,
                         const std::vector<uint8_t>& latent_valid) const override {
        return cross_.forward(ctx, contextual_chars, core_out,
                              nn::key_mask<Real>(latent_valid, contextual_chars.dim(0)));
    }

private:
    nn::CrossAttention<Real> cross_;
};

}  // namespace charlab::model
