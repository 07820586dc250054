#pragma once

#include <cstdint>
#include <vector>

#include "charlab/nn.hpp"
#include "charlab/tensor.hpp"

namespace charlab::model {

// The deep encoder applied to the downsampled latent sequence: a stack of
// post-norm transformer layers with GeLU feedforwards. Masked positions are
// excluded on the key side, so their contents never reach a valid output.
template <typename Real>
class Encoder {
public:
    Encoder() = default;

    Encoder(nn::ParamStore<Real>& store, int64_t layers, int64_t d, int64_t heads, int64_t ffw_hidden, Rng& rng) {
        for (int64_t l = 0; l < layers; ++l)
            layers_.emplace_back(store, "core.layer" + std::to_string(l), d, heads, ffw_hidden, rng);
    }

    Tensor<Real> forward(const nn::ForwardContext& ctx, const Tensor<Real>& latents,
                         const std::vector<uint8_t>& valid) const {
        Tensor<Real> x = latents;
        if (layers_.empty()) return x;  // L = 0 is the identity
        const Tensor<Real> mask = nn::key_mask<Real>(valid, latents.dim(0));
        for (const auto& layer : layers_) x = layer.forward(ctx, x, mask);
        return x;
    }

    size_t depth() const { return layers_.size(); }

private:
    std::vector<nn::TransformerLayer<Real>> layers_;
};

// Parameter count of one post-norm layer: QKV+output projections (4d^2 + 4d)
// plus the feedforward (2 * 4d * d weights + 5d biases) plus two norms (4d).
inline int64_t encoder_layer_param_count(int64_t d, int64_t ffw_hidden) {
    const int64_t attn = 4 * d * d + 4 * d;
    const int64_t ffw = d * ffw_hidden + ffw_hidden + ffw_hidden * d + d;
    const int64_t norms = 4 * d;
    return attn + ffw + norms;
}

}  // namespace charlab::model
