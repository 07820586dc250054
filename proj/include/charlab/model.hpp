#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "charlab/downsamplers.hpp"
#include "charlab/embedder.hpp"
#include "charlab/encoder.hpp"
#include "charlab/upsamplers.hpp"

namespace charlab::model {

enum class DownsamplerKind { canine, charformer, perceiver };
enum class UpsamplerKind { canine, perceiver };

std::string to_string(DownsamplerKind k);
std::string to_string(UpsamplerKind k);
DownsamplerKind downsampler_from_string(const std::string& s);
UpsamplerKind upsampler_from_string(const std::string& s);

// Architecture hyperparameters. The full preset mirrors the reference
// training setup (d=768, 12 layers, 12 heads, 2048 characters, window 128);
// the toy preset trains on a single CPU core in minutes.
struct ArchConfig {
    DownsamplerKind downsampler = DownsamplerKind::canine;
    UpsamplerKind upsampler = UpsamplerKind::canine;
    int64_t d = 64;
    int64_t layers = 2;
    int64_t heads = 4;
    int64_t ffw_mult = 4;
    int64_t seq_len = 64;
    int64_t window = 16;
    int hash_k = 8;
    int64_t hash_buckets = 64;
    bool hash_only = false;
    double dropout_rate = 0.0;

    int64_t ffw_hidden() const { return ffw_mult * d; }
    int64_t latent_bank() const { return seq_len / kDownsampleRate; }

    static ArchConfig toy() { return ArchConfig{}; }

    static ArchConfig full() {
        ArchConfig c;
        c.d = 768;
        c.layers = 12;
        c.heads = 12;
        c.seq_len = 2048;
        c.window = 128;
        c.hash_buckets = 16384;
        c.dropout_rate = 0.1;
        return c;
    }

    static ArchConfig grad_check() {
        ArchConfig c;
        c.d = 16;
        c.layers = 1;
        c.heads = 2;
        c.seq_len = 16;
        c.window = 8;
        c.hash_buckets = 16;
        c.dropout_rate = 0.0;
        return c;
    }
};

inline std::string to_string(DownsamplerKind k) {
    switch (k) {
        case DownsamplerKind::canine: return "canine";
        case DownsamplerKind::charformer: return "charformer";
        case DownsamplerKind::perceiver: return "perceiver";
    }
    return "?";
}

inline std::string to_string(UpsamplerKind k) {
    return k == UpsamplerKind::canine ? "canine" : "perceiver";
}

inline DownsamplerKind downsampler_from_string(const std::string& s) {
    if (s == "canine") return DownsamplerKind::canine;
    if (s == "charformer") return DownsamplerKind::charformer;
    if (s == "perceiver") return DownsamplerKind::perceiver;
    throw ConfigError("unknown downsampler '" + s + "' (expected canine | charformer | perceiver)");
}

inline UpsamplerKind upsampler_from_string(const std::string& s) {
    if (s == "canine") return UpsamplerKind::canine;
    if (s == "perceiver") return UpsamplerKind::perceiver;
    throw ConfigError("unknown upsampler '" + s + "' (expected canine | perceiver)");
}

template <typename Real>
struct ModelOutput {
    Tensor<Real> char_out;  // [N, d]
    DownsampleOutput<Real> down;
    std::vector<uint8_t> char_valid;
};

inline std::vector<uint8_t> valid_positions(const std::vector<uint32_t>& codepoints) {
    std::vector<uint8_t> v(codepoints.size(), 1);
    for (size_t i = 0; i < codepoints.size(); ++i)
        if (codepoints[i] == text::Specials::pad) v[i] = 0;
    return v;
}

// The end-to-end character encoder: embed -> downsample -> deep core ->
// upsample, returning character-aligned d-wide outputs.
template <typename Real>
class CharModel {
public:
    explicit CharModel(const ArchConfig& cfg, uint64_t seed) : cfg_(cfg) {
        Rng root(seed);
        Rng hash_rng = root.child("hash");
        hasher_ = CodepointHasher::make_collision_checked(cfg.hash_k, cfg.hash_buckets, hash_rng.next_u64());
        Rng init = root.child("init");
        embedder_ = CharEmbedder<Real>(store_, hasher_, cfg.d, cfg.seq_len, init, cfg.hash_only);
        switch (cfg.downsampler) {
            case DownsamplerKind::canine:
                down_ = std::make_unique<CanineDownsampler<Real>>(store_, cfg.d, cfg.heads, cfg.ffw_hidden(),
                                                                  cfg.window, init);
                break;
            case DownsamplerKind::charformer:
                down_ = std::make_unique<CharformerDownsampler<Real>>(store_, cfg.d, init);
                break;
            case DownsamplerKind::perceiver:
                down_ = std::make_unique<PerceiverDownsampler<Real>>(store_, cfg.d, cfg.heads, cfg.latent_bank(),
                                                                     init);
                break;
        }
        core_ = Encoder<Real>(store_, cfg.layers, cfg.d, cfg.heads, cfg.ffw_hidden(), init);
        if (cfg.upsampler == UpsamplerKind::canine)
            up_ = std::make_unique<CanineUpsampler<Real>>(store_, cfg.d, cfg.heads, cfg.ffw_hidden(), init);
        else
            up_ = std::make_unique<PerceiverUpsampler<Real>>(store_, cfg.d, cfg.heads, init);
    }

    ModelOutput<Real> forward(const ForwardContext& ctx, const std::vector<uint32_t>& codepoints) const {
        ModelOutput<Real> out;
        out.char_valid = valid_positions(codepoints);
        const Tensor<Real> chars = embedder_.forward(ctx, codepoints);
        out.down = down_->forward(ctx, chars, out.char_valid);
        const Tensor<Real> core_out = core_.forward(ctx, out.down.latents, out.down.latent_valid);
        out.char_out = up_->forward(ctx, core_out, out.down.contextual_chars, out.char_valid, out.down.latent_valid);
        return out;
    }

    const ArchConfig& config() const { return cfg_; }
    const CodepointHasher& hasher() const { return hasher_; }
    const CharEmbedder<Real>& embedder() const { return embedder_; }
    nn::ParamStore<Real>& params() { return store_; }
    const nn::ParamStore<Real>& params() const { return store_; }

private:
    ArchConfig cfg_;
    nn::ParamStore<Real> store_;
    CodepointHasher hasher_;
    CharEmbedder<Real> embedder_;
    std::unique_ptr<Downsampler<Real>> down_;
    Encoder<Real> core_;
    std::unique_ptr<Upsampler<Real>> up_;
};

// Token-level baseline: embedding table over a closed vocabulary plus the
// same deep core, for the tokeniser-quality sweep and compute comparisons.
// Token context length is seq_len / 4, matching the character models'
// latent length.
template <typename Real>
class TokenModel {
public:
    TokenModel(const ArchConfig& cfg, int64_t vocab_size, uint64_t seed) : cfg_(cfg), vocab_size_(vocab_size) {
        Rng root(seed);
        Rng init = root.child("init");
        const int64_t max_tokens = cfg.seq_len / kDownsampleRate;
        embed_ = store_.add("tok.embed", Tensor<Real>::randn({vocab_size + 4, cfg.d}, init, 0.02), true);
        pos_ = store_.add("tok.pos", Tensor<Real>::randn({max_tokens, cfg.d}, init, 0.02), true);
        norm_ = nn::LayerNorm<Real>(store_, "tok.norm", cfg.d);
        core_ = Encoder<Real>(store_, cfg.layers, cfg.d, cfg.heads, cfg.ffw_hidden(), init);
    }

    // special token ids appended after the vocabulary
    int64_t pad_id() const { return vocab_size_; }
    int64_t cls_id() const { return vocab_size_ + 1; }
    int64_t sep_id() const { return vocab_size_ + 2; }
    int64_t mask_id() const { return vocab_size_ + 3; }
    int64_t vocab_size() const { return vocab_size_; }
    int64_t max_tokens() const { return cfg_.seq_len / kDownsampleRate; }

    Tensor<Real> forward(const ForwardContext& ctx, const std::vector<int64_t>& token_ids,
                         const std::vector<uint8_t>& valid) const {
        const int64_t n = static_cast<int64_t>(token_ids.size());
        if (n == 0 || n > max_tokens()) throw DataError("token model: bad sequence length");
        Tensor<Real> x = tensor::gather_rows(embed_, token_ids);
        x = tensor::add(x, tensor::slice(pos_, 0, 0, n));
        x = nn::maybe_dropout(ctx, norm_.forward(x));
        return core_.forward(ctx, x, valid);
    }

    const ArchConfig& config() const { return cfg_; }
    nn::ParamStore<Real>& params() { return store_; }
    const nn::ParamStore<Real>& params() const { return store_; }

private:
    ArchConfig cfg_;
    int64_t vocab_size_ = 0;
    nn::ParamStore<Real> store_;
    Tensor<Real> embed_, pos_;
    nn::LayerNorm<Real> norm_;
    Encoder<Real> core_;
};

}  // namespace charlab::model
