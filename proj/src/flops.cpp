#include "charlab/flops.hpp"

#include <cstdio>
#include <sstream>

namespace charlab::eval {

double transformer_layer_flops(double len, double d, double ffw_hidden, double attended_len) {
    const double projections = 4.0 * matmul_flops(len, d, d);        // Q, K, V, output
    const double scores = matmul_flops(len, d, attended_len);        // QK^T across all heads
    const double mixing = matmul_flops(len, attended_len, d);        // AV
    const double ffw = matmul_flops(len, d, ffw_hidden) + matmul_flops(len, ffw_hidden, d);
    return projections + scores + mixing + ffw;
}

double cross_attention_flops(double q_len, double kv_len, double d) {
    const double q_proj = matmul_flops(q_len, d, d);
    const double kv_proj = 2.0 * matmul_flops(kv_len, d, d);
    const double scores = matmul_flops(q_len, d, kv_len);
    const double mixing = matmul_flops(q_len, kv_len, d);
    const double out_proj = matmul_flops(q_len, d, d);
    return q_proj + kv_proj + scores + mixing + out_proj;
}

FlopBreakdown count_flops(const model::ArchConfig& cfg) {
    const double n = static_cast<double>(cfg.seq_len);
    const double m = static_cast<double>(cfg.latent_bank());
    const double d = static_cast<double>(cfg.d);
    const double ffw = static_cast<double>(cfg.ffw_hidden());

    FlopBreakdown out;
    switch (cfg.downsampler) {
        case model::DownsamplerKind::canine:
            // one block-local transformer layer, then a width-4 stride-4 conv
            out.downsampler = transformer_layer_flops(n, d, ffw, static_cast<double>(cfg.window)) +
                              conv1d_flops(4, d, d, m);
            break;
        case model::DownsamplerKind::charformer: {
            // five dense convolutions (widths 1..5) plus the 2-layer scorer
            double convs = 0.0;
            for (int w = 1; w <= 5; ++w) convs += conv1d_flops(w, d, d, n);
            const double scorer = 5.0 * (matmul_flops(n, d, d) + matmul_flops(n, d, 1));
            out.downsampler = convs + scorer;
            break;
        }
        case model::DownsamplerKind::perceiver:
            out.downsampler = cross_attention_flops(m, n, d);
            break;
    }

    out.core = static_cast<double>(cfg.layers) * transformer_layer_flops(m, d, ffw, m);

    if (cfg.upsampler == model::UpsamplerKind::canine) {
        // width-4 stride-1 conv over the 2d-wide concatenation, then one
        // full all-to-all transformer layer at character length
        out.upsampler = conv1d_flops(4, 2 * d, d, n) + transformer_layer_flops(n, d, ffw, n);
    } else {
        out.upsampler = cross_attention_flops(n, m, d);
    }
    return out;
}

double token_baseline_flops(const model::ArchConfig& cfg) {
    const double m = static_cast<double>(cfg.latent_bank());
    return static_cast<double>(cfg.layers) *
           transformer_layer_flops(m, static_cast<double>(cfg.d), static_cast<double>(cfg.ffw_hidden()), m);
}

std::vector<FlopGridRow> flop_grid(const model::ArchConfig& base) {
    const double baseline = token_baseline_flops(base);
    std::vector<FlopGridRow> rows;
    for (const auto up : {model::UpsamplerKind::canine, model::UpsamplerKind::perceiver}) {
        for (const auto down : {model::DownsamplerKind::canine, model::DownsamplerKind::charformer,
                                model::DownsamplerKind::perceiver}) {
            model::ArchConfig cfg = base;
            cfg.downsampler = down;
            cfg.upsampler = up;
            FlopGridRow row;
            row.downsampler = down;
            row.upsampler = up;
            row.breakdown = count_flops(cfg);
            row.ratio_to_baseline = row.breakdown.total() / baseline;
            rows.push_back(row);
        }
    }
    return rows;
}

std::string flop_grid_csv(const model::ArchConfig& base) {
    std::ostringstream out;
    out << "upsampler,downsampler,flops,ratio_to_baseline\n";
    char buf[64];
    for (const auto& row : flop_grid(base)) {
        std::snprintf(buf, sizeof(buf), "%.6g,%.4f", row.breakdown.total(), row.ratio_to_baseline);
        out << model::to_string(row.upsampler) << ',' << model::to_string(row.downsampler) << ',' << buf << '\n';
    }
    char bbuf[64];
    std::snprintf(bbuf, sizeof(bbuf), "%.6g,1.0000", token_baseline_flops(base));
    out << "-,bert_baseline," << bbuf << '\n';
    return out.str();
}

}  // namespace charlab::eval
