#pragma once

#include <string>
#include <vector>

#include "charlab/model.hpp"

namespace charlab::eval {

// Analytic forward-pass FLOP estimates. Only multiply-heavy primitives are
// counted: matrix multiplies (2*m*k*n), the attention score and mixing
// products (QK^T and AV), and convolutions (2*width*c_in*c_out*positions).
// Pooling, norms, activations, softmax and embedding gathers are negligible
// by comparison and excluded.

inline double matmul_flops(double m, double k, double n) { return 2.0 * m * k * n; }

inline double conv1d_flops(double width, double c_in, double c_out, double positions) {
    return 2.0 * width * c_in * c_out * positions;
}

// One self-attention transformer layer over `len` positions where each query
// attends to `attended_len` keys (= len for full attention, the window size
// for block-local attention): QKV + output projections, scores, mixing, and
// the 2-matmul feedforward.
double transformer_layer_flops(double len, double d, double ffw_hidden, double attended_len);

// Pre-norm cross-attention: query projection + output projection on the
// query side, key/value projections on the kv side, QK^T and AV products.
double cross_attention_flops(double q_len, double kv_len, double d);

struct FlopBreakdown {
    double downsampler = 0.0;
    double core = 0.0;
    double upsampler = 0.0;
    double total() const { return downsampler + core + upsampler; }
};

FlopBreakdown count_flops(const model::ArchConfig& cfg);

// Token-level baseline: the same deep core over seq_len/4 token positions.
double token_baseline_flops(const model::ArchConfig& cfg);

struct FlopGridRow {
    model::DownsamplerKind downsampler;
    model::UpsamplerKind upsampler;
    FlopBreakdown breakdown;
    double ratio_to_baseline = 0.0;
};

// All six downsampler x upsampler combinations plus the baseline ratio.
std::vector<FlopGridRow> flop_grid(const model::ArchConfig& base);

std::string flop_grid_csv(const model::ArchConfig& base);

}  // namespace charlab::eval
