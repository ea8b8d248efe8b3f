#pragma once

#include <cstdint>
#include <vector>

namespace alpine {

// Encoder hyperparameters used by both the analytical cost model and the
// engine. d_mha must be divisible by heads; d_ffnn is normally 4 * d_mha.
struct ModelDims {
    std::int64_t d_mha = 64;
    std::int64_t heads = 4;
    std::int64_t d_ffnn = 256;
    std::int64_t layers = 4;
    std::int64_t max_len = 128;

    void validate() const;

    static ModelDims desk() { return {64, 4, 256, 4, 128}; }
    static ModelDims paper() { return {768, 12, 3072, 12, 512}; }
};

// Closed-form attention-block cost at sequence length n.
//
// The stated total (8nd^2 + 4n^2 d - 4nd + hn^2) exceeds the sum of its
// published components by exactly n*d; both values are exposed and the
// stated total is treated as canonical.
struct MhaFlopBreakdown {
    std::int64_t linear_proj = 0;     // 6nd^2 - 3nd
    std::int64_t scaled_dot_attn = 0; // 2n^2 d + hn^2
    std::int64_t attn_times_v = 0;    // 2n^2 d - nd
    std::int64_t final_proj = 0;      // 2nd^2 - nd
    std::int64_t component_sum = 0;
    std::int64_t paper_total = 0;
};

MhaFlopBreakdown flops_mha(std::int64_t n, const ModelDims& dims);

// Feed-forward block cost: 2*n*d_mha*d_ffnn (first linear + GELU) plus
// 2*n*d_ffnn*d_mha - n*d_mha (projection back). Equals 16nd^2 - nd when
// d_ffnn = 4*d_mha.
std::int64_t flops_ffnn(std::int64_t n, const ModelDims& dims);

// flops_ffnn(n) - flops_mha(n).paper_total; n*(8d^2+3d) - n^2*(4d+h) when
// d_ffnn = 4*d_mha.
std::int64_t flops_difference(std::int64_t n, const ModelDims& dims);

// floor((8d^2 + 3d) / (4d + h)): the largest length at which the
// feed-forward block still out-costs attention (assumes d_ffnn = 4*d_mha).
std::int64_t crossover_length(const ModelDims& dims);

// Whole-model cost charging each layer at its input length. lengths holds
// one entry per layer.
std::int64_t model_total(const std::vector<std::int64_t>& lengths, const ModelDims& dims);

// Finer variant: attention charged at the layer's input length, the
// feed-forward block at the (possibly shorter) post-prune length.
std::int64_t model_total_split(const std::vector<std::int64_t>& mha_lengths,
                               const std::vector<std::int64_t>& ffnn_lengths,
                               const ModelDims& dims);

}  // namespace alpine
