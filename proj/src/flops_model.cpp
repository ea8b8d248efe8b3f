#include "alpine/flops_model.hpp"

#include <stdexcept>
#include <string>

namespace alpine {

void ModelDims::validate() const {
    if (d_mha < 1 || heads < 1 || d_ffnn < 1 || layers < 1 || max_len < 1)
        throw std::invalid_argument("ModelDims: all dimensions must be >= 1");
    if (d_mha % heads != 0)
        throw std::invalid_argument("ModelDims: d_mha " + std::to_string(d_mha) +
                                    " not divisible by heads " + std::to_string(heads));
    if (d_ffnn < d_mha)
        throw std::invalid_argument("ModelDims: d_ffnn must be >= d_mha");
}

MhaFlopBreakdown flops_mha(std::int64_t n, const ModelDims& dims) {
    if (n < 1) throw std::invalid_argument("flops_mha: n must be >= 1, got " + std::to_string(n));
    const std::int64_t d = dims.d_mha;
    const std::int64_t h = dims.heads;
    MhaFlopBreakdown b;
    b.linear_proj = 6 * n * d * d - 3 * n * d;
    b.scaled_dot_attn = 2 * n * n * d + h * n * n;
    b.attn_times_v = 2 * n * n * d - n * d;
    b.final_proj = 2 * n * d * d - n * d;
    b.component_sum = b.linear_proj + b.scaled_dot_attn + b.attn_times_v + b.final_proj;
    b.paper_total = 8 * n * d * d + 4 * n * n * d - 4 * n * d + h * n * n;
    return b;
}

std::int64_t flops_ffnn(std::int64_t n, const ModelDims& dims) {
    if (n < 1) throw std::invalid_argument("flops_ffnn: n must be >= 1, got " + std::to_string(n));
    const std::int64_t d = dims.d_mha;
    const std::int64_t f = dims.d_ffnn;
    return 2 * n * d * f + 2 * n * f * d - n * d;
}

std::int64_t flops_difference(std::int64_t n, const ModelDims& dims) {
    if (n < 0) throw std::invalid_argument("flops_difference: n must be >= 0");
    if (n == 0) return 0;
    return flops_ffnn(n, dims) - flops_mha(n, dims).paper_total;
}

std::int64_t crossover_length(const ModelDims& dims) {
    const std::int64_t d = dims.d_mha;
    const std::int64_t h = dims.heads;
    return (8 * d * d + 3 * d) / (4 * d + h);
}

std::int64_t model_total(const std::vector<std::int64_t>& lengths, const ModelDims& dims) {
    if (lengths.size() != static_cast<std::size_t>(dims.layers))
        throw std::invalid_argument("model_total: expected " + std::to_string(dims.layers) +
                                    " lengths, got " + std::to_string(lengths.size()));
    std::int64_t total = 0;
    for (std::int64_t n : lengths) total += flops_mha(n, dims).paper_total + flops_ffnn(n, dims);
    return total;
}

std::int64_t model_total_split(const std::vector<std::int64_t>& mha_lengths,
                               const std::vector<std::int64_t>& ffnn_lengths,
                               const ModelDims& dims) {
    if (mha_lengths.size() != static_cast<std::size_t>(dims.layers) ||
        ffnn_lengths.size() != static_cast<std::size_t>(dims.layers))
        throw std::invalid_argument("model_total_split: expected " + std::to_string(dims.layers) +
                                    " lengths per block");
    std::int64_t total = 0;
    for (std::size_t l = 0; l < mha_lengths.size(); ++l)
        total += flops_mha(mha_lengths[l], dims).paper_total + flops_ffnn(ffnn_lengths[l], dims);
    return total;
}

}  // namespace alpine
