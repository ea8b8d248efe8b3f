#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alpine/flop_ledger.hpp"
#include "alpine/flops_model.hpp"
#include "alpine/matrix.hpp"
#include "alpine/pruning.hpp"
#include "alpine/token_sequence.hpp"

namespace alpine {

// One encoder layer. Q/K/V are stored per head (d x d/h each) so the
// instrumented matmuls charge exactly the per-head costs.
struct LayerWeights {
    std::vector<Matrix> w_q, w_k, w_v;              // per head, d x d/h
    std::vector<std::vector<float>> b_q, b_k, b_v;  // per head, d/h
    Matrix w_o;                                     // d x d
    std::vector<float> b_o;
    Matrix w_ffnn1;  // d x d_ffnn
    std::vector<float> b_ffnn1;
    Matrix w_ffnn2;  // d_ffnn x d
    std::vector<float> b_ffnn2;
    std::vector<float> ln1_gain, ln1_bias;
    std::vector<float> ln2_gain, ln2_bias;
};

struct EncoderWeights {
    ModelDims dims;
    int vocab_size = 0;
    int num_classes = 0;
    Matrix token_embedding;     // vocab x d
    Matrix position_embedding;  // max_len x d
    std::vector<LayerWeights> layers;
    Matrix classifier_w;  // d x num_classes
    std::vector<float> classifier_b;

    // Reproducible uniform initialization; layer norms start at identity.
    static EncoderWeights random(const ModelDims& dims, int vocab_size, int num_classes,
                                 std::uint32_t seed, float scale = 0.05f);
};

// Archive = JSON manifest (tensor name, shape, byte offset) plus a blob of
// little-endian float32 in manifest order. The blob lives next to the
// manifest under the name recorded in its "blob" field.
void save_weights(const EncoderWeights& weights, const std::string& manifest_path);
EncoderWeights load_weights(const std::string& manifest_path);

// Token embedding + position embedding, PAD rows included (masking deals
// with them downstream).
Matrix embed(const TokenSequence& sequence, const EncoderWeights& weights);

struct MhaResult {
    Matrix hidden;                  // LayerNorm(x + MHA(x))
    std::vector<Matrix> attention;  // per head, exactly as used
};

MhaResult mha_forward(const Matrix& hidden, const std::vector<std::uint8_t>& mask,
                      const LayerWeights& layer, LedgerRef ledger);

// Linear2(GELU(Linear1(x))) with residual + LayerNorm.
Matrix ffnn_forward(const Matrix& hidden, const LayerWeights& layer, LedgerRef ledger);

struct LayerOutput {
    Matrix hidden;
    std::vector<std::uint8_t> mask;
    std::vector<Matrix> attention;        // captured before any pruning
    std::vector<int> protected_positions; // remapped after repacking
};

// Full layer for a single sequence: MHA, then (when the schedule hits this
// layer) prune + repack, then FFNN.
LayerOutput encoder_layer_forward(const Matrix& hidden, const std::vector<std::uint8_t>& mask,
                                  const std::vector<int>& protected_positions,
                                  const LayerWeights& layer, const PruneConfig& prune_cfg,
                                  int layer_index, FlopLedger* ledger);

struct ForwardResult {
    Matrix cls_vectors;                   // B x d, row 0 of each final hidden state
    std::vector<std::vector<int>> traces; // per sequence: kept length entering each
                                          // layer, plus one final post-layer entry
};

// [layer][sequence][head]
using AttentionArchive = std::vector<std::vector<std::vector<Matrix>>>;

// Batch forward with batch-uniform repacking. All sequences must share one
// padded width <= max_len.
ForwardResult encoder_forward(const std::vector<TokenSequence>& batch,
                              const EncoderWeights& weights, const PruneConfig& prune_cfg,
                              FlopLedger* ledger, AttentionArchive* attention_out = nullptr);

// Dense classification head over the CLS vectors.
Matrix classify(const Matrix& cls_vectors, const Matrix& head_w, const std::vector<float>& head_b);

}  // namespace alpine
