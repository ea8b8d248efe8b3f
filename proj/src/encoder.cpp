#include "alpine/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace alpine {

namespace {

constexpr float kLayerNormEpsilon = 1e-5f;

// Nominal per-element cost charged under Other for normalization; the
// analytical model excludes it either way.
constexpr std::uint64_t kLayerNormOpsPerElement = 8;

std::vector<float> random_vector(int len, std::uint32_t seed, float scale) {
    return seeded_random_matrix(1, len, seed, scale).data();
}

Matrix layer_norm_charged(const Matrix& x, const std::vector<float>& gain,
                          const std::vector<float>& bias, LedgerRef ledger) {
    ledger.add(BlockTag::Other,
               kLayerNormOpsPerElement * static_cast<std::uint64_t>(x.rows()) * x.cols());
    return layer_norm(x, gain, bias, kLayerNormEpsilon);
}

}  // namespace

EncoderWeights EncoderWeights::random(const ModelDims& dims, int vocab_size, int num_classes,
                                      std::uint32_t seed, float scale) {
    dims.validate();
    if (vocab_size < 1 || num_classes < 1)
        throw std::invalid_argument("EncoderWeights: vocab_size and num_classes must be >= 1");

    const int d = static_cast<int>(dims.d_mha);
    const int dh = static_cast<int>(dims.d_mha / dims.heads);
    const int f = static_cast<int>(dims.d_ffnn);

    EncoderWeights w;
    w.dims = dims;
    w.vocab_size = vocab_size;
    w.num_classes = num_classes;

    // One derived seed per tensor, consumed in a fixed order.
    std::uint32_t next = seed;
    auto mat = [&](int r, int c) { return seeded_random_matrix(r, c, next++, scale); };
    auto vec = [&](int len) { return random_vector(len, next++, scale); };

    w.token_embedding = mat(vocab_size, d);
    w.position_embedding = mat(static_cast<int>(dims.max_len), d);
    for (int l = 0; l < dims.layers; ++l) {
        LayerWeights lw;
        for (int h = 0; h < dims.heads; ++h) {
            lw.w_q.push_back(mat(d, dh));
            lw.b_q.push_back(vec(dh));
            lw.w_k.push_back(mat(d, dh));
            lw.b_k.push_back(vec(dh));
            lw.w_v.push_back(mat(d, dh));
            lw.b_v.push_back(vec(dh));
        }
        lw.w_o = mat(d, d);
        lw.b_o = vec(d);
        lw.w_ffnn1 = mat(d, f);
        lw.b_ffnn1 = vec(f);
        lw.w_ffnn2 = mat(f, d);
        lw.b_ffnn2 = vec(d);
        lw.ln1_gain.assign(d, 1.0f);
        lw.ln1_bias.assign(d, 0.0f);
        lw.ln2_gain.assign(d, 1.0f);
        lw.ln2_bias.assign(d, 0.0f);
        w.layers.push_back(std::move(lw));
    }
    w.classifier_w = mat(d, num_classes);
    w.classifier_b = vec(num_classes);
    return w;
}

Matrix embed(const TokenSequence& sequence, const EncoderWeights& weights) {
    const int s = static_cast<int>(sequence.ids.size());
    if (s < 1) throw std::invalid_argument("embed: empty sequence");
    if (s > weights.dims.max_len)
        throw std::invalid_argument("embed: sequence length " + std::to_string(s) +
                                    " exceeds max_len " + std::to_string(weights.dims.max_len));
    const int d = static_cast<int>(weights.dims.d_mha);
    Matrix out(s, d);
    for (int i = 0; i < s; ++i) {
        const int id = sequence.ids[i];
        if (id < 0 || id >= weights.vocab_size)
            throw std::invalid_argument("embed: token id " + std::to_string(id) +
                                        " outside vocab of size " +
                                        std::to_string(weights.vocab_size));
        const float* tok = weights.token_embedding.row(id);
        const float* pos = weights.position_embedding.row(i);
        float* dst = out.row(i);
        for (int j = 0; j < d; ++j) dst[j] = tok[j] + pos[j];
    }
    return out;
}

MhaResult mha_forward(const Matrix& hidden, const std::vector<std::uint8_t>& mask,
                      const LayerWeights& layer, LedgerRef ledger) {
    if (mask.size() != static_cast<std::size_t>(hidden.rows()))
        throw std::invalid_argument("mha_forward: mask length must equal hidden rows");
    const int s = hidden.rows();
    const int d = hidden.cols();
    const int heads = static_cast<int>(layer.w_q.size());
    const int dh = layer.w_q.front().cols();
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    MhaResult result;
    result.attention.reserve(heads);
    Matrix concat(s, d);
    for (int h = 0; h < heads; ++h) {
        Matrix q = matmul(hidden, layer.w_q[h], ledger, BlockTag::Mha);
        add_row_vector_inplace(q, layer.b_q[h], ledger, BlockTag::Other);
        Matrix k = matmul(hidden, layer.w_k[h], ledger, BlockTag::Mha);
        add_row_vector_inplace(k, layer.b_k[h], ledger, BlockTag::Other);
        Matrix v = matmul(hidden, layer.w_v[h], ledger, BlockTag::Mha);
        add_row_vector_inplace(v, layer.b_v[h], ledger, BlockTag::Other);

        Matrix scores = matmul(q, transpose(k), ledger, BlockTag::Mha);
        // Scale is covered by the softmax two-ops-per-element convention.
        scale_inplace(scores, scale);
        Matrix attn = softmax_masked(scores, mask, ledger, BlockTag::Mha);
        Matrix head_out = matmul(attn, v, ledger, BlockTag::Mha);
        for (int i = 0; i < s; ++i) {
            const float* src = head_out.row(i);
            float* dst = concat.row(i) + h * dh;
            for (int j = 0; j < dh; ++j) dst[j] = src[j];
        }
        result.attention.push_back(std::move(attn));
    }

    Matrix projected = matmul(concat, layer.w_o, ledger, BlockTag::Mha);
    add_row_vector_inplace(projected, layer.b_o, ledger, BlockTag::Other);
    add_inplace(projected, hidden, ledger, BlockTag::Other);
    result.hidden = layer_norm_charged(projected, layer.ln1_gain, layer.ln1_bias, ledger);
    return result;
}

Matrix ffnn_forward(const Matrix& hidden, const LayerWeights& layer, LedgerRef ledger) {
    if (hidden.cols() != layer.w_ffnn1.rows())
        throw std::invalid_argument("ffnn_forward: hidden cols must equal d_mha");
    Matrix up = matmul(hidden, layer.w_ffnn1, ledger, BlockTag::Ffnn);
    add_row_vector_inplace(up, layer.b_ffnn1, ledger, BlockTag::Other);
    Matrix activated = gelu(up, ledger, BlockTag::Ffnn);
    Matrix down = matmul(activated, layer.w_ffnn2, ledger, BlockTag::Ffnn);
    add_row_vector_inplace(down, layer.b_ffnn2, ledger, BlockTag::Other);
    add_inplace(down, hidden, ledger, BlockTag::Other);
    return layer_norm_charged(down, layer.ln2_gain, layer.ln2_bias, ledger);
}

namespace {

std::vector<int> remap_protected(const std::vector<int>& positions,
                                 const std::vector<int>& new_positions) {
    std::vector<int> out;
    out.reserve(positions.size());
    for (int p : positions) {
        const int np = new_positions[p];
        if (np < 0) throw std::logic_error("protected position was pruned");
        out.push_back(np);
    }
    return out;
}

}  // namespace

LayerOutput encoder_layer_forward(const Matrix& hidden, const std::vector<std::uint8_t>& mask,
                                  const std::vector<int>& protected_positions,
                                  const LayerWeights& layer, const PruneConfig& prune_cfg,
                                  int layer_index, FlopLedger* ledger) {
    const LedgerRef lr{ledger, layer_index};
    MhaResult mha = mha_forward(hidden, mask, layer, lr);

    LayerOutput out;
    out.attention = mha.attention;
    if (schedule_applies(prune_cfg.schedule, layer_index)) {
        ImportanceScores scores = importance_scores(mha.attention, mask, protected_positions);
        MaskUpdate update = prune_mask(scores, mask, prune_cfg.alpha);
        RepackResult repacked = repack(mha.hidden, update, prune_cfg.merge);
        out.mask = std::move(repacked.mask);
        out.protected_positions = remap_protected(protected_positions, repacked.new_positions);
        out.hidden = ffnn_forward(repacked.hidden, layer, lr);
    } else {
        out.mask = mask;
        out.protected_positions = protected_positions;
        out.hidden = ffnn_forward(mha.hidden, layer, lr);
    }
    return out;
}

ForwardResult encoder_forward(const std::vector<TokenSequence>& batch,
                              const EncoderWeights& weights, const PruneConfig& prune_cfg,
                              FlopLedger* ledger, AttentionArchive* attention_out) {
    if (batch.empty()) throw std::invalid_argument("encoder_forward: empty batch");
    const std::size_t width = batch.front().ids.size();
    for (const TokenSequence& seq : batch) {
        if (seq.ids.size() != width)
            throw std::invalid_argument("encoder_forward: sequences must share one padded width");
        if (seq.ids.size() != seq.mask.size())
            throw std::invalid_argument("encoder_forward: ids/mask length mismatch");
    }

    const int b = static_cast<int>(batch.size());
    const int layers = static_cast<int>(weights.dims.layers);
    std::vector<Matrix> hidden;
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<std::vector<int>> protected_positions;
    hidden.reserve(b);
    for (const TokenSequence& seq : batch) {
        hidden.push_back(embed(seq, weights));
        masks.push_back(seq.mask);
        protected_positions.push_back(seq.protected_positions);
    }

    ForwardResult result;
    result.traces.assign(b, {});
    if (attention_out != nullptr) attention_out->assign(layers, {});

    auto kept = [](const std::vector<std::uint8_t>& m) {
        int n = 0;
        for (auto v : m) n += v;
        return n;
    };
    for (int s = 0; s < b; ++s) result.traces[s].push_back(kept(masks[s]));

    for (int l = 0; l < layers; ++l) {
        const LedgerRef lr{ledger, l};
        const LayerWeights& lw = weights.layers[l];

        std::vector<Matrix> mha_hidden;
        std::vector<std::vector<Matrix>> attention;
        mha_hidden.reserve(b);
        attention.reserve(b);
        for (int s = 0; s < b; ++s) {
            MhaResult mha = mha_forward(hidden[s], masks[s], lw, lr);
            mha_hidden.push_back(std::move(mha.hidden));
            attention.push_back(std::move(mha.attention));
        }
        if (attention_out != nullptr) (*attention_out)[l] = attention;

        if (schedule_applies(prune_cfg.schedule, l)) {
            std::vector<MaskUpdate> updates;
            updates.reserve(b);
            for (int s = 0; s < b; ++s) {
                ImportanceScores scores =
                    importance_scores(attention[s], masks[s], protected_positions[s]);
                updates.push_back(prune_mask(scores, masks[s], prune_cfg.alpha));
            }
            BatchRepackResult repacked = repack_batch(mha_hidden, updates, prune_cfg.merge);
            for (int s = 0; s < b; ++s)
                protected_positions[s] =
                    remap_protected(protected_positions[s], repacked.new_positions[s]);
            mha_hidden = std::move(repacked.hidden);
            masks = std::move(repacked.masks);
        }

        for (int s = 0; s < b; ++s) {
            hidden[s] = ffnn_forward(mha_hidden[s], lw, lr);
            result.traces[s].push_back(kept(masks[s]));
        }
    }

    const int d = static_cast<int>(weights.dims.d_mha);
    result.cls_vectors = Matrix(b, d);
    for (int s = 0; s < b; ++s) {
        // Repacking pins CLS to row 0.
        const float* src = hidden[s].row(0);
        float* dst = result.cls_vectors.row(s);
        for (int j = 0; j < d; ++j) dst[j] = src[j];
    }
    return result;
}

Matrix classify(const Matrix& cls_vectors, const Matrix& head_w, const std::vector<float>& head_b) {
    Matrix logits = matmul(cls_vectors, head_w);
    add_row_vector_inplace(logits, head_b);
    return logits;
}

// --- weight archive ---------------------------------------------------

namespace {

static_assert(std::endian::native == std::endian::little,
              "weight archive assumes a little-endian host");

struct TensorEntry {
    std::string name;
    const std::vector<float>* values;
};

void collect_tensors(const EncoderWeights& w, std::vector<TensorEntry>& out,
                     std::vector<std::pair<std::string, std::vector<std::size_t>>>& shapes) {
    auto add_mat = [&](const std::string& name, const Matrix& m) {
        out.push_back({name, &m.data()});
        shapes.push_back({name, {static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())}});
    };
    auto add_vec = [&](const std::string& name, const std::vector<float>& v) {
        out.push_back({name, &v});
        shapes.push_back({name, {v.size()}});
    };
    add_mat("token_embedding", w.token_embedding);
    add_mat("position_embedding", w.position_embedding);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
        const LayerWeights& lw = w.layers[l];
        const std::string prefix = "layer" + std::to_string(l) + ".";
        for (std::size_t h = 0; h < lw.w_q.size(); ++h) {
            const std::string hp = prefix + "head" + std::to_string(h) + ".";
            add_mat(hp + "w_q", lw.w_q[h]);
            add_vec(hp + "b_q", lw.b_q[h]);
            add_mat(hp + "w_k", lw.w_k[h]);
            add_vec(hp + "b_k", lw.b_k[h]);
            add_mat(hp + "w_v", lw.w_v[h]);
            add_vec(hp + "b_v", lw.b_v[h]);
        }
        add_mat(prefix + "w_o", lw.w_o);
        add_vec(prefix + "b_o", lw.b_o);
        add_mat(prefix + "ffnn.w1", lw.w_ffnn1);
        add_vec(prefix + "ffnn.b1", lw.b_ffnn1);
        add_mat(prefix + "ffnn.w2", lw.w_ffnn2);
        add_vec(prefix + "ffnn.b2", lw.b_ffnn2);
        add_vec(prefix + "ln1.gain", lw.ln1_gain);
        add_vec(prefix + "ln1.bias", lw.ln1_bias);
        add_vec(prefix + "ln2.gain", lw.ln2_gain);
        add_vec(prefix + "ln2.bias", lw.ln2_bias);
    }
    add_mat("classifier.w", w.classifier_w);
    add_vec("classifier.b", w.classifier_b);
}

}  // namespace

void save_weights(const EncoderWeights& weights, const std::string& manifest_path) {
    namespace fs = std::filesystem;
    const fs::path manifest_file(manifest_path);
    const fs::path blob_file = fs::path(manifest_file).replace_extension(".bin");

    std::vector<TensorEntry> tensors;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> shapes;
    collect_tensors(weights, tensors, shapes);

    std::ofstream blob(blob_file, std::ios::binary);
    if (!blob) throw std::runtime_error("save_weights: cannot open " + blob_file.string());

    nlohmann::ordered_json manifest;
    manifest["format"] = "f32le";
    manifest["blob"] = blob_file.filename().string();
    manifest["dims"] = {{"d_mha", weights.dims.d_mha},
                        {"heads", weights.dims.heads},
                        {"d_ffnn", weights.dims.d_ffnn},
                        {"layers", weights.dims.layers},
                        {"max_len", weights.dims.max_len}};
    manifest["vocab_size"] = weights.vocab_size;
    manifest["num_classes"] = weights.num_classes;
    manifest["tensors"] = nlohmann::ordered_json::array();

    std::size_t offset = 0;
    for (std::size_t t = 0; t < tensors.size(); ++t) {
        const std::vector<float>& values = *tensors[t].values;
        manifest["tensors"].push_back({{"name", tensors[t].name},
                                       {"shape", shapes[t].second},
                                       {"offset", offset}});
        blob.write(reinterpret_cast<const char*>(values.data()),
                   static_cast<std::streamsize>(values.size() * sizeof(float)));
        offset += values.size() * sizeof(float);
    }
    blob.close();
    if (!blob) throw std::runtime_error("save_weights: failed writing " + blob_file.string());

    std::ofstream mf(manifest_file);
    if (!mf) throw std::runtime_error("save_weights: cannot open " + manifest_file.string());
    mf << manifest.dump(2) << "\n";
}

EncoderWeights load_weights(const std::string& manifest_path) {
    namespace fs = std::filesystem;
    std::ifstream mf(manifest_path);
    if (!mf) throw std::runtime_error("load_weights: cannot open " + manifest_path);
    nlohmann::json manifest;
    try {
        mf >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("load_weights: bad manifest " + manifest_path + ": " + e.what());
    }

    ModelDims dims;
    dims.d_mha = manifest.at("dims").at("d_mha").get<std::int64_t>();
    dims.heads = manifest.at("dims").at("heads").get<std::int64_t>();
    dims.d_ffnn = manifest.at("dims").at("d_ffnn").get<std::int64_t>();
    dims.layers = manifest.at("dims").at("layers").get<std::int64_t>();
    dims.max_len = manifest.at("dims").at("max_len").get<std::int64_t>();
    dims.validate();

    const fs::path blob_file =
        fs::path(manifest_path).parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream blob(blob_file, std::ios::binary | std::ios::ate);
    if (!blob) throw std::runtime_error("load_weights: cannot open " + blob_file.string());
    const std::size_t blob_size = static_cast<std::size_t>(blob.tellg());

    std::size_t expected = 0;
    for (const auto& entry : manifest.at("tensors")) {
        std::size_t numel = 1;
        for (const auto& dim : entry.at("shape")) numel *= dim.get<std::size_t>();
        expected += numel * sizeof(float);
    }
    if (expected != blob_size)
        throw std::runtime_error("load_weights: blob " + blob_file.string() + " holds " +
                                 std::to_string(blob_size) + " bytes, manifest expects " +
                                 std::to_string(expected));

    auto read_values = [&](const nlohmann::json& entry) {
        std::size_t numel = 1;
        for (const auto& dim : entry.at("shape")) numel *= dim.get<std::size_t>();
        const std::size_t offset = entry.at("offset").get<std::size_t>();
        if (offset + numel * sizeof(float) > blob_size)
            throw std::runtime_error("load_weights: tensor " +
                                     entry.at("name").get<std::string>() + " overruns blob");
        std::vector<float> values(numel);
        blob.seekg(static_cast<std::streamoff>(offset));
        blob.read(reinterpret_cast<char*>(values.data()),
                  static_cast<std::streamsize>(numel * sizeof(float)));
        if (!blob) throw std::runtime_error("load_weights: short read in " + blob_file.string());
        return values;
    };

    std::map<std::string, const nlohmann::json*> by_name;
    for (const auto& entry : manifest.at("tensors"))
        by_name[entry.at("name").get<std::string>()] = &entry;
    auto get_mat = [&](const std::string& name) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("load_weights: manifest missing tensor " + name);
        const auto& shape = it->second->at("shape");
        if (shape.size() != 2)
            throw std::runtime_error("load_weights: tensor " + name + " is not 2-D");
        return Matrix(shape[0].get<int>(), shape[1].get<int>(), read_values(*it->second));
    };
    auto get_vec = [&](const std::string& name) {
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("load_weights: manifest missing tensor " + name);
        return read_values(*it->second);
    };

    EncoderWeights w;
    w.dims = dims;
    w.vocab_size = manifest.at("vocab_size").get<int>();
    w.num_classes = manifest.at("num_classes").get<int>();
    w.token_embedding = get_mat("token_embedding");
    w.position_embedding = get_mat("position_embedding");
    for (std::int64_t l = 0; l < dims.layers; ++l) {
        LayerWeights lw;
        const std::string prefix = "layer" + std::to_string(l) + ".";
        for (std::int64_t h = 0; h < dims.heads; ++h) {
            const std::string hp = prefix + "head" + std::to_string(h) + ".";
            lw.w_q.push_back(get_mat(hp + "w_q"));
            lw.b_q.push_back(get_vec(hp + "b_q"));
            lw.w_k.push_back(get_mat(hp + "w_k"));
            lw.b_k.push_back(get_vec(hp + "b_k"));
            lw.w_v.push_back(get_mat(hp + "w_v"));
            lw.b_v.push_back(get_vec(hp + "b_v"));
        }
        lw.w_o = get_mat(prefix + "w_o");
        lw.b_o = get_vec(prefix + "b_o");
        lw.w_ffnn1 = get_mat(prefix + "ffnn.w1");
        lw.b_ffnn1 = get_vec(prefix + "ffnn.b1");
        lw.w_ffnn2 = get_mat(prefix + "ffnn.w2");
        lw.b_ffnn2 = get_vec(prefix + "ffnn.b2");
        lw.ln1_gain = get_vec(prefix + "ln1.gain");
        lw.ln1_bias = get_vec(prefix + "ln1.bias");
        lw.ln2_gain = get_vec(prefix + "ln2.gain");
        lw.ln2_bias = get_vec(prefix + "ln2.bias");
        w.layers.push_back(std::move(lw));
    }
    w.classifier_w = get_mat("classifier.w");
    w.classifier_b = get_vec("classifier.b");
    return w;
}

}  // namespace alpine
