#include "alpine/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "alpine/memory_meter.hpp"

namespace alpine {

CorpusMode parse_corpus_mode(const std::string& name) {
    if (name == "single") return CorpusMode::Single;
    if (name == "pair") return CorpusMode::Pair;
    throw std::invalid_argument("unknown corpus mode '" + name + "' (expected single|pair)");
}

const char* to_string(CorpusMode mode) {
    return mode == CorpusMode::Pair ? "pair" : "single";
}

namespace {

std::vector<int> read_token_array(const nlohmann::json& record, const char* field, int truncation,
                                  int line_no) {
    if (!record.contains(field) || !record[field].is_array())
        throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                 ": missing token array '" + field + "'");
    std::vector<int> tokens;
    for (const auto& v : record[field]) {
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": token ids must be non-negative integers");
        tokens.push_back(v.get<int>());
    }
    if (static_cast<int>(tokens.size()) > truncation) tokens.resize(truncation);
    return tokens;
}

}  // namespace

Corpus load_corpus(const std::string& path, CorpusMode mode, int truncation) {
    if (truncation < 0) throw std::invalid_argument("load_corpus: negative truncation budget");
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_corpus: cannot open " + path);

    Corpus corpus;
    corpus.mode = mode;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json record;
        try {
            record = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!record.is_object() || !record.contains("id") || !record["id"].is_string())
            throw std::runtime_error("corpus line " + std::to_string(line_no) +
                                     ": record must be an object with a string 'id'");
        CorpusItem item;
        item.id = record["id"].get<std::string>();
        if (mode == CorpusMode::Single) {
            item.tokens = read_token_array(record, "tokens", truncation, line_no);
        } else {
            item.tokens = read_token_array(record, "tokens_a", truncation, line_no);
            item.tokens_b = read_token_array(record, "tokens_b", truncation, line_no);
        }
        corpus.items.push_back(std::move(item));
    }
    if (corpus.items.empty()) throw std::runtime_error("load_corpus: empty corpus " + path);
    return corpus;
}

TokenSequence encode_sequence(const std::vector<int>& tokens, int max_len,
                              const SpecialTokens& specials) {
    const int n = static_cast<int>(tokens.size());
    if (n + 2 > max_len)
        throw std::invalid_argument("encode_sequence: " + std::to_string(n) +
                                    " tokens plus specials exceed max_len " +
                                    std::to_string(max_len));
    TokenSequence seq;
    seq.ids.assign(max_len, specials.pad);
    seq.mask.assign(max_len, 0);
    seq.ids[0] = specials.cls;
    for (int i = 0; i < n; ++i) seq.ids[i + 1] = tokens[i];
    seq.ids[n + 1] = specials.sep;
    for (int i = 0; i < n + 2; ++i) seq.mask[i] = 1;
    seq.protected_positions = {0, n + 1};
    return seq;
}

TokenSequence encode_pair(const std::vector<int>& tokens_a, const std::vector<int>& tokens_b,
                          int max_len, const SpecialTokens& specials) {
    const int na = static_cast<int>(tokens_a.size());
    const int nb = static_cast<int>(tokens_b.size());
    if (na + nb + 3 > max_len)
        throw std::invalid_argument("encode_pair: " + std::to_string(na + nb) +
                                    " tokens plus specials exceed max_len " +
                                    std::to_string(max_len));
    TokenSequence seq;
    seq.ids.assign(max_len, specials.pad);
    seq.mask.assign(max_len, 0);
    seq.ids[0] = specials.cls;
    for (int i = 0; i < na; ++i) seq.ids[i + 1] = tokens_a[i];
    seq.ids[na + 1] = specials.sep;
    for (int i = 0; i < nb; ++i) seq.ids[na + 2 + i] = tokens_b[i];
    seq.ids[na + nb + 2] = specials.sep;
    for (int i = 0; i < na + nb + 3; ++i) seq.mask[i] = 1;
    seq.protected_positions = {0, na + 1, na + nb + 2};
    return seq;
}

std::vector<int> hash_tokenize(const std::string& text, int vocab_size,
                               const SpecialTokens& specials) {
    const int base = specials.sep + 1;
    if (vocab_size <= base) throw std::invalid_argument("hash_tokenize: vocab too small");
    std::vector<int> tokens;
    std::istringstream words(text);
    std::string word;
    while (words >> word) {
        // FNV-1a
        std::uint32_t hash = 2166136261u;
        for (unsigned char c : word) {
            hash ^= c;
            hash *= 16777619u;
        }
        tokens.push_back(base + static_cast<int>(hash % (vocab_size - base)));
    }
    return tokens;
}

namespace {

struct PassResult {
    FlopLedger ledger;
    std::vector<std::vector<int>> traces;  // per sequence, layers + 1 entries
    std::size_t peak_memory = 0;
    double forward_seconds = 0.0;
};

// Drops trailing all-PAD columns so each batch runs at its own width; the
// baseline and pruned passes see identical entry widths.
std::vector<TokenSequence> trim_batch(const std::vector<TokenSequence>& batch) {
    std::size_t width = 1;
    for (const TokenSequence& seq : batch) {
        std::size_t last = 0;
        for (std::size_t i = 0; i < seq.mask.size(); ++i)
            if (seq.mask[i]) last = i;
        width = std::max(width, last + 1);
    }
    std::vector<TokenSequence> trimmed;
    trimmed.reserve(batch.size());
    for (const TokenSequence& seq : batch) {
        TokenSequence t;
        t.ids.assign(seq.ids.begin(), seq.ids.begin() + width);
        t.mask.assign(seq.mask.begin(), seq.mask.begin() + width);
        t.protected_positions = seq.protected_positions;
        trimmed.push_back(std::move(t));
    }
    return trimmed;
}

PassResult run_pass(const std::vector<TokenSequence>& sequences, const EncoderWeights& weights,
                    const PruneConfig& prune, int batch_size) {
    PassResult result;
    MemoryMeter meter;
    {
        MemoryMeter::Scope scope(meter);
        for (std::size_t begin = 0; begin < sequences.size(); begin += batch_size) {
            const std::size_t end = std::min(sequences.size(), begin + batch_size);
            const std::vector<TokenSequence> chunk(sequences.begin() + begin,
                                                   sequences.begin() + end);
            const std::vector<TokenSequence> batch = trim_batch(chunk);
            const auto t0 = std::chrono::steady_clock::now();
            ForwardResult fwd = encoder_forward(batch, weights, prune, &result.ledger);
            const auto t1 = std::chrono::steady_clock::now();
            result.forward_seconds += std::chrono::duration<double>(t1 - t0).count();
            for (auto& trace : fwd.traces) result.traces.push_back(std::move(trace));
        }
    }
    result.peak_memory = meter.peak_bytes();
    return result;
}

std::pair<std::int64_t, std::int64_t> analytical_totals(
    const std::vector<std::vector<int>>& traces, const ModelDims& dims) {
    std::int64_t entry = 0;
    std::int64_t split = 0;
    for (const auto& trace : traces) {
        std::vector<std::int64_t> entry_lengths(trace.begin(), trace.end() - 1);
        std::vector<std::int64_t> post_lengths(trace.begin() + 1, trace.end());
        entry += model_total(entry_lengths, dims);
        split += model_total_split(entry_lengths, post_lengths, dims);
    }
    return {entry, split};
}

}  // namespace

ExperimentReport run_experiment(const Corpus& corpus, const EncoderWeights& weights,
                                const PruneConfig& prune, int batch_size, const RunMeta& meta) {
    if (batch_size < 1) throw std::invalid_argument("run_experiment: batch_size must be >= 1");
    if (corpus.items.empty()) throw std::invalid_argument("run_experiment: empty corpus");

    const int max_len = static_cast<int>(weights.dims.max_len);
    std::vector<TokenSequence> sequences;
    sequences.reserve(corpus.items.size());
    for (const CorpusItem& item : corpus.items) {
        if (corpus.mode == CorpusMode::Single)
            sequences.push_back(encode_sequence(item.tokens, max_len));
        else
            sequences.push_back(encode_pair(item.tokens, item.tokens_b, max_len));
    }

    const PassResult pass = run_pass(sequences, weights, prune, batch_size);
    const bool pruned_run = prune.schedule != Schedule::None;
    PassResult baseline;
    if (pruned_run) {
        PruneConfig none = prune;
        none.schedule = Schedule::None;
        baseline = run_pass(sequences, weights, none, batch_size);
    }
    const PassResult& base = pruned_run ? baseline : pass;

    ExperimentReport report;
    report.corpus = meta.corpus_path;
    report.mode = corpus.mode;
    report.seed = meta.seed;
    report.prune = prune;
    report.batch_size = batch_size;
    report.items = static_cast<int>(corpus.items.size());
    report.dims = weights.dims;

    const int layers = static_cast<int>(weights.dims.layers);
    for (int l = 0; l < layers; ++l) {
        LayerReport lr;
        lr.layer = l;
        double sum = 0.0;
        for (const auto& trace : pass.traces) sum += trace[l];
        lr.mean_kept_length = sum / static_cast<double>(pass.traces.size());
        lr.mha_flops = pass.ledger.at(l, BlockTag::Mha);
        lr.ffnn_flops = pass.ledger.at(l, BlockTag::Ffnn);
        report.per_layer.push_back(lr);
    }

    report.empirical_mha = pass.ledger.block_total(BlockTag::Mha);
    report.empirical_ffnn = pass.ledger.block_total(BlockTag::Ffnn);
    report.empirical_other = pass.ledger.block_total(BlockTag::Other);
    report.empirical_total = pass.ledger.total();

    const auto [entry, split] = analytical_totals(pass.traces, weights.dims);
    report.analytical_entry_length = entry;
    report.analytical_post_prune = split;

    report.baseline_empirical_total = base.ledger.total();
    report.speedup_ratio = static_cast<double>(report.baseline_empirical_total) /
                           static_cast<double>(report.empirical_total);

    report.peak_memory_bytes = pass.peak_memory;
    report.baseline_peak_memory_bytes = base.peak_memory;

    report.wall_clock_seconds = pass.forward_seconds;
    report.throughput = pass.forward_seconds > 0.0
                            ? static_cast<double>(report.items) / pass.forward_seconds
                            : 0.0;
    report.baseline_throughput = base.forward_seconds > 0.0
                                     ? static_cast<double>(report.items) / base.forward_seconds
                                     : 0.0;
    return report;
}

nlohmann::ordered_json report_to_json(const ExperimentReport& report) {
    nlohmann::ordered_json j;
    j["config"] = {{"corpus", report.corpus},
                   {"mode", to_string(report.mode)},
                   {"seed", report.seed},
                   {"schedule", to_string(report.prune.schedule)},
                   {"alpha", report.prune.alpha},
                   {"merge", report.prune.merge},
                   {"batch_size", report.batch_size},
                   {"items", report.items},
                   {"dims",
                    {{"d_mha", report.dims.d_mha},
                     {"heads", report.dims.heads},
                     {"d_ffnn", report.dims.d_ffnn},
                     {"layers", report.dims.layers},
                     {"max_len", report.dims.max_len}}}};
    j["per_layer"] = nlohmann::ordered_json::array();
    for (const LayerReport& lr : report.per_layer)
        j["per_layer"].push_back({{"layer", lr.layer},
                                  {"mean_kept_length", lr.mean_kept_length},
                                  {"mha_flops", lr.mha_flops},
                                  {"ffnn_flops", lr.ffnn_flops}});
    j["flops"] = {{"empirical",
                   {{"mha", report.empirical_mha},
                    {"ffnn", report.empirical_ffnn},
                    {"other", report.empirical_other},
                    {"total", report.empirical_total}}},
                  {"analytical",
                   {{"entry_length", report.analytical_entry_length},
                    {"post_prune", report.analytical_post_prune}}},
                  {"baseline_empirical_total", report.baseline_empirical_total},
                  {"speedup_ratio", report.speedup_ratio}};
    j["memory"] = {{"peak_bytes", report.peak_memory_bytes},
                   {"baseline_peak_bytes", report.baseline_peak_memory_bytes}};
    j["timing"] = {{"throughput", report.throughput},
                   {"wall_clock_seconds", report.wall_clock_seconds},
                   {"baseline_throughput", report.baseline_throughput}};
    return j;
}

std::string report_to_csv(const ExperimentReport& report) {
    std::string out = "layer,mean_kept_length,mha_flops,ffnn_flops\n";
    char buf[128];
    for (const LayerReport& lr : report.per_layer) {
        std::snprintf(buf, sizeof(buf), "%d,%.17g,%" PRIu64 ",%" PRIu64 "\n", lr.layer,
                      lr.mean_kept_length, lr.mha_flops, lr.ffnn_flops);
        out += buf;
    }
    std::snprintf(buf, sizeof(buf), "total,,%" PRIu64 ",%" PRIu64 "\n", report.empirical_mha,
                  report.empirical_ffnn);
    out += buf;
    return out;
}

void emit_report(const ExperimentReport& report, const std::string& path,
                 const std::string& format) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_report: cannot open " + path);
    if (format == "json")
        out << report_to_json(report).dump(2) << "\n";
    else if (format == "csv")
        out << report_to_csv(report);
    else
        throw std::invalid_argument("emit_report: unknown format '" + format + "'");
    out.close();
    if (!out) throw std::runtime_error("emit_report: failed writing " + path);
}

}  // namespace alpine
