#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alpine/encoder.hpp"
#include "alpine/flops_model.hpp"
#include "alpine/pruning.hpp"
#include "alpine/token_sequence.hpp"

#include "json.hpp"

namespace alpine {

enum class CorpusMode { Single, Pair };

CorpusMode parse_corpus_mode(const std::string& name);
const char* to_string(CorpusMode mode);

struct CorpusItem {
    std::string id;
    std::vector<int> tokens;    // single mode, or first half of a pair
    std::vector<int> tokens_b;  // pair mode only
};

struct Corpus {
    CorpusMode mode = CorpusMode::Single;
    std::vector<CorpusItem> items;
};

// Reads one JSON record per line. Single mode needs {"id", "tokens"}, pair
// mode {"id", "tokens_a", "tokens_b"}. Every token list is tail-truncated
// to `truncation` ids before special-token insertion.
Corpus load_corpus(const std::string& path, CorpusMode mode, int truncation);

// [CLS, tokens..., SEP, PAD...] padded to max_len; mask 0 marks PAD.
TokenSequence encode_sequence(const std::vector<int>& tokens, int max_len,
                              const SpecialTokens& specials = {});

// [CLS, a..., SEP, b..., SEP, PAD...]; every SEP is protected.
TokenSequence encode_pair(const std::vector<int>& tokens_a, const std::vector<int>& tokens_b,
                          int max_len, const SpecialTokens& specials = {});

// Whitespace split + hashing into [sep+1, vocab); smoke-test helper, not a
// real tokenizer.
std::vector<int> hash_tokenize(const std::string& text, int vocab_size,
                               const SpecialTokens& specials = {});

struct LayerReport {
    int layer = 0;
    double mean_kept_length = 0.0;
    std::uint64_t mha_flops = 0;
    std::uint64_t ffnn_flops = 0;
};

struct ExperimentReport {
    // config echo
    std::string corpus;
    CorpusMode mode = CorpusMode::Single;
    std::uint32_t seed = 0;
    PruneConfig prune;
    int batch_size = 1;
    int items = 0;
    ModelDims dims;

    std::vector<LayerReport> per_layer;

    // empirical ledger totals
    std::uint64_t empirical_mha = 0;
    std::uint64_t empirical_ffnn = 0;
    std::uint64_t empirical_other = 0;
    std::uint64_t empirical_total = 0;

    // analytical totals over per-sequence kept-length traces
    std::int64_t analytical_entry_length = 0;  // every block at the layer-entry length
    std::int64_t analytical_post_prune = 0;    // FFNN at the post-prune length

    std::uint64_t baseline_empirical_total = 0;
    double speedup_ratio = 1.0;  // baseline empirical / this run's empirical

    std::size_t peak_memory_bytes = 0;
    std::size_t baseline_peak_memory_bytes = 0;

    // timing (excluded from determinism comparisons)
    double throughput = 0.0;  // sequences per second of forward wall-clock
    double wall_clock_seconds = 0.0;
    double baseline_throughput = 0.0;
};

struct RunMeta {
    std::string corpus_path;
    std::uint32_t seed = 0;
};

// Runs the full corpus through the encoder under `prune`, plus a no-prune
// baseline when the schedule is active, and aggregates every metric.
ExperimentReport run_experiment(const Corpus& corpus, const EncoderWeights& weights,
                                const PruneConfig& prune, int batch_size,
                                const RunMeta& meta = {});

nlohmann::ordered_json report_to_json(const ExperimentReport& report);
std::string report_to_csv(const ExperimentReport& report);

// format is "json" or "csv".
void emit_report(const ExperimentReport& report, const std::string& path,
                 const std::string& format);

}  // namespace alpine
