#include "alpine/cli.hpp"

#include <cstdint>
#include <exception>
#include <string>

#include "CLI11.hpp"

#include "alpine/encoder.hpp"
#include "alpine/flops_model.hpp"
#include "alpine/harness.hpp"
#include "alpine/pruning.hpp"

namespace alpine {

namespace {

struct DimsFlags {
    std::string preset = "desk";
    std::int64_t d = 0, heads = 0, d_ffnn = 0, layers = 0, max_len = 0;

    ModelDims resolve() const {
        ModelDims dims = preset == "paper" ? ModelDims::paper() : ModelDims::desk();
        if (d > 0) {
            dims.d_mha = d;
            dims.d_ffnn = 4 * d;  // unless --dff overrides below
        }
        if (heads > 0) dims.heads = heads;
        if (d_ffnn > 0) dims.d_ffnn = d_ffnn;
        if (layers > 0) dims.layers = layers;
        if (max_len > 0) dims.max_len = max_len;
        dims.validate();
        return dims;
    }
};

void add_dims_flags(CLI::App* cmd, DimsFlags& flags) {
    // Long-only help so --h stays available for the head count.
    cmd->set_help_flag("--help", "Print help and exit");
    cmd->add_option("--dims", flags.preset, "Dimension preset: desk or paper")
        ->check(CLI::IsMember({"desk", "paper"}))
        ->capture_default_str();
    cmd->add_option("--d", flags.d, "Hidden dimension override");
    cmd->add_option("--h,--heads", flags.heads, "Attention head count override");
    cmd->add_option("--dff", flags.d_ffnn, "Feed-forward dimension override");
    cmd->add_option("--layers", flags.layers, "Encoder layer count override");
    cmd->add_option("--max-len", flags.max_len, "Maximum sequence length override");
}

int run_command(const std::string& corpus_path, const std::string& mode_name,
                const std::string& schedule_name, float alpha, bool merge, int batch_size,
                std::uint32_t seed, const DimsFlags& dims_flags, int vocab, int classes,
                const std::string& weights_path, const std::string& report_path,
                const std::string& format, std::ostream& out) {
    const CorpusMode mode = parse_corpus_mode(mode_name);

    EncoderWeights weights;
    if (!weights_path.empty()) {
        weights = load_weights(weights_path);
        out << "loaded weights from " << weights_path << "\n";
    } else {
        weights = EncoderWeights::random(dims_flags.resolve(), vocab, classes, seed);
    }
    const ModelDims& dims = weights.dims;

    // Content budget per token list, leaving room for the special tokens.
    const int budget = mode == CorpusMode::Pair
                           ? static_cast<int>((dims.max_len - 3) / 2)
                           : static_cast<int>(dims.max_len - 2);
    if (budget < 1) throw std::invalid_argument("max_len too small for any content tokens");

    const Corpus corpus = load_corpus(corpus_path, mode, budget);

    PruneConfig prune;
    prune.schedule = parse_schedule(schedule_name);
    prune.alpha = alpha;
    prune.merge = merge;

    RunMeta meta;
    meta.corpus_path = corpus_path;
    meta.seed = seed;

    const ExperimentReport report = run_experiment(corpus, weights, prune, batch_size, meta);

    out << "items:              " << report.items << "\n"
        << "schedule:           " << to_string(prune.schedule) << " (alpha " << prune.alpha
        << ", " << (prune.merge ? "merge" : "drop") << ")\n"
        << "empirical flops:    " << report.empirical_total << "\n"
        << "baseline flops:     " << report.baseline_empirical_total << "\n"
        << "speedup ratio:      " << report.speedup_ratio << "\n"
        << "throughput:         " << report.throughput << " seq/s\n"
        << "peak activations:   " << report.peak_memory_bytes << " bytes\n";
    if (!report.per_layer.empty()) {
        out << "mean kept length:   ";
        for (const LayerReport& lr : report.per_layer) out << lr.mean_kept_length << " ";
        out << "\n";
    }

    if (!report_path.empty()) {
        emit_report(report, report_path, format);
        out << "report written to " << report_path << " (" << format << ")\n";
    }
    return 0;
}

int flops_command(std::int64_t n, const DimsFlags& dims_flags, std::ostream& out) {
    ModelDims dims = dims_flags.resolve();
    const MhaFlopBreakdown mha = flops_mha(n, dims);
    const std::int64_t ffnn = flops_ffnn(n, dims);
    out << "n=" << n << " d=" << dims.d_mha << " heads=" << dims.heads
        << " d_ffnn=" << dims.d_ffnn << "\n"
        << "linear_proj      " << mha.linear_proj << "\n"
        << "scaled_dot_attn  " << mha.scaled_dot_attn << "\n"
        << "attn_times_v     " << mha.attn_times_v << "\n"
        << "final_proj       " << mha.final_proj << "\n"
        << "component_sum    " << mha.component_sum << "\n"
        << "mha_total        " << mha.paper_total << "\n"
        << "ffnn_total       " << ffnn << "\n"
        << "layer_total      " << mha.paper_total + ffnn << "\n"
        << "crossover_length " << crossover_length(dims) << "\n";
    return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Transformer encoder benchmark with adaptive token pruning"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "Run a corpus through the encoder and report metrics");
    std::string corpus_path;
    std::string mode_name = "single";
    std::string schedule_name = "none";
    float alpha = 1.0f;
    bool merge = true;
    int batch_size = 8;
    std::uint32_t seed = 42;
    DimsFlags run_dims;
    int vocab = 1024;
    int classes = 2;
    std::string weights_path;
    std::string report_path;
    std::string format = "json";
    run->add_option("--corpus", corpus_path, "Corpus file, one JSON record per line")->required();
    run->add_option("--mode", mode_name, "Record layout: single or pair")
        ->check(CLI::IsMember({"single", "pair"}))
        ->capture_default_str();
    run->add_option("--schedule", schedule_name, "Pruning layer schedule")
        ->check(CLI::IsMember({"none", "all", "even", "odd"}))
        ->capture_default_str();
    run->add_option("--alpha", alpha, "Keep-window width multiplier")->capture_default_str();
    run->add_flag("--merge,!--no-merge", merge, "Merge pruned rows into one (default: merge)");
    run->add_option("--batch-size", batch_size, "Sequences per forward batch")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    run->add_option("--seed", seed, "Weight/init seed")->capture_default_str();
    add_dims_flags(run, run_dims);
    run->add_option("--vocab", vocab, "Vocabulary size for generated weights")
        ->capture_default_str();
    run->add_option("--classes", classes, "Classifier output width")->capture_default_str();
    run->add_option("--weights", weights_path, "Weight archive manifest to load");
    run->add_option("--report", report_path, "Write the full report to this path");
    run->add_option("--format", format, "Report format: json or csv")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    // flops
    auto* flops = app.add_subcommand("flops", "Print the analytical per-layer FLOP breakdown");
    std::int64_t n = 512;
    DimsFlags flops_dims;
    flops->add_option("--n", n, "Sequence length")->capture_default_str();
    add_dims_flags(flops, flops_dims);

    // crossover
    auto* crossover = app.add_subcommand(
        "crossover", "Print the length below which the FFNN out-costs the MHA");
    std::int64_t cross_d = 768;
    std::int64_t cross_h = 12;
    crossover->set_help_flag("--help", "Print help and exit");
    crossover->add_option("--d", cross_d, "Hidden dimension")->capture_default_str();
    crossover->add_option("--h,--heads", cross_h, "Attention head count")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());  // CLI11 convention
        app.parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        if (run->parsed())
            return run_command(corpus_path, mode_name, schedule_name, alpha, merge, batch_size,
                               seed, run_dims, vocab, classes, weights_path, report_path, format,
                               out);
        if (flops->parsed()) return flops_command(n, flops_dims, out);
        if (crossover->parsed()) {
            ModelDims dims;
            dims.d_mha = cross_d;
            dims.heads = cross_h;
            out << crossover_length(dims) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace alpine
