#include "alpine/pruning.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace alpine {

bool schedule_applies(Schedule schedule, int layer_index) {
    if (layer_index < 0) throw std::invalid_argument("schedule_applies: negative layer index");
    switch (schedule) {
        case Schedule::None: return false;
        case Schedule::All: return true;
        case Schedule::Even: return layer_index % 2 == 0;
        case Schedule::Odd: return layer_index % 2 == 1;
    }
    return false;
}

Schedule parse_schedule(const std::string& name) {
    if (name == "none") return Schedule::None;
    if (name == "all") return Schedule::All;
    if (name == "even") return Schedule::Even;
    if (name == "odd") return Schedule::Odd;
    throw std::invalid_argument("unknown schedule '" + name + "' (expected none|all|even|odd)");
}

const char* to_string(Schedule schedule) {
    switch (schedule) {
        case Schedule::None: return "none";
        case Schedule::All: return "all";
        case Schedule::Even: return "even";
        case Schedule::Odd: return "odd";
    }
    return "none";
}

ImportanceScores importance_scores(const std::vector<Matrix>& attention,
                                   const std::vector<std::uint8_t>& mask,
                                   const std::vector<int>& protected_positions) {
    if (attention.empty()) throw std::invalid_argument("importance_scores: no attention heads");
    const int s = static_cast<int>(mask.size());
    for (const Matrix& a : attention)
        if (a.rows() != s || a.cols() != s)
            throw std::invalid_argument("importance_scores: attention must be SxS with S == mask length");
    for (int p : protected_positions)
        if (p < 0 || p >= s || !mask[p])
            throw std::invalid_argument("importance_scores: protected position outside unmasked range");

    int valid_queries = 0;
    for (int k = 0; k < s; ++k) valid_queries += mask[k];
    if (valid_queries == 0) throw std::invalid_argument("importance_scores: degenerate sequence");

    // Column means of the head-averaged attention, taken over real (non-PAD)
    // query rows only; PAD queries carry no signal.
    ImportanceScores out;
    out.values.assign(s, 0.0f);
    out.protected_positions = protected_positions;
    const double norm = 1.0 / (static_cast<double>(attention.size()) * valid_queries);
    for (const Matrix& a : attention) {
        for (int k = 0; k < s; ++k) {
            if (!mask[k]) continue;
            const float* row = a.row(k);
            for (int i = 0; i < s; ++i) out.values[i] += row[i];
        }
    }
    for (float& v : out.values) v = static_cast<float>(v * norm);

    const float nan = std::numeric_limits<float>::quiet_NaN();
    for (int i = 0; i < s; ++i)
        if (!mask[i]) out.values[i] = nan;
    for (int p : protected_positions) out.values[p] = nan;
    return out;
}

MaskUpdate prune_mask(const ImportanceScores& scores, const std::vector<std::uint8_t>& mask,
                      float alpha) {
    if (scores.values.size() != mask.size())
        throw std::invalid_argument("prune_mask: scores length must equal mask length");
    if (alpha < 0.0f) throw std::invalid_argument("prune_mask: alpha must be non-negative");
    const int s = static_cast<int>(mask.size());

    MaskUpdate update;
    update.old_mask = mask;

    const auto stats = masked_mean_std(scores.values);
    if (!stats.has_value()) {
        // Only CLS/SEP (and PAD) remain: nothing to score, skip pruning.
        update.new_mask = mask;
        for (int i = 0; i < s; ++i)
            if (mask[i]) update.kept_indices.push_back(i);
        return update;
    }

    const float lo = stats->mean - alpha * stats->stddev;
    const float hi = stats->mean + alpha * stats->stddev;
    update.new_mask.assign(s, 0);
    for (int i = 0; i < s; ++i) {
        const float v = scores.values[i];
        if (mask[i] && !std::isnan(v) && v >= lo && v <= hi) update.new_mask[i] = 1;
    }
    for (int p : scores.protected_positions) update.new_mask[p] = 1;

    for (int i = 0; i < s; ++i) {
        if (update.new_mask[i]) update.kept_indices.push_back(i);
        else if (mask[i]) update.pruned_indices.push_back(i);
    }
    return update;
}

RepackResult repack(const Matrix& hidden, const MaskUpdate& update, bool merge) {
    if (hidden.rows() != static_cast<int>(update.new_mask.size()))
        throw std::invalid_argument("repack: hidden rows must equal mask length");
    if (update.kept_indices.empty()) throw std::invalid_argument("repack: no kept rows");

    const int d = hidden.cols();
    const int kept = static_cast<int>(update.kept_indices.size());
    const bool add_merged = merge && !update.pruned_indices.empty();
    const int out_rows = kept + (add_merged ? 1 : 0);

    RepackResult result;
    result.hidden = Matrix(out_rows, d);
    result.mask.assign(out_rows, 1);
    result.new_positions.assign(update.new_mask.size(), -1);

    // Merged row sits just before the last kept row, keeping CLS at 0 and
    // the terminal SEP last.
    int row = 0;
    for (int idx = 0; idx < kept; ++idx) {
        if (add_merged && idx == kept - 1) ++row;
        const int old = update.kept_indices[idx];
        result.new_positions[old] = row;
        const float* src = hidden.row(old);
        float* dst = result.hidden.row(row);
        for (int j = 0; j < d; ++j) dst[j] = src[j];
        ++row;
    }
    if (add_merged) {
        float* dst = result.hidden.row(out_rows - 2);
        for (int old : update.pruned_indices) {
            const float* src = hidden.row(old);
            for (int j = 0; j < d; ++j) dst[j] += src[j];
        }
        const float inv = 1.0f / static_cast<float>(update.pruned_indices.size());
        for (int j = 0; j < d; ++j) dst[j] *= inv;
    }
    return result;
}

BatchRepackResult repack_batch(const std::vector<Matrix>& hidden,
                               const std::vector<MaskUpdate>& updates, bool merge) {
    if (hidden.size() != updates.size())
        throw std::invalid_argument("repack_batch: one update per sequence required");
    if (hidden.empty()) throw std::invalid_argument("repack_batch: empty batch");

    BatchRepackResult out;
    out.hidden.reserve(hidden.size());
    out.masks.reserve(hidden.size());
    out.new_positions.reserve(hidden.size());

    std::vector<RepackResult> repacked;
    repacked.reserve(hidden.size());
    for (std::size_t s = 0; s < hidden.size(); ++s) {
        repacked.push_back(repack(hidden[s], updates[s], merge));
        out.width = std::max(out.width, repacked.back().hidden.rows());
    }

    const int d = hidden.front().cols();
    for (RepackResult& r : repacked) {
        const int len = r.hidden.rows();
        Matrix padded(out.width, d);
        for (int i = 0; i < len; ++i) {
            const float* src = r.hidden.row(i);
            float* dst = padded.row(i);
            for (int j = 0; j < d; ++j) dst[j] = src[j];
        }
        std::vector<std::uint8_t> mask(out.width, 0);
        for (int i = 0; i < len; ++i) mask[i] = 1;
        out.hidden.push_back(std::move(padded));
        out.masks.push_back(std::move(mask));
        out.new_positions.push_back(std::move(r.new_positions));
    }
    return out;
}

}  // namespace alpine
