#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "alpine/matrix.hpp"

namespace alpine {

// Which encoder layers run the pruning step.
enum class Schedule { None, All, Even, Odd };

bool schedule_applies(Schedule schedule, int layer_index);
Schedule parse_schedule(const std::string& name);
const char* to_string(Schedule schedule);

struct PruneConfig {
    float alpha = 1.0f;  // keep window is [mean - alpha*sd, mean + alpha*sd]
    Schedule schedule = Schedule::None;
    bool merge = true;  // fold pruned rows into one mean row instead of dropping
};

// Per-position importance with NaN at CLS, SEP and PAD; those positions
// never compete for the keep window.
struct ImportanceScores {
    std::vector<float> values;
    std::vector<int> protected_positions;
};

// Mean attention received by each position, averaged over heads and over
// unmasked query rows, NaN-marked at protected and PAD positions.
ImportanceScores importance_scores(const std::vector<Matrix>& attention,
                                   const std::vector<std::uint8_t>& mask,
                                   const std::vector<int>& protected_positions);

struct MaskUpdate {
    std::vector<std::uint8_t> old_mask;
    std::vector<std::uint8_t> new_mask;
    std::vector<int> kept_indices;    // ascending
    std::vector<int> pruned_indices;  // ascending; unmasked, unprotected, out of window
};

// Range-based mask update: keep scores inside the closed window
// [mean - alpha*sd, mean + alpha*sd], then force CLS/SEP back on. When no
// position carries a valid score the mask is returned unchanged.
MaskUpdate prune_mask(const ImportanceScores& scores, const std::vector<std::uint8_t>& mask,
                      float alpha);

struct RepackResult {
    Matrix hidden;
    std::vector<std::uint8_t> mask;      // all-1: single-sequence repack carries no PAD
    std::vector<int> new_positions;      // old index -> new index, -1 if dropped
};

// Shrinks the activation matrix to the kept rows (original order). With
// merge enabled and at least one row pruned, the mean of the pruned rows
// is inserted just before the final kept row (the terminal SEP).
RepackResult repack(const Matrix& hidden, const MaskUpdate& update, bool merge);

struct BatchRepackResult {
    std::vector<Matrix> hidden;                     // all rows() == width
    std::vector<std::vector<std::uint8_t>> masks;   // 0 marks padding rows
    std::vector<std::vector<int>> new_positions;
    int width = 0;
};

// Repacks every sequence, then right-pads with zero rows so the batch
// shares one width (the longest repacked length).
BatchRepackResult repack_batch(const std::vector<Matrix>& hidden,
                               const std::vector<MaskUpdate>& updates, bool merge);

}  // namespace alpine
