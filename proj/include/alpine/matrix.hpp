#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "alpine/flop_ledger.hpp"
#include "alpine/memory_meter.hpp"

namespace alpine {

class MemoryMeter;

// Dense row-major float32 matrix; the sole numeric container for hidden
// states, weights and attention probabilities. Allocations report to the
// thread's active MemoryMeter, if any.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(int rows, int cols, std::vector<float> values);

    Matrix(const Matrix& other);
    Matrix(Matrix&& other) noexcept;
    Matrix& operator=(const Matrix& other);
    Matrix& operator=(Matrix&& other) noexcept;
    ~Matrix();

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    bool empty() const { return rows_ == 0; }
    std::size_t bytes() const { return data_.size() * sizeof(float); }

    float& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    float operator()(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

    float* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const float* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

private:
    void register_allocation();
    void unregister_allocation();

    int rows_ = 0;
    int cols_ = 0;
    std::vector<float> data_;
    MemoryMeter* meter_ = nullptr;
};

// C = A * B with the 2MNL - ML operation count charged to the ledger.
Matrix matmul(const Matrix& a, const Matrix& b, LedgerRef ledger = {}, BlockTag tag = BlockTag::Other);

// Data movement only; no FLOPs charged.
Matrix transpose(const Matrix& a);

// a += b elementwise, one op per element.
void add_inplace(Matrix& a, const Matrix& b, LedgerRef ledger = {}, BlockTag tag = BlockTag::Other);

// Adds v to every row (bias), one op per element.
void add_row_vector_inplace(Matrix& m, const std::vector<float>& v, LedgerRef ledger = {},
                            BlockTag tag = BlockTag::Other);

// Uncharged scalar multiply; the softmax per-element convention already
// covers attention score scaling.
void scale_inplace(Matrix& m, float factor);

// Row-wise softmax over unmasked key columns. Masked columns come out as
// exactly 0; a row with no unmasked key becomes all-zero. Charges two ops
// per element.
Matrix softmax_masked(const Matrix& scores, const std::vector<std::uint8_t>& key_mask,
                      LedgerRef ledger = {}, BlockTag tag = BlockTag::Other);

// Per-row normalization to zero mean / unit variance followed by the
// gain/bias affine map. Population variance; epsilon keeps constant rows
// finite.
Matrix layer_norm(const Matrix& x, const std::vector<float>& gain, const std::vector<float>& bias,
                  float epsilon);

// Elementwise GELU (tanh approximation), one op per element.
Matrix gelu(const Matrix& x, LedgerRef ledger = {}, BlockTag tag = BlockTag::Other);

struct MaskedStats {
    float mean = 0.0f;
    float stddev = 0.0f;  // population convention
    int count = 0;
};

// Mean / population SD over the non-NaN entries. Empty result when every
// entry is NaN.
std::optional<MaskedStats> masked_mean_std(const std::vector<float>& values);

// Uniform values in [-scale, scale], reproducible for a fixed seed.
Matrix seeded_random_matrix(int rows, int cols, std::uint32_t seed, float scale);

}  // namespace alpine
