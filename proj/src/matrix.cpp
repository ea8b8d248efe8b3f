#include "alpine/matrix.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace alpine {

namespace {

thread_local MemoryMeter* g_active_meter = nullptr;

std::string shape_str(int r, int c) {
    return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace

MemoryMeter* MemoryMeter::active() { return g_active_meter; }

MemoryMeter::Scope::Scope(MemoryMeter& meter) : previous_(g_active_meter) {
    g_active_meter = &meter;
}

MemoryMeter::Scope::~Scope() { g_active_meter = previous_; }

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0f) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("Matrix: invalid shape " + shape_str(rows, cols));
    register_allocation();
}

Matrix::Matrix(int rows, int cols, std::vector<float> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("Matrix: invalid shape " + shape_str(rows, cols));
    if (data_.size() != static_cast<std::size_t>(rows) * cols)
        throw std::invalid_argument("Matrix: data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_str(rows, cols));
    register_allocation();
}

Matrix::Matrix(const Matrix& other) : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
    register_allocation();
}

Matrix::Matrix(Matrix&& other) noexcept
    : rows_(other.rows_), cols_(other.cols_), data_(std::move(other.data_)), meter_(other.meter_) {
    other.rows_ = 0;
    other.cols_ = 0;
    other.meter_ = nullptr;
}

Matrix& Matrix::operator=(const Matrix& other) {
    if (this == &other) return *this;
    unregister_allocation();
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = other.data_;
    register_allocation();
    return *this;
}

Matrix& Matrix::operator=(Matrix&& other) noexcept {
    if (this == &other) return *this;
    unregister_allocation();
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = std::move(other.data_);
    meter_ = other.meter_;
    other.rows_ = 0;
    other.cols_ = 0;
    other.meter_ = nullptr;
    return *this;
}

Matrix::~Matrix() { unregister_allocation(); }

void Matrix::register_allocation() {
    meter_ = g_active_meter;
    if (meter_ != nullptr && !data_.empty()) meter_->alloc(bytes());
}

void Matrix::unregister_allocation() {
    if (meter_ != nullptr && !data_.empty()) meter_->release(bytes());
    meter_ = nullptr;
}

Matrix matmul(const Matrix& a, const Matrix& b, LedgerRef ledger, BlockTag tag) {
    if (a.cols() != b.rows())
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.rows(), a.cols()) +
                                    " * " + shape_str(b.rows(), b.cols()));
    const int m = a.rows();
    const int n = a.cols();
    const int l = b.cols();
    Matrix c(m, l);
    for (int i = 0; i < m; ++i) {
        float* ci = c.row(i);
        const float* ai = a.row(i);
        for (int k = 0; k < n; ++k) {
            const float aik = ai[k];
            const float* bk = b.row(k);
            for (int j = 0; j < l; ++j) ci[j] += aik * bk[j];
        }
    }
    const auto mm = static_cast<std::uint64_t>(m);
    const auto nn = static_cast<std::uint64_t>(n);
    const auto ll = static_cast<std::uint64_t>(l);
    ledger.add(tag, 2 * mm * nn * ll - mm * ll);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

void add_inplace(Matrix& a, const Matrix& b, LedgerRef ledger, BlockTag tag) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("add_inplace: shape mismatch " +
                                    shape_str(a.rows(), a.cols()) + " vs " +
                                    shape_str(b.rows(), b.cols()));
    for (std::size_t i = 0; i < a.data().size(); ++i) a.data()[i] += b.data()[i];
    ledger.add(tag, static_cast<std::uint64_t>(a.rows()) * a.cols());
}

void add_row_vector_inplace(Matrix& m, const std::vector<float>& v, LedgerRef ledger, BlockTag tag) {
    if (v.size() != static_cast<std::size_t>(m.cols()))
        throw std::invalid_argument("add_row_vector_inplace: vector length " +
                                    std::to_string(v.size()) + " vs cols " +
                                    std::to_string(m.cols()));
    for (int i = 0; i < m.rows(); ++i) {
        float* ri = m.row(i);
        for (int j = 0; j < m.cols(); ++j) ri[j] += v[j];
    }
    ledger.add(tag, static_cast<std::uint64_t>(m.rows()) * m.cols());
}

void scale_inplace(Matrix& m, float factor) {
    for (float& x : m.data()) x *= factor;
}

Matrix softmax_masked(const Matrix& scores, const std::vector<std::uint8_t>& key_mask,
                      LedgerRef ledger, BlockTag tag) {
    if (key_mask.size() != static_cast<std::size_t>(scores.cols()))
        throw std::invalid_argument("softmax_masked: mask length " +
                                    std::to_string(key_mask.size()) + " vs cols " +
                                    std::to_string(scores.cols()));
    Matrix out(scores.rows(), scores.cols());
    for (int i = 0; i < scores.rows(); ++i) {
        const float* src = scores.row(i);
        float* dst = out.row(i);
        float mx = -std::numeric_limits<float>::infinity();
        for (int j = 0; j < scores.cols(); ++j)
            if (key_mask[j] && src[j] > mx) mx = src[j];
        if (mx == -std::numeric_limits<float>::infinity()) continue;  // all keys masked
        float sum = 0.0f;
        for (int j = 0; j < scores.cols(); ++j) {
            if (!key_mask[j]) continue;  // masked keys stay exactly 0
            dst[j] = std::exp(src[j] - mx);
            sum += dst[j];
        }
        const float inv = 1.0f / sum;
        for (int j = 0; j < scores.cols(); ++j)
            if (key_mask[j]) dst[j] *= inv;
    }
    ledger.add(tag, 2ull * scores.rows() * scores.cols());
    return out;
}

Matrix layer_norm(const Matrix& x, const std::vector<float>& gain, const std::vector<float>& bias,
                  float epsilon) {
    if (gain.size() != static_cast<std::size_t>(x.cols()) ||
        bias.size() != static_cast<std::size_t>(x.cols()))
        throw std::invalid_argument("layer_norm: gain/bias length must equal cols");
    if (!(epsilon > 0.0f)) throw std::invalid_argument("layer_norm: epsilon must be positive");
    Matrix out(x.rows(), x.cols());
    const int d = x.cols();
    for (int i = 0; i < x.rows(); ++i) {
        const float* src = x.row(i);
        float* dst = out.row(i);
        float mean = 0.0f;
        for (int j = 0; j < d; ++j) mean += src[j];
        mean /= static_cast<float>(d);
        float var = 0.0f;
        for (int j = 0; j < d; ++j) {
            const float c = src[j] - mean;
            var += c * c;
        }
        var /= static_cast<float>(d);
        const float inv = 1.0f / std::sqrt(var + epsilon);
        for (int j = 0; j < d; ++j) dst[j] = (src[j] - mean) * inv * gain[j] + bias[j];
    }
    return out;
}

Matrix gelu(const Matrix& x, LedgerRef ledger, BlockTag tag) {
    // 0.5 * x * (1 + tanh(sqrt(2/pi) * (x + 0.044715 * x^3)))
    constexpr float kSqrt2OverPi = 0.7978845608028654f;
    constexpr float kCubicCoeff = 0.044715f;
    Matrix out(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.data().size(); ++i) {
        const float v = x.data()[i];
        out.data()[i] = 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + kCubicCoeff * v * v * v)));
    }
    ledger.add(tag, static_cast<std::uint64_t>(x.rows()) * x.cols());
    return out;
}

std::optional<MaskedStats> masked_mean_std(const std::vector<float>& values) {
    double sum = 0.0;
    int count = 0;
    for (float v : values) {
        if (std::isnan(v)) continue;
        sum += v;
        ++count;
    }
    if (count == 0) return std::nullopt;
    const double mean = sum / count;
    double sq = 0.0;
    for (float v : values) {
        if (std::isnan(v)) continue;
        const double c = v - mean;
        sq += c * c;
    }
    MaskedStats stats;
    stats.mean = static_cast<float>(mean);
    stats.stddev = static_cast<float>(std::sqrt(sq / count));
    stats.count = count;
    return stats;
}

Matrix seeded_random_matrix(int rows, int cols, std::uint32_t seed, float scale) {
    if (!(scale > 0.0f)) throw std::invalid_argument("seeded_random_matrix: scale must be positive");
    std::mt19937 rng(seed);
    std::uniform_real_distribution<float> dist(-scale, scale);
    Matrix m(rows, cols);
    for (float& x : m.data()) x = dist(rng);
    return m;
}

}  // namespace alpine
