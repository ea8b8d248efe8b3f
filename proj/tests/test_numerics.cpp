#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "alpine/matrix.hpp"
#include "alpine/memory_meter.hpp"

using namespace alpine;

namespace {

const float kNaN = std::numeric_limits<float>::quiet_NaN();

Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0f;
    return m;
}

}  // namespace

TEST_CASE("matmul product and operation count") {
    FlopLedger ledger;
    const LedgerRef ref{&ledger, 0};

    SUBCASE("2x3 times 3x4 charges 2MNL - ML") {
        Matrix a = seeded_random_matrix(2, 3, 1, 1.0f);
        Matrix b = seeded_random_matrix(3, 4, 2, 1.0f);
        Matrix c = matmul(a, b, ref, BlockTag::Mha);
        CHECK(c.rows() == 2);
        CHECK(c.cols() == 4);
        CHECK(ledger.at(0, BlockTag::Mha) == 40);  // 2*2*3*4 - 2*4
    }

    SUBCASE("identity leaves operand unchanged") {
        Matrix x = seeded_random_matrix(3, 3, 3, 1.0f);
        Matrix y = matmul(identity(3), x, ref, BlockTag::Other);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) CHECK(y(i, j) == doctest::Approx(x(i, j)));
        CHECK(ledger.at(0, BlockTag::Other) == 45);  // 2*27 - 9
    }

    SUBCASE("hand-multiplied 2x2 times 2x1") {
        Matrix a(2, 2, {1, 2, 3, 4});
        Matrix b(2, 1, {5, 6});
        Matrix c = matmul(a, b, ref, BlockTag::Ffnn);
        CHECK(c(0, 0) == doctest::Approx(17.0f));
        CHECK(c(1, 0) == doctest::Approx(39.0f));
        CHECK(ledger.at(0, BlockTag::Ffnn) == 6);  // 2*2*2*1 - 2*1
    }

    SUBCASE("dimension mismatch names both shapes") {
        Matrix a(2, 3);
        Matrix b(4, 2);
        CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), std::invalid_argument);
    }
}

TEST_CASE("matmul is associative within tolerance") {
    std::mt19937 rng(99);
    std::uniform_int_distribution<int> dim(1, 6);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = dim(rng), n = dim(rng), l = dim(rng), p = dim(rng);
        Matrix a = seeded_random_matrix(m, n, 100 + trial, 1.0f);
        Matrix b = seeded_random_matrix(n, l, 200 + trial, 1.0f);
        Matrix c = seeded_random_matrix(l, p, 300 + trial, 1.0f);
        Matrix left = matmul(matmul(a, b), c);
        Matrix right = matmul(a, matmul(b, c));
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < p; ++j)
                CHECK(left(i, j) ==
                      doctest::Approx(right(i, j)).epsilon(1e-4).scale(std::fabs(right(i, j)) + 1.0f));
    }
}

TEST_CASE("ledger sums matmul charges exactly") {
    FlopLedger ledger;
    const LedgerRef ref{&ledger, 3};
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> dim(1, 12);
    std::uint64_t expected = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const std::uint64_t m = dim(rng), n = dim(rng), l = dim(rng);
        matmul(seeded_random_matrix(static_cast<int>(m), static_cast<int>(n), trial, 1.0f),
               seeded_random_matrix(static_cast<int>(n), static_cast<int>(l), trial + 1, 1.0f),
               ref, BlockTag::Mha);
        expected += 2 * m * n * l - m * l;
    }
    CHECK(ledger.at(3, BlockTag::Mha) == expected);
    CHECK(ledger.total() == expected);
}

TEST_CASE("softmax_masked") {
    FlopLedger ledger;
    const LedgerRef ref{&ledger, 0};

    SUBCASE("uniform scores give uniform probabilities") {
        Matrix s(1, 3, {0, 0, 0});
        Matrix p = softmax_masked(s, {1, 1, 1}, ref, BlockTag::Mha);
        for (int j = 0; j < 3; ++j) CHECK(p(0, j) == doctest::Approx(1.0f / 3.0f));
        CHECK(ledger.at(0, BlockTag::Mha) == 6);  // 2 per element
    }

    SUBCASE("large score saturates without overflow") {
        Matrix s(1, 2, {1000.0f, 0.0f});
        Matrix p = softmax_masked(s, {1, 1});
        CHECK(p(0, 0) == doctest::Approx(1.0f).epsilon(1e-6));
        CHECK(p(0, 1) == doctest::Approx(0.0f).epsilon(1e-6));
    }

    SUBCASE("ln 2 gives 2/3 vs 1/3") {
        Matrix s(1, 2, {std::log(2.0f), 0.0f});
        Matrix p = softmax_masked(s, {1, 1});
        CHECK(p(0, 0) == doctest::Approx(2.0f / 3.0f));
        CHECK(p(0, 1) == doctest::Approx(1.0f / 3.0f));
    }

    SUBCASE("masked keys get exactly zero, rows renormalize") {
        Matrix s = seeded_random_matrix(4, 5, 11, 2.0f);
        Matrix p = softmax_masked(s, {1, 0, 1, 1, 0});
        for (int i = 0; i < 4; ++i) {
            CHECK(p(i, 1) == 0.0f);
            CHECK(p(i, 4) == 0.0f);
            float sum = 0.0f;
            for (int j = 0; j < 5; ++j) sum += p(i, j);
            CHECK(sum == doctest::Approx(1.0f).epsilon(1e-6));
        }
    }

    SUBCASE("all keys masked yields all-zero rows") {
        Matrix s(2, 2, {5, 5, 5, 5});
        Matrix p = softmax_masked(s, {0, 0});
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) CHECK(p(i, j) == 0.0f);
    }

    SUBCASE("mask length must match columns") {
        Matrix s(1, 3);
        CHECK_THROWS_AS(softmax_masked(s, {1, 1}), std::invalid_argument);
    }
}

TEST_CASE("layer_norm") {
    SUBCASE("constant row maps to bias") {
        Matrix x(1, 3, {1, 1, 1});
        Matrix y = layer_norm(x, {1, 1, 1}, {0, 0, 0}, 1e-5f);
        for (int j = 0; j < 3; ++j) CHECK(y(0, j) == doctest::Approx(0.0f));
    }

    SUBCASE("two-point row normalizes to -1, 1") {
        Matrix x(1, 2, {1, 3});
        Matrix y = layer_norm(x, {1, 1}, {0, 0}, 1e-9f);
        CHECK(y(0, 0) == doctest::Approx(-1.0f).epsilon(1e-5));
        CHECK(y(0, 1) == doctest::Approx(1.0f).epsilon(1e-5));
    }

    SUBCASE("bias passthrough on zero rows") {
        Matrix x(1, 2, {0, 0});
        Matrix y = layer_norm(x, {1, 1}, {5, 5}, 1e-5f);
        CHECK(y(0, 0) == doctest::Approx(5.0f));
        CHECK(y(0, 1) == doctest::Approx(5.0f));
    }

    SUBCASE("invariant to adding a constant per row") {
        Matrix x = seeded_random_matrix(3, 8, 21, 2.0f);
        Matrix shifted = x;
        for (int j = 0; j < 8; ++j) {
            shifted(0, j) += 5.0f;
            shifted(1, j) -= 3.0f;
            shifted(2, j) += 0.25f;
        }
        std::vector<float> gain(8, 1.3f), bias(8, -0.2f);
        Matrix a = layer_norm(x, gain, bias, 1e-7f);
        Matrix b = layer_norm(shifted, gain, bias, 1e-7f);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 8; ++j) CHECK(a(i, j) == doctest::Approx(b(i, j)).epsilon(1e-5));
    }

    SUBCASE("rows come out standardized before the affine map") {
        Matrix x = seeded_random_matrix(4, 16, 33, 3.0f);
        std::vector<float> unit(16, 1.0f), zero(16, 0.0f);
        Matrix y = layer_norm(x, unit, zero, 1e-9f);
        for (int i = 0; i < 4; ++i) {
            float mean = 0.0f, var = 0.0f;
            for (int j = 0; j < 16; ++j) mean += y(i, j);
            mean /= 16.0f;
            for (int j = 0; j < 16; ++j) var += (y(i, j) - mean) * (y(i, j) - mean);
            var /= 16.0f;
            CHECK(mean == doctest::Approx(0.0f).epsilon(1e-5));
            CHECK(var == doctest::Approx(1.0f).epsilon(1e-4));
        }
    }
}

TEST_CASE("gelu") {
    FlopLedger ledger;
    Matrix x(1, 3, {0.0f, 10.0f, -10.0f});
    Matrix y = gelu(x, {&ledger, 2}, BlockTag::Ffnn);
    CHECK(y(0, 0) == 0.0f);
    CHECK(y(0, 1) == doctest::Approx(10.0f).epsilon(1e-4));
    CHECK(y(0, 2) == doctest::Approx(0.0f).epsilon(1e-4));
    CHECK(ledger.at(2, BlockTag::Ffnn) == 3);  // one op per element
}

TEST_CASE("masked_mean_std") {
    SUBCASE("NaNs excluded, population SD") {
        const auto stats = masked_mean_std({kNaN, 0.2f, 0.5f, 0.8f, kNaN});
        REQUIRE(stats.has_value());
        CHECK(stats->mean == doctest::Approx(0.5f));
        CHECK(stats->stddev == doctest::Approx(std::sqrt(0.06f)).epsilon(1e-5));
        CHECK(stats->count == 3);
    }

    SUBCASE("single valid value has zero SD") {
        const auto stats = masked_mean_std({kNaN, 0.7f, kNaN});
        REQUIRE(stats.has_value());
        CHECK(stats->mean == doctest::Approx(0.7f));
        CHECK(stats->stddev == 0.0f);
        CHECK(stats->count == 1);
    }

    SUBCASE("all NaN signals no valid scores") {
        CHECK_FALSE(masked_mean_std({kNaN, kNaN}).has_value());
    }
}

TEST_CASE("seeded_random_matrix") {
    SUBCASE("same seed and shape reproduce bit-identical values") {
        Matrix a = seeded_random_matrix(7, 5, 1234, 0.5f);
        Matrix b = seeded_random_matrix(7, 5, 1234, 0.5f);
        CHECK(a.data() == b.data());
    }

    SUBCASE("different seeds differ") {
        Matrix a = seeded_random_matrix(7, 5, 1, 0.5f);
        Matrix b = seeded_random_matrix(7, 5, 2, 0.5f);
        CHECK(a.data() != b.data());
    }

    SUBCASE("values stay inside the scale bound") {
        Matrix m = seeded_random_matrix(1000, 1000, 77, 0.02f);
        float max_abs = 0.0f;
        for (float v : m.data()) max_abs = std::max(max_abs, std::fabs(v));
        CHECK(max_abs <= 0.02f);
        CHECK(max_abs > 0.015f);  // the bound is actually approached
    }

    SUBCASE("non-positive scale rejected") {
        CHECK_THROWS_AS(seeded_random_matrix(2, 2, 0, 0.0f), std::invalid_argument);
    }
}

TEST_CASE("memory meter tracks matrix payloads") {
    MemoryMeter meter;
    {
        MemoryMeter::Scope scope(meter);
        Matrix a(10, 10);
        CHECK(meter.current_bytes() == 400);
        {
            Matrix b(20, 10);
            CHECK(meter.current_bytes() == 400 + 800);
            CHECK(meter.peak_bytes() == 1200);
        }
        CHECK(meter.current_bytes() == 400);
        CHECK(meter.peak_bytes() == 1200);
        Matrix moved = std::move(a);  // ownership moves, no double count
        CHECK(meter.current_bytes() == 400);
    }
    CHECK(meter.current_bytes() == 0);
    CHECK(meter.peak_bytes() == 1200);
    Matrix outside(50, 50);  // no active meter, not tracked
    CHECK(meter.peak_bytes() == 1200);
}
