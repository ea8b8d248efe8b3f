#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <vector>

#include "alpine/flops_model.hpp"

using namespace alpine;

namespace {

const ModelDims kPaper = ModelDims::paper();  // d=768, h=12, d_ffnn=3072

}  // namespace

TEST_CASE("flops_mha at reference points") {
    SUBCASE("n = 512") {
        const MhaFlopBreakdown b = flops_mha(512, kPaper);
        CHECK(b.paper_total == 3'222'798'336);
        CHECK(b.linear_proj == 1'810'759'680);   // 6nd^2 - 3nd
        CHECK(b.scaled_dot_attn == 405'798'912); // 2n^2 d + hn^2
        CHECK(b.attn_times_v == 402'259'968);    // 2n^2 d - nd
        CHECK(b.final_proj == 603'586'560);      // 2nd^2 - nd
        CHECK(b.component_sum == 3'222'405'120);
        // stated total exceeds the component sum by exactly n*d
        CHECK(b.paper_total - b.component_sum == 512 * 768);
    }

    SUBCASE("n = 1") {
        const MhaFlopBreakdown b = flops_mha(1, kPaper);
        CHECK(b.paper_total == 4'718'604);  // 8*768^2 + 4*768 - 4*768 + 12
    }

    SUBCASE("n < 1 is rejected") {
        CHECK_THROWS_AS(flops_mha(0, kPaper), std::invalid_argument);
    }
}

TEST_CASE("flops_ffnn at reference points") {
    CHECK(flops_ffnn(512, kPaper) == 4'831'444'992);
    CHECK(flops_ffnn(1, kPaper) == 9'436'416);  // 16d^2 - d at d = 768
    CHECK(flops_ffnn(512, kPaper) > flops_mha(512, kPaper).paper_total);
    CHECK_THROWS_AS(flops_ffnn(0, kPaper), std::invalid_argument);

    SUBCASE("general form collapses to 16nd^2 - nd when d_ffnn = 4d") {
        for (std::int64_t n : {1, 7, 100, 512}) {
            const std::int64_t d = kPaper.d_mha;
            CHECK(flops_ffnn(n, kPaper) == 16 * n * d * d - n * d);
        }
    }
}

TEST_CASE("crossover_length") {
    CHECK(crossover_length(kPaper) == 1530);

    ModelDims tiny;
    tiny.d_mha = 1;
    tiny.heads = 1;
    CHECK(crossover_length(tiny) == 2);  // floor(11 / 5)

    SUBCASE("the feed-forward block dominates through the crossover") {
        CHECK(flops_difference(1530, kPaper) > 0);
        CHECK(flops_difference(1531, kPaper) < 0);
    }
}

TEST_CASE("flops_difference at reference points") {
    CHECK(flops_difference(0, kPaper) == 0);
    CHECK(flops_difference(1530, kPaper) == 3'635'280);
    CHECK(flops_difference(1531, kPaper) == -1'083'948);

    SUBCASE("matches the closed form n(8d^2+3d) - n^2(4d+h)") {
        const std::int64_t d = kPaper.d_mha;
        const std::int64_t h = kPaper.heads;
        for (std::int64_t n : {1, 50, 512, 1024, 1530, 1531, 2000})
            CHECK(flops_difference(n, kPaper) == n * (8 * d * d + 3 * d) - n * n * (4 * d + h));
    }
}

TEST_CASE("sign of the difference flips exactly at the crossover") {
    const std::int64_t cross = crossover_length(kPaper);
    for (std::int64_t n = 1; n <= 2000; ++n) {
        const bool positive = flops_difference(n, kPaper) > 0;
        CHECK(positive == (n <= cross));
    }
}

TEST_CASE("block costs are strictly increasing in n") {
    std::int64_t prev_mha = 0;
    std::int64_t prev_ffnn = 0;
    for (std::int64_t n = 1; n <= 600; ++n) {
        const std::int64_t mha = flops_mha(n, kPaper).paper_total;
        const std::int64_t ffnn = flops_ffnn(n, kPaper);
        CHECK(mha > prev_mha);
        CHECK(ffnn > prev_ffnn);
        prev_mha = mha;
        prev_ffnn = ffnn;
    }
}

TEST_CASE("flops_difference is concave in n") {
    for (std::int64_t n = 1; n <= 2000; ++n) {
        const std::int64_t second_difference = flops_difference(n + 1, kPaper) -
                                               2 * flops_difference(n, kPaper) +
                                               flops_difference(n - 1, kPaper);
        CHECK(second_difference < 0);
    }
}

TEST_CASE("model_total") {
    SUBCASE("twelve layers at n = 512 reproduce the reference total") {
        const std::vector<std::int64_t> trace(12, 512);
        CHECK(model_total(trace, kPaper) == 96'650'919'936);
    }

    SUBCASE("one layer at n = 512") {
        ModelDims one = kPaper;
        one.layers = 1;
        CHECK(model_total({512}, one) == 8'054'243'328);
    }

    SUBCASE("shrinking traces cost strictly less") {
        std::vector<std::int64_t> full(12, 512);
        std::vector<std::int64_t> halved;
        std::int64_t n = 512;
        for (int l = 0; l < 12; ++l) {
            halved.push_back(n);
            n = std::max<std::int64_t>(1, n / 2);
        }
        CHECK(model_total(halved, kPaper) < model_total(full, kPaper));
    }

    SUBCASE("trace length must match the layer count") {
        CHECK_THROWS_AS(model_total({512, 512}, kPaper), std::invalid_argument);
    }
}

TEST_CASE("model_total_split charges blocks at different lengths") {
    ModelDims dims = kPaper;
    dims.layers = 2;
    const std::vector<std::int64_t> entry{512, 400};
    const std::vector<std::int64_t> post{400, 300};
    const std::int64_t expected = flops_mha(512, dims).paper_total + flops_ffnn(400, dims) +
                                  flops_mha(400, dims).paper_total + flops_ffnn(300, dims);
    CHECK(model_total_split(entry, post, dims) == expected);
    CHECK(model_total_split(entry, entry, dims) == model_total(entry, dims));
    CHECK(model_total_split(entry, post, dims) < model_total(entry, dims));
}

TEST_CASE("ModelDims validation") {
    ModelDims bad = ModelDims::desk();
    bad.d_mha = 65;  // not divisible by 4 heads
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = ModelDims::desk();
    bad.d_ffnn = 32;  // below d_mha
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    CHECK_NOTHROW(ModelDims::desk().validate());
    CHECK_NOTHROW(ModelDims::paper().validate());
}
