#pragma once

#include <cstdint>
#include <vector>

namespace alpine {

// Reserved vocabulary slots. Content token ids should start at sep + 1;
// protection is positional, so collisions are harmless but discouraged.
struct SpecialTokens {
    int pad = 0;
    int cls = 1;
    int sep = 2;
};

// Encoded input: token ids, the attention mask (0 marks PAD) and the
// positions of CLS/SEP, which survive every pruning step.
struct TokenSequence {
    std::vector<int> ids;
    std::vector<std::uint8_t> mask;
    std::vector<int> protected_positions;

    int kept_length() const {
        int n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

}  // namespace alpine
