#include "alpine/flop_ledger.hpp"

namespace alpine {

const char* to_string(BlockTag tag) {
    switch (tag) {
        case BlockTag::Mha: return "mha";
        case BlockTag::Ffnn: return "ffnn";
        case BlockTag::Other: return "other";
    }
    return "other";
}

}  // namespace alpine
