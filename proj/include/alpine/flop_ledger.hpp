#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

namespace alpine {

// Block labels for FLOP accounting. Mha and Ffnn follow the analytical
// cost model; Other collects bias adds, residuals and normalization,
// which the analytical model deliberately omits.
enum class BlockTag { Mha, Ffnn, Other };

const char* to_string(BlockTag tag);

// Per-layer, per-block floating-point operation counter. Counts only
// grow; ledgers from parallel workers are combined with merge().
class FlopLedger {
public:
    using Key = std::pair<int, BlockTag>;

    void add(int layer, BlockTag tag, std::uint64_t flops) {
        if (flops == 0) return;
        entries_[{layer, tag}] += flops;
    }

    std::uint64_t at(int layer, BlockTag tag) const {
        auto it = entries_.find({layer, tag});
        return it == entries_.end() ? 0 : it->second;
    }

    std::uint64_t block_total(BlockTag tag) const {
        std::uint64_t sum = 0;
        for (const auto& [key, count] : entries_)
            if (key.second == tag) sum += count;
        return sum;
    }

    std::uint64_t total() const {
        std::uint64_t sum = 0;
        for (const auto& [key, count] : entries_) sum += count;
        return sum;
    }

    void merge(const FlopLedger& other) {
        for (const auto& [key, count] : other.entries_) entries_[key] += count;
    }

    const std::map<Key, std::uint64_t>& entries() const { return entries_; }

private:
    std::map<Key, std::uint64_t> entries_;
};

// Nullable (ledger, layer) handle threaded through the numeric kernels.
// A default-constructed ref makes every charge a no-op.
struct LedgerRef {
    FlopLedger* ledger = nullptr;
    int layer = 0;

    void add(BlockTag tag, std::uint64_t flops) const {
        if (ledger != nullptr) ledger->add(layer, tag, flops);
    }
};

}  // namespace alpine
