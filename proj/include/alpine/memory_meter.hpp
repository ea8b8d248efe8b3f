#pragma once

#include <algorithm>
#include <cstddef>

namespace alpine {

// Tracks bytes held by live Matrix payloads while a meter is installed.
// Peak never decreases within a run; meters from parallel workers are
// combined by taking the max of their peaks.
class MemoryMeter {
public:
    void alloc(std::size_t bytes) {
        current_ += bytes;
        peak_ = std::max(peak_, current_);
    }

    void release(std::size_t bytes) {
        current_ = bytes > current_ ? 0 : current_ - bytes;
    }

    std::size_t current_bytes() const { return current_; }
    std::size_t peak_bytes() const { return peak_; }

    static MemoryMeter* active();

    // Installs a meter for the current thread for the lifetime of the scope.
    class Scope {
    public:
        explicit Scope(MemoryMeter& meter);
        ~Scope();
        Scope(const Scope&) = delete;
        Scope& operator=(const Scope&) = delete;

    private:
        MemoryMeter* previous_;
    };

private:
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
};

}  // namespace alpine
