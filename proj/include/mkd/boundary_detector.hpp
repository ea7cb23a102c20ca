#pragma once

#include <cstddef>
#include <set>
#include <span>

namespace mkd {

/// Task-change inference for streams without task identity. A change is
/// declared when a never-seen class appears and at least min_gap iterations
/// have passed since the previous change. The very first batch always counts
/// as a change (training start).
class BoundaryDetector {
public:
    explicit BoundaryDetector(std::size_t min_gap = 100) : min_gap_(min_gap), since_change_(min_gap) {}

    /// Processes one batch; returns whether a change is declared at it.
    bool observe(std::span<const int> labels);

    const std::set<int>& seen_classes() const noexcept { return seen_; }
    /// Iterations between the last declared change and the latest observed batch.
    std::size_t steps_since_change() const noexcept { return since_change_; }
    std::size_t min_gap() const noexcept { return min_gap_; }
    /// Overrides the counter, e.g. to set up a specific state in tests.
    void set_steps_since_change(std::size_t n) noexcept { since_change_ = n; }

private:
    std::size_t min_gap_;
    std::size_t since_change_;
    std::set<int> seen_;
};

}  // namespace mkd
