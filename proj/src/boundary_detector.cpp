#include "mkd/boundary_detector.hpp"

namespace mkd {

bool BoundaryDetector::observe(std::span<const int> labels) {
    bool novel = false;
    for (int c : labels) novel = seen_.insert(c).second || novel;
    // The counter measures the distance in iterations from the last change to this batch.
    ++since_change_;
    const bool changed = novel && since_change_ >= min_gap_;
    if (changed) since_change_ = 0;
    return changed;
}

}  // namespace mkd
