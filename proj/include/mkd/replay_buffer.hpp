#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "mkd/rng.hpp"
#include "mkd/tensor.hpp"

namespace mkd {

/// Handle to a resident item. Handles are never reused, so a handle to an
/// evicted item is detectably stale.
using ItemId = std::uint64_t;

/// Rows drawn from memory.
struct MemoryBatch {
    Tensor images;
    std::vector<int> labels;
    std::vector<ItemId> ids;
    Tensor logits;  ///< [B, n_classes] when every drawn item has stored logits, else empty

    std::size_t size() const noexcept { return labels.size(); }
};

/// Fixed-capacity episodic memory filled by per-sample reservoir sampling.
class ReplayBuffer {
public:
    /// sample_shape is the per-image shape, e.g. {C, H, W}.
    ReplayBuffer(std::size_t capacity, std::vector<std::size_t> sample_shape, std::size_t n_classes);

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t size() const noexcept { return labels_.size(); }
    std::uint64_t n_seen() const noexcept { return n_seen_; }
    std::size_t n_classes() const noexcept { return n_classes_; }
    const std::vector<std::size_t>& sample_shape() const noexcept { return sample_shape_; }

    /// Offers every row of the batch in order. While the buffer is filling a
    /// row is stored directly; afterwards the i-th offer (1-based) replaces a
    /// uniformly chosen slot with probability M / i. logits, when given, must
    /// have one [n_classes] row per image and are stored with the inserted rows.
    void reservoir_update(const Tensor& images, std::span<const int> labels, Rng& rng,
                          const Tensor* logits = nullptr);

    /// min(k, size()) distinct items, uniformly without replacement.
    MemoryBatch random_retrieve(std::size_t k, Rng& rng) const;
    /// Every resident item, in slot order.
    MemoryBatch all() const;

    bool contains(ItemId id) const;
    /// Throws std::out_of_range for a stale handle and std::invalid_argument
    /// for a row of the wrong length.
    void update_stored_logits(std::span<const ItemId> ids, const Tensor& logits);
    std::optional<std::vector<Scalar>> stored_logits(ItemId id) const;

    std::span<const int> labels() const noexcept { return labels_; }
    /// Stored image of slot i.
    std::span<const Scalar> image(std::size_t slot) const;

    /// Writes images.f64 (raw doubles, slot order) and items.tsv
    /// (slot, id, label, logits...) into dir.
    void dump(const std::filesystem::path& dir) const;

private:
    std::size_t slot_of(ItemId id) const;
    void store(std::size_t slot, std::span<const Scalar> image, int label, const Scalar* logits);
    MemoryBatch gather(std::span<const std::size_t> slots) const;

    std::size_t capacity_;
    std::vector<std::size_t> sample_shape_;
    std::size_t sample_size_;
    std::size_t n_classes_;
    std::uint64_t n_seen_ = 0;
    ItemId next_id_ = 0;
    std::vector<Scalar> images_;
    std::vector<int> labels_;
    std::vector<ItemId> ids_;
    std::vector<Scalar> logits_;
    std::vector<char> has_logits_;
};

}  // namespace mkd
