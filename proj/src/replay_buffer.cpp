#include "mkd/replay_buffer.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

namespace mkd {

ReplayBuffer::ReplayBuffer(std::size_t capacity, std::vector<std::size_t> sample_shape, std::size_t n_classes)
    : capacity_(capacity),
      sample_shape_(std::move(sample_shape)),
      sample_size_(shape_numel(sample_shape_)),
      n_classes_(n_classes) {
    if (capacity_ == 0) throw std::invalid_argument("buffer capacity must be positive");
    images_.reserve(capacity_ * sample_size_);
}

void ReplayBuffer::store(std::size_t slot, std::span<const Scalar> image, int label, const Scalar* logits) {
    if (slot == labels_.size()) {
        images_.insert(images_.end(), image.begin(), image.end());
        labels_.push_back(label);
        ids_.push_back(next_id_++);
        logits_.resize(logits_.size() + n_classes_, 0.0);
        has_logits_.push_back(0);
    } else {
        std::copy(image.begin(), image.end(), images_.begin() + static_cast<std::ptrdiff_t>(slot * sample_size_));
        labels_[slot] = label;
        ids_[slot] = next_id_++;
    }
    has_logits_[slot] = logits != nullptr;
    auto dst = logits_.begin() + static_cast<std::ptrdiff_t>(slot * n_classes_);
    if (logits)
        std::copy(logits, logits + n_classes_, dst);
    else
        std::fill(dst, dst + static_cast<std::ptrdiff_t>(n_classes_), 0.0);
}

void ReplayBuffer::reservoir_update(const Tensor& images, std::span<const int> labels, Rng& rng,
                                    const Tensor* logits) {
    const std::size_t n = labels.size();
    if (images.rows() != n || (n > 0 && images.row_size() != sample_size_))
        throw std::invalid_argument("reservoir_update: images do not match labels or sample shape");
    if (logits && (logits->rows() != n || (n > 0 && logits->row_size() != n_classes_)))
        throw std::invalid_argument("reservoir_update: logits must have one row of n_classes per image");
    for (std::size_t i = 0; i < n; ++i) {
        const Scalar* lg = logits ? logits->row(i).data() : nullptr;
        ++n_seen_;
        if (labels_.size() < capacity_) {
            store(labels_.size(), images.row(i), labels[i], lg);
            continue;
        }
        const auto j = uniform_index(rng, n_seen_);
        if (j < capacity_) store(static_cast<std::size_t>(j), images.row(i), labels[i], lg);
    }
}

MemoryBatch ReplayBuffer::gather(std::span<const std::size_t> slots) const {
    MemoryBatch b;
    std::vector<std::size_t> shape{slots.size()};
    shape.insert(shape.end(), sample_shape_.begin(), sample_shape_.end());
    b.images = Tensor(shape);
    bool all_logits = !slots.empty();
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto s = slots[i];
        std::copy_n(images_.begin() + static_cast<std::ptrdiff_t>(s * sample_size_), sample_size_,
                    b.images.row(i).begin());
        b.labels.push_back(labels_[s]);
        b.ids.push_back(ids_[s]);
        all_logits = all_logits && has_logits_[s];
    }
    if (all_logits) {
        b.logits = Tensor({slots.size(), n_classes_});
        for (std::size_t i = 0; i < slots.size(); ++i)
            std::copy_n(logits_.begin() + static_cast<std::ptrdiff_t>(slots[i] * n_classes_), n_classes_,
                        b.logits.row(i).begin());
    }
    return b;
}

MemoryBatch ReplayBuffer::random_retrieve(std::size_t k, Rng& rng) const {
    const std::size_t n = std::min(k, size());
    // Partial Fisher-Yates over slot indices.
    std::vector<std::size_t> slots(size());
    std::iota(slots.begin(), slots.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_index(rng, slots.size() - i));
        std::swap(slots[i], slots[j]);
    }
    slots.resize(n);
    return gather(slots);
}

MemoryBatch ReplayBuffer::all() const {
    std::vector<std::size_t> slots(size());
    std::iota(slots.begin(), slots.end(), 0);
    return gather(slots);
}

std::size_t ReplayBuffer::slot_of(ItemId id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) throw std::out_of_range("item " + std::to_string(id) + " is no longer resident");
    return static_cast<std::size_t>(it - ids_.begin());
}

bool ReplayBuffer::contains(ItemId id) const { return std::find(ids_.begin(), ids_.end(), id) != ids_.end(); }

void ReplayBuffer::update_stored_logits(std::span<const ItemId> ids, const Tensor& logits) {
    if (logits.rows() != ids.size() || (!ids.empty() && logits.row_size() != n_classes_))
        throw std::invalid_argument("update_stored_logits: expected " + std::to_string(ids.size()) + " rows of " +
                                    std::to_string(n_classes_) + " logits, got " + logits.shape_string());
    std::vector<std::size_t> slots;
    for (auto id : ids) slots.push_back(slot_of(id));  // validate every handle before writing
    for (std::size_t i = 0; i < slots.size(); ++i) {
        std::copy(logits.row(i).begin(), logits.row(i).end(),
                  logits_.begin() + static_cast<std::ptrdiff_t>(slots[i] * n_classes_));
        has_logits_[slots[i]] = 1;
    }
}

std::optional<std::vector<Scalar>> ReplayBuffer::stored_logits(ItemId id) const {
    const auto s = slot_of(id);
    if (!has_logits_[s]) return std::nullopt;
    const auto b = logits_.begin() + static_cast<std::ptrdiff_t>(s * n_classes_);
    return std::vector<Scalar>(b, b + static_cast<std::ptrdiff_t>(n_classes_));
}

std::span<const Scalar> ReplayBuffer::image(std::size_t slot) const {
    if (slot >= size()) throw std::out_of_range("buffer slot out of range");
    return {images_.data() + slot * sample_size_, sample_size_};
}

void ReplayBuffer::dump(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream img(dir / "images.f64", std::ios::binary);
    img.write(reinterpret_cast<const char*>(images_.data()),
              static_cast<std::streamsize>(images_.size() * sizeof(Scalar)));
    std::ofstream tab(dir / "items.tsv");
    tab << "slot\tid\tlabel\tlogits\n";
    tab.precision(17);
    for (std::size_t s = 0; s < size(); ++s) {
        tab << s << '\t' << ids_[s] << '\t' << labels_[s] << '\t';
        if (has_logits_[s])
            for (std::size_t c = 0; c < n_classes_; ++c) tab << (c ? "," : "") << logits_[s * n_classes_ + c];
        tab << '\n';
    }
}

}  // namespace mkd
