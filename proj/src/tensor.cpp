#include "mkd/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace mkd {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<std::size_t> shape, Scalar fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<Scalar> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_numel(shape_))
        throw std::invalid_argument("tensor data size " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_string());
}

std::size_t Tensor::row_size() const noexcept {
    if (shape_.empty()) return 0;
    std::size_t n = 1;
    for (std::size_t i = 1; i < shape_.size(); ++i) n *= shape_[i];
    return n;
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    return Tensor(std::move(shape), data_);
}

Tensor Tensor::slice_rows(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows()) throw std::out_of_range("slice_rows out of range");
    auto shape = shape_;
    shape[0] = end - begin;
    const auto rs = row_size();
    return Tensor(std::move(shape),
                  std::vector<Scalar>(data_.begin() + static_cast<std::ptrdiff_t>(begin * rs),
                                      data_.begin() + static_cast<std::ptrdiff_t>(end * rs)));
}

Tensor Tensor::gather_rows(std::span<const std::size_t> idx) const {
    auto shape = shape_;
    if (shape.empty()) throw std::invalid_argument("gather_rows on rank-0 tensor");
    shape[0] = idx.size();
    Tensor out(std::move(shape));
    const auto rs = row_size();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= rows()) throw std::out_of_range("gather_rows index out of range");
        std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * rs), rs,
                    out.data_.begin() + static_cast<std::ptrdiff_t>(i * rs));
    }
    return out;
}

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? ", " : "") << shape_[i];
    os << ']';
    return os.str();
}

Tensor concat_rows(std::span<const Tensor* const> parts) {
    const Tensor* proto = nullptr;
    std::size_t total = 0;
    for (const auto* p : parts) {
        if (p->empty()) continue;
        if (proto && p->row_size() != proto->row_size())
            throw std::invalid_argument("concat_rows: row size mismatch " + p->shape_string() + " vs " +
                                        proto->shape_string());
        if (!proto) proto = p;
        total += p->rows();
    }
    if (!proto) {
        for (const auto* p : parts)
            if (p->rank() > 0) return *p;
        return {};
    }
    auto shape = proto->shape();
    shape[0] = total;
    std::vector<Scalar> data;
    data.reserve(shape_numel(shape));
    for (const auto* p : parts) data.insert(data.end(), p->storage().begin(), p->storage().end());
    return Tensor(std::move(shape), std::move(data));
}

Tensor concat_rows(const Tensor& a, const Tensor& b) {
    const Tensor* parts[] = {&a, &b};
    return concat_rows(parts);
}

}  // namespace mkd
