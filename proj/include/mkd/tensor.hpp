#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mkd {

using Scalar = double;

/// Dense row-major tensor. The first dimension is always the batch/row axis.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, Scalar fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<Scalar> data);

    static Tensor zeros(std::initializer_list<std::size_t> shape) { return Tensor(std::vector<std::size_t>(shape)); }

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    /// Leading dimension (0 for a rank-0 tensor).
    std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
    /// Number of elements per row.
    std::size_t row_size() const noexcept;

    Scalar* data() noexcept { return data_.data(); }
    const Scalar* data() const noexcept { return data_.data(); }
    std::span<Scalar> span() noexcept { return data_; }
    std::span<const Scalar> span() const noexcept { return data_; }
    std::span<Scalar> row(std::size_t r) { return {data_.data() + r * row_size(), row_size()}; }
    std::span<const Scalar> row(std::size_t r) const { return {data_.data() + r * row_size(), row_size()}; }

    Scalar& operator[](std::size_t i) noexcept { return data_[i]; }
    Scalar operator[](std::size_t i) const noexcept { return data_[i]; }
    Scalar& at(std::size_t r, std::size_t c) { return data_[r * row_size() + c]; }
    Scalar at(std::size_t r, std::size_t c) const { return data_[r * row_size() + c]; }

    std::vector<Scalar>& storage() noexcept { return data_; }
    const std::vector<Scalar>& storage() const noexcept { return data_; }

    /// Same data, new shape with identical element count.
    Tensor reshaped(std::vector<std::size_t> shape) const;
    /// Rows [begin, end) as a new tensor.
    Tensor slice_rows(std::size_t begin, std::size_t end) const;
    /// Rows picked by index, in the given order.
    Tensor gather_rows(std::span<const std::size_t> idx) const;

    std::string shape_string() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<Scalar> data_;
};

/// Stack row-compatible tensors along the first axis. Empty tensors are skipped.
Tensor concat_rows(std::span<const Tensor* const> parts);
Tensor concat_rows(const Tensor& a, const Tensor& b);

std::size_t shape_numel(const std::vector<std::size_t>& shape);

}  // namespace mkd
