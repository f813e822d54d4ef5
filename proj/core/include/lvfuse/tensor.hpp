#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace lvfuse {

// Dense row-major float matrix. Vectors are carried as 1 x n tensors when
// they need to live alongside matrices (norm gains in a weight file).
class Tensor2D {
public:
    Tensor2D() = default;
    Tensor2D(std::size_t rows, std::size_t cols, float fill = 0.0f);
    Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data);
    Tensor2D(std::initializer_list<std::initializer_list<float>> rows);

    static Tensor2D identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    // Keeps the first `n` columns of every row.
    Tensor2D leading_columns(std::size_t n) const;

    bool operator==(const Tensor2D&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

}  // namespace lvfuse
