#include "lvfuse/tensor.hpp"

#include <string>

#include "lvfuse/error.hpp"

namespace lvfuse {

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, float fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Tensor2D::Tensor2D(std::initializer_list<std::initializer_list<float>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) throw ShapeError("ragged tensor initializer");
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Tensor2D Tensor2D::identity(std::size_t n) {
    Tensor2D t(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0f;
    return t;
}

Tensor2D Tensor2D::leading_columns(std::size_t n) const {
    if (n > cols_) throw ShapeError("cannot keep " + std::to_string(n) + " of " + std::to_string(cols_) + " columns");
    Tensor2D out(rows_, n);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < n; ++c) out(r, c) = (*this)(r, c);
    }
    return out;
}

}  // namespace lvfuse
