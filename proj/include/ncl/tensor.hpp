#ifndef NCL_TENSOR_HPP
#define NCL_TENSOR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "ncl/error.hpp"

namespace ncl {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

/// Dense row-major array of doubles. Images are stored H x W x Ch.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0) : shape_(std::move(shape)) {
        check_shape();
        data_.assign(shape_size(shape_), fill);
    }
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        check_shape();
        if (shape_size(shape_) != data_.size())
            throw InvalidInput("tensor data length " + std::to_string(data_.size()) +
                               " does not match shape " + shape_string(shape_));
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& values() noexcept { return data_; }
    const std::vector<double>& values() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    /// Shape of one entry along the leading axis.
    Shape row_shape() const { return Shape(shape_.begin() + 1, shape_.end()); }
    std::size_t row_size() const { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

    std::span<const double> row(std::size_t i) const {
        const std::size_t n = row_size();
        return std::span<const double>(data_).subspan(i * n, n);
    }
    std::span<double> row(std::size_t i) {
        const std::size_t n = row_size();
        return std::span<double>(data_).subspan(i * n, n);
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    void check_shape() const {
        for (std::size_t e : shape_)
            if (e == 0) throw InvalidInput("tensor extents must be positive: " + shape_string(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

}  // namespace ncl

#endif  // NCL_TENSOR_HPP
