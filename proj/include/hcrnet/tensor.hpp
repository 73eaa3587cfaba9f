#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "hcrnet/error.hpp"

namespace hcr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of rank 1 to 4.
///
/// `Tensor` (32-bit) is the training path. `Tensor64` exists so layer
/// gradients can be checked against finite differences in double precision.
/// A default-constructed tensor is empty (rank 0, no data) and only serves as
/// a placeholder; every public operation rejects it.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T{0});
    BasicTensor(Shape shape, std::vector<T> data);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // Same data, new shape. Element counts must agree.
    BasicTensor reshaped(Shape shape) const&;
    BasicTensor reshaped(Shape shape) &&;

    template <typename U>
    BasicTensor<U> cast() const {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    bool all_finite() const noexcept;

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) = default;

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Bitwise comparison; distinguishes -0.0 from 0.0 and compares NaN payloads.
template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b);

namespace fill {
struct Zeros {};
struct Constant {
    double value;
};
struct Uniform {
    double lo;
    double hi;
    std::uint64_t seed;
};
// limit = sqrt(6 / (fan_in + fan_out)). Rank-4 shapes are read as
// [kh, kw, in, out], rank-2 as [in, out].
struct GlorotUniform {
    std::uint64_t seed;
};
}  // namespace fill

using FillRule = std::variant<fill::Zeros, fill::Constant, fill::Uniform, fill::GlorotUniform>;

template <typename T>
BasicTensor<T> create(const Shape& shape, const FillRule& rule);

// Plain float factory for the common case.
inline Tensor create(const Shape& shape, const FillRule& rule) { return create<float>(shape, rule); }

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

/// Row-major GEMM on raw storage: C (m x n) = op(A) * op(B) [+ C].
/// op(A) is m x k; A is stored k x m when `trans_a`. Same for B.
template <typename T>
void gemm(const T* a, bool trans_a, const T* b, bool trans_b, T* c, std::size_t m, std::size_t k,
          std::size_t n, bool accumulate);

enum class ElementOp { add, sub, mul, div, max };

template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a, T scalar);

// Throws NumericError naming `context` if any element is NaN or infinite.
template <typename T>
void require_finite(const BasicTensor<T>& t, const char* context);

}  // namespace hcr
