#include "hcrnet/tensor.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstring>
#include <sstream>

#include "hcrnet/random.hpp"

namespace hcr {

namespace {

void validate_shape(const Shape& shape) {
    if (shape.empty() || shape.size() > 4) {
        throw ShapeError("tensor rank must be 1-4, got " + std::to_string(shape.size()));
    }
    for (auto d : shape) {
        if (d == 0) {
            throw ShapeError("invalid shape " + shape_str(shape) + ": dimensions must be >= 1");
        }
    }
}

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
}

template <typename T>
T apply(ElementOp op, T x, T y) {
    switch (op) {
        case ElementOp::add:
            return x + y;
        case ElementOp::sub:
            return x - y;
        case ElementOp::mul:
            return x * y;
        case ElementOp::div:
            if (y == T{0}) {
                throw NumericError("elementwise div: division by zero");
            }
            return x / y;
        case ElementOp::max:
            return x > y ? x : y;
    }
    return x;
}

std::pair<double, double> glorot_fans(const Shape& shape) {
    switch (shape.size()) {
        case 4: {
            const double receptive = static_cast<double>(shape[0] * shape[1]);
            return {receptive * static_cast<double>(shape[2]), receptive * static_cast<double>(shape[3])};
        }
        case 3: {
            const double receptive = static_cast<double>(shape[0]);
            return {receptive * static_cast<double>(shape[1]), receptive * static_cast<double>(shape[2])};
        }
        case 2:
            return {static_cast<double>(shape[0]), static_cast<double>(shape[1])};
        default:
            return {static_cast<double>(shape[0]), static_cast<double>(shape[0])};
    }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : shape_(std::move(shape)) {
    validate_shape(shape_);
    data_.assign(shape_numel(shape_), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape(shape_);
    if (data_.size() != shape_numel(shape_)) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
    }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) const& {
    return BasicTensor(std::move(shape), data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(Shape shape) && {
    return BasicTensor(std::move(shape), std::move(data_));
}

template <typename T>
bool BasicTensor<T>::all_finite() const noexcept {
    for (T v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

template <typename T>
bool bit_identical(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    return a.shape() == b.shape() && std::memcmp(a.raw(), b.raw(), a.size() * sizeof(T)) == 0;
}

template <typename T>
BasicTensor<T> create(const Shape& shape, const FillRule& rule) {
    BasicTensor<T> t(shape);
    auto data = t.data();
    std::visit(
        [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, fill::Constant>) {
                std::fill(data.begin(), data.end(), static_cast<T>(r.value));
            } else if constexpr (std::is_same_v<R, fill::Uniform>) {
                Rng rng(r.seed);
                for (auto& v : data) v = static_cast<T>(rng.uniform(r.lo, r.hi));
            } else if constexpr (std::is_same_v<R, fill::GlorotUniform>) {
                const auto [fan_in, fan_out] = glorot_fans(shape);
                const double limit = std::sqrt(6.0 / (fan_in + fan_out));
                Rng rng(r.seed);
                for (auto& v : data) v = static_cast<T>(rng.uniform(-limit, limit));
            }
        },
        rule);
    return t;
}

template <typename T>
void gemm(const T* a, bool trans_a, const T* b, bool trans_b, T* c, std::size_t m, std::size_t k, std::size_t n,
          bool accumulate) {
    using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    using CMap = Eigen::Map<const Mat>;
    const auto M = static_cast<Eigen::Index>(m);
    const auto K = static_cast<Eigen::Index>(k);
    const auto N = static_cast<Eigen::Index>(n);
    Eigen::Map<Mat> cm(c, M, N);
    const CMap am = trans_a ? CMap(a, K, M) : CMap(a, M, K);
    const CMap bm = trans_b ? CMap(b, N, K) : CMap(b, K, N);
    auto run = [&](const auto& lhs, const auto& rhs) {
        if (accumulate) {
            cm.noalias() += lhs * rhs;
        } else {
            cm.noalias() = lhs * rhs;
        }
    };
    if (trans_a && trans_b) {
        run(am.transpose(), bm.transpose());
    } else if (trans_a) {
        run(am.transpose(), bm);
    } else if (trans_b) {
        run(am, bm.transpose());
    } else {
        run(am, bm);
    }
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("matmul expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    if (a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    }
    BasicTensor<T> out({a.dim(0), b.dim(1)});
    gemm(a.raw(), false, b.raw(), false, out.raw(), a.dim(0), a.dim(1), b.dim(1), false);
    require_finite(out, "matmul");
    return out;
}

template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a, const BasicTensor<T>& b) {
    require_same_shape(a, b, "elementwise");
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
    require_finite(out, "elementwise");
    return out;
}

template <typename T>
BasicTensor<T> elementwise(ElementOp op, const BasicTensor<T>& a, T scalar) {
    if (a.empty()) throw ShapeError("elementwise: empty tensor");
    BasicTensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], scalar);
    require_finite(out, "elementwise");
    return out;
}

template <typename T>
void require_finite(const BasicTensor<T>& t, const char* context) {
    if (!t.all_finite()) {
        throw NumericError(std::string(context) + ": non-finite value");
    }
}

#define HCR_INSTANTIATE(T)                                                                                     \
    template class BasicTensor<T>;                                                                             \
    template bool bit_identical(const BasicTensor<T>&, const BasicTensor<T>&);                                 \
    template BasicTensor<T> create<T>(const Shape&, const FillRule&);                                          \
    template void gemm<T>(const T*, bool, const T*, bool, T*, std::size_t, std::size_t, std::size_t, bool);    \
    template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&);                              \
    template BasicTensor<T> elementwise(ElementOp, const BasicTensor<T>&, const BasicTensor<T>&);               \
    template BasicTensor<T> elementwise(ElementOp, const BasicTensor<T>&, T);                                  \
    template void require_finite(const BasicTensor<T>&, const char*);

HCR_INSTANTIATE(float)
HCR_INSTANTIATE(double)

#undef HCR_INSTANTIATE

}  // namespace hcr
