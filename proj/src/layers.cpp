#include "hcrnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hcrnet/random.hpp"

namespace hcr {

namespace {

constexpr std::size_t kKernel = 3;
// Images lowered per im2col chunk; bounds the scratch buffer size.
constexpr std::size_t kConvChunk = 8;

template <typename T>
const BasicTensor<T>& need(const std::optional<BasicTensor<T>>& t, const char* layer, const char* field) {
    if (!t) throw ShapeError(std::string(layer) + ": missing " + field);
    return *t;
}

template <typename T>
void require_rank(const BasicTensor<T>& x, std::size_t rank, const char* what) {
    if (x.rank() != rank) {
        throw ShapeError(std::string(what) + ": expected rank " + std::to_string(rank) + " input, got " +
                         shape_str(x.shape()));
    }
}

void require_kind(LayerKind actual, LayerKind expected, const char* what) {
    if (actual != expected) {
        throw ShapeError(std::string(what) + ": cache/params belong to a " + std::string(to_string(actual)) +
                         " layer");
    }
}

// Lowers images [first, first+count) of an NHWC tensor into rows of
// 3*3*C patch values, ordered (kh, kw, c) to match the weight layout.
template <typename T>
void im2col(const T* x, std::size_t first, std::size_t count, std::size_t h, std::size_t w, std::size_t c,
            std::vector<T>& cols) {
    const std::size_t patch = kKernel * kKernel * c;
    cols.assign(count * h * w * patch, T{0});
    for (std::size_t n = 0; n < count; ++n) {
        const T* img = x + (first + n) * h * w * c;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                T* row = cols.data() + ((n * h + i) * w + j) * patch;
                for (std::size_t ki = 0; ki < kKernel; ++ki) {
                    const auto si = static_cast<std::ptrdiff_t>(i + ki) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kj = 0; kj < kKernel; ++kj) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + kj) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
                        const T* src = img + (static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)) * c;
                        std::copy(src, src + c, row + (ki * kKernel + kj) * c);
                    }
                }
            }
        }
    }
}

template <typename T>
void col2im_add(const std::vector<T>& cols, std::size_t first, std::size_t count, std::size_t h, std::size_t w,
                std::size_t c, T* dx) {
    const std::size_t patch = kKernel * kKernel * c;
    for (std::size_t n = 0; n < count; ++n) {
        T* img = dx + (first + n) * h * w * c;
        for (std::size_t i = 0; i < h; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                const T* row = cols.data() + ((n * h + i) * w + j) * patch;
                for (std::size_t ki = 0; ki < kKernel; ++ki) {
                    const auto si = static_cast<std::ptrdiff_t>(i + ki) - 1;
                    if (si < 0 || si >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kj = 0; kj < kKernel; ++kj) {
                        const auto sj = static_cast<std::ptrdiff_t>(j + kj) - 1;
                        if (sj < 0 || sj >= static_cast<std::ptrdiff_t>(w)) continue;
                        T* dst = img + (static_cast<std::size_t>(si) * w + static_cast<std::size_t>(sj)) * c;
                        const T* src = row + (ki * kKernel + kj) * c;
                        for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += src[ch];
                    }
                }
            }
        }
    }
}

template <typename T>
void sum_rows(const BasicTensor<T>& g, std::size_t width, BasicTensor<T>& out) {
    // Accumulate in double so the float path does not drift on large batches.
    std::vector<double> acc(width, 0.0);
    const std::size_t rows = g.size() / width;
    for (std::size_t r = 0; r < rows; ++r) {
        const T* row = g.raw() + r * width;
        for (std::size_t k = 0; k < width; ++k) acc[k] += row[k];
    }
    for (std::size_t k = 0; k < width; ++k) out[k] = static_cast<T>(acc[k]);
}

}  // namespace

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::conv2d:
            return "Conv2D";
        case LayerKind::maxpool2d:
            return "MaxPooling2D";
        case LayerKind::batchnorm:
            return "BatchNormalization";
        case LayerKind::flatten:
            return "Flatten";
        case LayerKind::dense:
            return "Dense";
        case LayerKind::dropout:
            return "Dropout";
        case LayerKind::relu:
            return "ReLU";
        case LayerKind::softmax:
            return "Softmax";
    }
    return "?";
}

template <typename T>
std::size_t BasicLayerParams<T>::gradient_param_count() const {
    std::size_t n = 0;
    for (const auto* t : {&weights, &bias, &gamma, &beta}) {
        if (*t) n += (*t)->size();
    }
    return n;
}

template <typename T>
std::size_t BasicLayerParams<T>::statistic_param_count() const {
    return (moving_mean ? moving_mean->size() : 0) + (moving_variance ? moving_variance->size() : 0);
}

template <typename T>
BasicLayerParams<T> make_conv2d(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed) {
    BasicLayerParams<T> p;
    p.kind = LayerKind::conv2d;
    p.weights = create<T>({kKernel, kKernel, in_channels, out_channels}, fill::GlorotUniform{seed});
    p.bias = BasicTensor<T>({out_channels});
    return p;
}

template <typename T>
BasicLayerParams<T> make_dense(std::size_t in_features, std::size_t units, std::uint64_t seed) {
    BasicLayerParams<T> p;
    p.kind = LayerKind::dense;
    p.weights = create<T>({in_features, units}, fill::GlorotUniform{seed});
    p.bias = BasicTensor<T>({units});
    return p;
}

template <typename T>
BasicLayerParams<T> make_batchnorm(std::size_t channels) {
    BasicLayerParams<T> p;
    p.kind = LayerKind::batchnorm;
    p.gamma = BasicTensor<T>({channels}, T{1});
    p.beta = BasicTensor<T>({channels});
    p.moving_mean = BasicTensor<T>({channels});
    p.moving_variance = BasicTensor<T>({channels}, T{1});
    return p;
}

template <typename T>
BasicLayerParams<T> make_dropout(double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
    BasicLayerParams<T> p;
    p.kind = LayerKind::dropout;
    p.dropout_rate = rate;
    return p;
}

template <typename T>
BasicLayerParams<T> make_stateless(LayerKind kind) {
    BasicLayerParams<T> p;
    p.kind = kind;
    return p;
}

// ---------------------------------------------------------------- conv2d

template <typename T>
ForwardResult<T> conv2d_forward(const BasicTensor<T>& x, const BasicLayerParams<T>& p) {
    require_kind(p.kind, LayerKind::conv2d, "conv2d_forward");
    require_rank(x, 4, "conv2d_forward");
    const auto& w = need(p.weights, "conv2d", "weights");
    const auto& b = need(p.bias, "conv2d", "bias");
    const std::size_t n = x.dim(0), h = x.dim(1), wd = x.dim(2), cin = x.dim(3);
    if (w.rank() != 4 || w.dim(0) != kKernel || w.dim(1) != kKernel) {
        throw ShapeError("conv2d: weights must be [3,3,Cin,Cout], got " + shape_str(w.shape()));
    }
    if (w.dim(2) != cin) {
        throw ShapeError("conv2d: input has " + std::to_string(cin) + " channels but weights expect " +
                         std::to_string(w.dim(2)));
    }
    const std::size_t cout = w.dim(3);
    if (b.size() != cout) throw ShapeError("conv2d: bias size mismatch");

    BasicTensor<T> out({n, h, wd, cout});
    const std::size_t patch = kKernel * kKernel * cin;
    std::vector<T> cols;
    for (std::size_t first = 0; first < n; first += kConvChunk) {
        const std::size_t count = std::min(kConvChunk, n - first);
        im2col(x.raw(), first, count, h, wd, cin, cols);
        const std::size_t rows = count * h * wd;
        T* dst = out.raw() + first * h * wd * cout;
        gemm(cols.data(), false, w.raw(), false, dst, rows, patch, cout, false);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t co = 0; co < cout; ++co) dst[r * cout + co] += b[co];
        }
    }
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::conv2d;
    cache.input = x;
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicLayerGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                   const BasicLayerParams<T>& p, bool want_input_grad) {
    require_kind(cache.kind, LayerKind::conv2d, "conv2d_backward");
    const auto& x = cache.input;
    const auto& w = need(p.weights, "conv2d", "weights");
    const std::size_t n = x.dim(0), h = x.dim(1), wd = x.dim(2), cin = x.dim(3), cout = w.dim(3);
    if (grad_out.shape() != Shape{n, h, wd, cout}) {
        throw ShapeError("conv2d_backward: grad shape " + shape_str(grad_out.shape()) +
                         " does not match forward output");
    }
    const std::size_t patch = kKernel * kKernel * cin;

    BasicLayerGrads<T> g;
    g.weights = BasicTensor<T>(w.shape());
    g.bias = BasicTensor<T>({cout});
    if (want_input_grad) g.input = BasicTensor<T>(x.shape());

    std::vector<T> cols;
    std::vector<T> grad_cols;
    for (std::size_t first = 0; first < n; first += kConvChunk) {
        const std::size_t count = std::min(kConvChunk, n - first);
        const std::size_t rows = count * h * wd;
        const T* go = grad_out.raw() + first * h * wd * cout;
        im2col(x.raw(), first, count, h, wd, cin, cols);
        gemm(cols.data(), true, go, false, g.weights->raw(), patch, rows, cout, first > 0);
        if (want_input_grad) {
            grad_cols.resize(rows * patch);
            gemm(go, false, w.raw(), true, grad_cols.data(), rows, cout, patch, false);
            col2im_add(grad_cols, first, count, h, wd, cin, g.input.raw());
        }
    }
    sum_rows(grad_out, cout, *g.bias);
    return g;
}

// ---------------------------------------------------------------- maxpool

template <typename T>
ForwardResult<T> maxpool_forward(const BasicTensor<T>& x) {
    require_rank(x, 4, "maxpool_forward");
    const std::size_t n = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    if (h % 2 != 0 || w % 2 != 0) {
        throw ShapeError("maxpool_forward: spatial dimensions must be even, got " + shape_str(x.shape()));
    }
    const std::size_t oh = h / 2, ow = w / 2;
    BasicTensor<T> out({n, oh, ow, c});
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::maxpool2d;
    cache.input_shape = x.shape();
    cache.argmax.resize(out.size());
    std::size_t o = 0;
    for (std::size_t b = 0; b < n; ++b) {
        for (std::size_t i = 0; i < oh; ++i) {
            for (std::size_t j = 0; j < ow; ++j) {
                for (std::size_t ch = 0; ch < c; ++ch, ++o) {
                    std::size_t best = ((b * h + 2 * i) * w + 2 * j) * c + ch;
                    for (std::size_t di = 0; di < 2; ++di) {
                        for (std::size_t dj = 0; dj < 2; ++dj) {
                            const std::size_t idx = ((b * h + 2 * i + di) * w + 2 * j + dj) * c + ch;
                            if (x[idx] > x[best]) best = idx;
                        }
                    }
                    out[o] = x[best];
                    cache.argmax[o] = static_cast<std::uint32_t>(best);
                }
            }
        }
    }
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicTensor<T> maxpool_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache) {
    require_kind(cache.kind, LayerKind::maxpool2d, "maxpool_backward");
    if (grad_out.size() != cache.argmax.size()) {
        throw ShapeError("maxpool_backward: grad shape " + shape_str(grad_out.shape()) + " does not match cache");
    }
    BasicTensor<T> dx(cache.input_shape);
    for (std::size_t o = 0; o < grad_out.size(); ++o) dx[cache.argmax[o]] += grad_out[o];
    return dx;
}

// ---------------------------------------------------------------- batchnorm

template <typename T>
ForwardResult<T> batchnorm_forward(const BasicTensor<T>& x, BasicLayerParams<T>& p, Mode mode, double momentum,
                                   double epsilon) {
    require_kind(p.kind, LayerKind::batchnorm, "batchnorm_forward");
    if (mode == Mode::infer) {
        BasicLayerCache<T> cache;
        cache.kind = LayerKind::batchnorm;
        return {batchnorm_infer(x, p, epsilon), std::move(cache)};
    }
    const auto& gamma = need(p.gamma, "batchnorm", "gamma");
    const auto& beta = need(p.beta, "batchnorm", "beta");
    auto& mean_avg = *p.moving_mean;
    auto& var_avg = *p.moving_variance;
    const std::size_t c = x.shape().back();
    if (gamma.size() != c || beta.size() != c || mean_avg.size() != c || var_avg.size() != c) {
        throw ShapeError("batchnorm: parameters sized " + std::to_string(gamma.size()) + " but input has " +
                         std::to_string(c) + " channels");
    }
    const std::size_t m = x.size() / c;
    std::vector<double> mean(c, 0.0), var(c, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < c; ++k) mean[k] += x[r * c + k];
    }
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
            const double d = x[r * c + k] - mean[k];
            var[k] += d * d;
        }
    }
    for (auto& v : var) v /= static_cast<double>(m);

    BasicLayerCache<T> cache;
    cache.kind = LayerKind::batchnorm;
    cache.inv_std.resize(c);
    for (std::size_t k = 0; k < c; ++k) cache.inv_std[k] = static_cast<T>(1.0 / std::sqrt(var[k] + epsilon));
    cache.normalized = BasicTensor<T>(x.shape());
    BasicTensor<T> out(x.shape());
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = r * c + k;
            const T xhat = static_cast<T>((x[i] - mean[k]) * cache.inv_std[k]);
            cache.normalized[i] = xhat;
            out[i] = gamma[k] * xhat + beta[k];
        }
    }
    const double keep = p.statistics_seeded ? momentum : 0.0;
    for (std::size_t k = 0; k < c; ++k) {
        mean_avg[k] = static_cast<T>(keep * mean_avg[k] + (1.0 - keep) * mean[k]);
        var_avg[k] = static_cast<T>(keep * var_avg[k] + (1.0 - keep) * var[k]);
    }
    p.statistics_seeded = true;
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& x, const BasicLayerParams<T>& p, double epsilon) {
    require_kind(p.kind, LayerKind::batchnorm, "batchnorm_infer");
    const auto& gamma = need(p.gamma, "batchnorm", "gamma");
    const auto& beta = need(p.beta, "batchnorm", "beta");
    const auto& mean = need(p.moving_mean, "batchnorm", "moving_mean");
    const auto& var = need(p.moving_variance, "batchnorm", "moving_variance");
    const std::size_t c = x.shape().back();
    if (gamma.size() != c || mean.size() != c) {
        throw ShapeError("batchnorm: parameters sized " + std::to_string(gamma.size()) + " but input has " +
                         std::to_string(c) + " channels");
    }
    std::vector<T> scale(c), shift(c);
    for (std::size_t k = 0; k < c; ++k) {
        const double s = gamma[k] / std::sqrt(static_cast<double>(var[k]) + epsilon);
        scale[k] = static_cast<T>(s);
        shift[k] = static_cast<T>(beta[k] - s * mean[k]);
    }
    BasicTensor<T> out(x.shape());
    const std::size_t m = x.size() / c;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < c; ++k) out[r * c + k] = x[r * c + k] * scale[k] + shift[k];
    }
    return out;
}

template <typename T>
BasicLayerGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                      const BasicLayerParams<T>& p, bool want_input_grad) {
    require_kind(cache.kind, LayerKind::batchnorm, "batchnorm_backward");
    if (cache.normalized.empty()) {
        throw ShapeError("batchnorm_backward: cache comes from an inference pass");
    }
    if (grad_out.shape() != cache.normalized.shape()) {
        throw ShapeError("batchnorm_backward: grad shape " + shape_str(grad_out.shape()) + " does not match cache");
    }
    const auto& gamma = need(p.gamma, "batchnorm", "gamma");
    const std::size_t c = grad_out.shape().back();
    const std::size_t m = grad_out.size() / c;
    std::vector<double> dgamma(c, 0.0), dbeta(c, 0.0);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t k = 0; k < c; ++k) {
            const std::size_t i = r * c + k;
            dgamma[k] += static_cast<double>(grad_out[i]) * cache.normalized[i];
            dbeta[k] += grad_out[i];
        }
    }
    BasicLayerGrads<T> g;
    g.gamma = BasicTensor<T>({c});
    g.beta = BasicTensor<T>({c});
    for (std::size_t k = 0; k < c; ++k) {
        (*g.gamma)[k] = static_cast<T>(dgamma[k]);
        (*g.beta)[k] = static_cast<T>(dbeta[k]);
    }
    if (want_input_grad) {
        g.input = BasicTensor<T>(grad_out.shape());
        const double inv_m = 1.0 / static_cast<double>(m);
        for (std::size_t r = 0; r < m; ++r) {
            for (std::size_t k = 0; k < c; ++k) {
                const std::size_t i = r * c + k;
                const double scaled = m * static_cast<double>(grad_out[i]) - dbeta[k] -
                                      static_cast<double>(cache.normalized[i]) * dgamma[k];
                g.input[i] = static_cast<T>(gamma[k] * cache.inv_std[k] * inv_m * scaled);
            }
        }
    }
    return g;
}

// ---------------------------------------------------------------- dense

template <typename T>
ForwardResult<T> dense_forward(const BasicTensor<T>& x, const BasicLayerParams<T>& p) {
    require_kind(p.kind, LayerKind::dense, "dense_forward");
    require_rank(x, 2, "dense_forward");
    const auto& w = need(p.weights, "dense", "weights");
    const auto& b = need(p.bias, "dense", "bias");
    if (w.rank() != 2 || w.dim(0) != x.dim(1)) {
        throw ShapeError("dense: input " + shape_str(x.shape()) + " incompatible with weights " +
                         shape_str(w.shape()));
    }
    const std::size_t n = x.dim(0), d = x.dim(1), u = w.dim(1);
    if (b.size() != u) throw ShapeError("dense: bias size mismatch");
    BasicTensor<T> out({n, u});
    gemm(x.raw(), false, w.raw(), false, out.raw(), n, d, u, false);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t k = 0; k < u; ++k) out[r * u + k] += b[k];
    }
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::dense;
    cache.input = x;
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicLayerGrads<T> dense_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                  const BasicLayerParams<T>& p, bool want_input_grad) {
    require_kind(cache.kind, LayerKind::dense, "dense_backward");
    const auto& x = cache.input;
    const auto& w = need(p.weights, "dense", "weights");
    const std::size_t n = x.dim(0), d = x.dim(1), u = w.dim(1);
    if (grad_out.shape() != Shape{n, u}) {
        throw ShapeError("dense_backward: grad shape " + shape_str(grad_out.shape()) + " does not match forward output");
    }
    BasicLayerGrads<T> g;
    g.weights = BasicTensor<T>(w.shape());
    g.bias = BasicTensor<T>({u});
    gemm(x.raw(), true, grad_out.raw(), false, g.weights->raw(), d, n, u, false);
    sum_rows(grad_out, u, *g.bias);
    if (want_input_grad) {
        g.input = BasicTensor<T>(x.shape());
        gemm(grad_out.raw(), false, w.raw(), true, g.input.raw(), n, u, d, false);
    }
    return g;
}

// ---------------------------------------------------------------- dropout

template <typename T>
ForwardResult<T> dropout_forward(const BasicTensor<T>& x, double rate, Mode mode, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must lie in [0,1)");
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::dropout;
    if (mode == Mode::infer) return {x, std::move(cache)};
    const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
    cache.mask.resize(x.size());
    BasicTensor<T> out(x.shape());
    Rng rng(seed);
    for (std::size_t i = 0; i < x.size(); ++i) {
        cache.mask[i] = rng.uniform() < rate ? T{0} : keep_scale;
        out[i] = x[i] * cache.mask[i];
    }
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache) {
    require_kind(cache.kind, LayerKind::dropout, "dropout_backward");
    if (cache.mask.empty()) return grad_out;  // inference pass
    if (cache.mask.size() != grad_out.size()) throw ShapeError("dropout_backward: grad does not match mask");
    BasicTensor<T> dx(grad_out.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * cache.mask[i];
    return dx;
}

// ---------------------------------------------------------------- flatten / relu / softmax

template <typename T>
ForwardResult<T> flatten_forward(const BasicTensor<T>& x) {
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::flatten;
    cache.input_shape = x.shape();
    return {x.reshaped({x.dim(0), x.size() / x.dim(0)}), std::move(cache)};
}

template <typename T>
BasicTensor<T> flatten_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache) {
    require_kind(cache.kind, LayerKind::flatten, "flatten_backward");
    return grad_out.reshaped(cache.input_shape);
}

template <typename T>
ForwardResult<T> relu_forward(const BasicTensor<T>& x) {
    BasicTensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
    BasicLayerCache<T> cache;
    cache.kind = LayerKind::relu;
    cache.input = x;
    return {std::move(out), std::move(cache)};
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache) {
    require_kind(cache.kind, LayerKind::relu, "relu_backward");
    if (grad_out.shape() != cache.input.shape()) throw ShapeError("relu_backward: grad does not match cache");
    BasicTensor<T> dx(grad_out.shape());
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = cache.input[i] > T{0} ? grad_out[i] : T{0};
    return dx;
}

template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits) {
    require_rank(logits, 2, "softmax");
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    BasicTensor<T> out(logits.shape());
    for (std::size_t r = 0; r < n; ++r) {
        const T* row = logits.raw() + r * k;
        T* dst = out.raw() + r * k;
        const T peak = *std::max_element(row, row + k);
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            const double e = std::exp(static_cast<double>(row[j]) - static_cast<double>(peak));
            dst[j] = static_cast<T>(e);
            total += e;
        }
        for (std::size_t j = 0; j < k; ++j) dst[j] = static_cast<T>(dst[j] / total);
    }
    return out;
}

template <typename T>
BasicLayerGrads<T> layer_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                  const BasicLayerParams<T>& p, bool want_input_grad) {
    switch (cache.kind) {
        case LayerKind::conv2d:
            return conv2d_backward(grad_out, cache, p, want_input_grad);
        case LayerKind::batchnorm:
            return batchnorm_backward(grad_out, cache, p, want_input_grad);
        case LayerKind::dense:
            return dense_backward(grad_out, cache, p, want_input_grad);
        case LayerKind::maxpool2d:
            return {maxpool_backward(grad_out, cache), {}, {}, {}, {}};
        case LayerKind::flatten:
            return {flatten_backward(grad_out, cache), {}, {}, {}, {}};
        case LayerKind::dropout:
            return {dropout_backward(grad_out, cache), {}, {}, {}, {}};
        case LayerKind::relu:
            return {relu_backward(grad_out, cache), {}, {}, {}, {}};
        case LayerKind::softmax:
            break;
    }
    throw ShapeError("softmax has no standalone backward; use cross_entropy");
}

#define HCR_INSTANTIATE(T)                                                                                        \
    template struct BasicLayerParams<T>;                                                                          \
    template BasicLayerParams<T> make_conv2d<T>(std::size_t, std::size_t, std::uint64_t);                         \
    template BasicLayerParams<T> make_dense<T>(std::size_t, std::size_t, std::uint64_t);                          \
    template BasicLayerParams<T> make_batchnorm<T>(std::size_t);                                                  \
    template BasicLayerParams<T> make_dropout<T>(double);                                                         \
    template BasicLayerParams<T> make_stateless<T>(LayerKind);                                                    \
    template ForwardResult<T> conv2d_forward(const BasicTensor<T>&, const BasicLayerParams<T>&);                  \
    template BasicLayerGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicLayerCache<T>&,                 \
                                                const BasicLayerParams<T>&, bool);                                \
    template ForwardResult<T> maxpool_forward(const BasicTensor<T>&);                                             \
    template BasicTensor<T> maxpool_backward(const BasicTensor<T>&, const BasicLayerCache<T>&);                   \
    template ForwardResult<T> batchnorm_forward(const BasicTensor<T>&, BasicLayerParams<T>&, Mode, double,        \
                                                double);                                                          \
    template BasicTensor<T> batchnorm_infer(const BasicTensor<T>&, const BasicLayerParams<T>&, double);           \
    template BasicLayerGrads<T> batchnorm_backward(const BasicTensor<T>&, const BasicLayerCache<T>&,              \
                                                   const BasicLayerParams<T>&, bool);                             \
    template ForwardResult<T> dense_forward(const BasicTensor<T>&, const BasicLayerParams<T>&);                   \
    template BasicLayerGrads<T> dense_backward(const BasicTensor<T>&, const BasicLayerCache<T>&,                  \
                                               const BasicLayerParams<T>&, bool);                                 \
    template ForwardResult<T> dropout_forward(const BasicTensor<T>&, double, Mode, std::uint64_t);                \
    template BasicTensor<T> dropout_backward(const BasicTensor<T>&, const BasicLayerCache<T>&);                   \
    template ForwardResult<T> flatten_forward(const BasicTensor<T>&);                                             \
    template BasicTensor<T> flatten_backward(const BasicTensor<T>&, const BasicLayerCache<T>&);                   \
    template ForwardResult<T> relu_forward(const BasicTensor<T>&);                                                \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicLayerCache<T>&);                      \
    template BasicTensor<T> softmax(const BasicTensor<T>&);                                                       \
    template BasicLayerGrads<T> layer_backward(const BasicTensor<T>&, const BasicLayerCache<T>&,                  \
                                               const BasicLayerParams<T>&, bool);

HCR_INSTANTIATE(float)
HCR_INSTANTIATE(double)

#undef HCR_INSTANTIATE

}  // namespace hcr
