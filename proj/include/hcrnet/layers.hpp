#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "hcrnet/tensor.hpp"

namespace hcr {

enum class LayerKind { conv2d, maxpool2d, batchnorm, flatten, dense, dropout, relu, softmax };
enum class Mode { train, infer };

std::string_view to_string(LayerKind kind);

inline constexpr double kBatchNormMomentum = 0.99;
inline constexpr double kBatchNormEpsilon = 1e-5;

/// Parameters of one layer. Which optional tensors are populated depends on
/// `kind`:
///   conv2d    weights [3,3,Cin,Cout], bias [Cout]
///   dense     weights [D,U], bias [U]
///   batchnorm gamma, beta, moving_mean, moving_variance, each [C]
/// `trainable` gates gradient updates of weights/bias/gamma/beta. The moving
/// statistics are never gradient-updated regardless of the flag. Until
/// `statistics_seeded` is set, the first train-mode batch replaces them
/// outright; later batches blend in by exponential moving average.
template <typename T>
struct BasicLayerParams {
    LayerKind kind = LayerKind::flatten;
    std::optional<BasicTensor<T>> weights;
    std::optional<BasicTensor<T>> bias;
    std::optional<BasicTensor<T>> gamma;
    std::optional<BasicTensor<T>> beta;
    std::optional<BasicTensor<T>> moving_mean;
    std::optional<BasicTensor<T>> moving_variance;
    double dropout_rate = 0.0;
    bool trainable = true;
    bool statistics_seeded = false;

    // Number of scalars held, split by whether gradient descent may touch them.
    std::size_t gradient_param_count() const;
    std::size_t statistic_param_count() const;
};

using LayerParams = BasicLayerParams<float>;
using LayerParams64 = BasicLayerParams<double>;

template <typename T>
BasicLayerParams<T> make_conv2d(std::size_t in_channels, std::size_t out_channels, std::uint64_t seed);
template <typename T>
BasicLayerParams<T> make_dense(std::size_t in_features, std::size_t units, std::uint64_t seed);
template <typename T>
BasicLayerParams<T> make_batchnorm(std::size_t channels);
template <typename T>
BasicLayerParams<T> make_dropout(double rate);
template <typename T>
BasicLayerParams<T> make_stateless(LayerKind kind);

/// Forward intermediates needed by the matching backward call.
template <typename T>
struct BasicLayerCache {
    LayerKind kind = LayerKind::flatten;
    BasicTensor<T> input;                 // conv2d, dense, relu
    Shape input_shape;                    // maxpool2d, flatten
    std::vector<std::uint32_t> argmax;    // maxpool2d: flat input index per output element
    BasicTensor<T> normalized;            // batchnorm: x-hat
    std::vector<T> inv_std;               // batchnorm, per channel
    std::vector<T> mask;                  // dropout: 0 or 1/(1-rate) per element
};

using LayerCache = BasicLayerCache<float>;

template <typename T>
struct BasicLayerGrads {
    BasicTensor<T> input;  // empty when the caller did not request it
    std::optional<BasicTensor<T>> weights;
    std::optional<BasicTensor<T>> bias;
    std::optional<BasicTensor<T>> gamma;
    std::optional<BasicTensor<T>> beta;
};

using LayerGrads = BasicLayerGrads<float>;

template <typename T>
using ForwardResult = std::pair<BasicTensor<T>, BasicLayerCache<T>>;

// 3x3 kernel, stride 1, same padding, NHWC.
template <typename T>
ForwardResult<T> conv2d_forward(const BasicTensor<T>& x, const BasicLayerParams<T>& p);
template <typename T>
BasicLayerGrads<T> conv2d_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                   const BasicLayerParams<T>& p, bool want_input_grad = true);

// 2x2 window, stride 2, valid padding. H and W must be even.
template <typename T>
ForwardResult<T> maxpool_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> maxpool_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache);

// Normalizes over every axis but the last. Train mode also folds the batch
// statistics into the moving averages of `p`.
template <typename T>
ForwardResult<T> batchnorm_forward(const BasicTensor<T>& x, BasicLayerParams<T>& p, Mode mode,
                                   double momentum = kBatchNormMomentum, double epsilon = kBatchNormEpsilon);
// Inference only; leaves `p` untouched.
template <typename T>
BasicTensor<T> batchnorm_infer(const BasicTensor<T>& x, const BasicLayerParams<T>& p,
                               double epsilon = kBatchNormEpsilon);
template <typename T>
BasicLayerGrads<T> batchnorm_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                      const BasicLayerParams<T>& p, bool want_input_grad = true);

template <typename T>
ForwardResult<T> dense_forward(const BasicTensor<T>& x, const BasicLayerParams<T>& p);
template <typename T>
BasicLayerGrads<T> dense_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                  const BasicLayerParams<T>& p, bool want_input_grad = true);

// Inverted dropout. Infer mode and rate 0 return the input unchanged.
template <typename T>
ForwardResult<T> dropout_forward(const BasicTensor<T>& x, double rate, Mode mode, std::uint64_t seed);
template <typename T>
BasicTensor<T> dropout_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache);

template <typename T>
ForwardResult<T> flatten_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> flatten_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache);

template <typename T>
ForwardResult<T> relu_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache);

// Row-wise over the last axis of an [N,K] tensor, max-subtracted. Its
// gradient is only available fused with cross-entropy (see optim.hpp).
template <typename T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

// Dispatch on `cache.kind`. Softmax is rejected: use cross_entropy().
template <typename T>
BasicLayerGrads<T> layer_backward(const BasicTensor<T>& grad_out, const BasicLayerCache<T>& cache,
                                  const BasicLayerParams<T>& p, bool want_input_grad = true);

}  // namespace hcr
