#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hcrnet/layers.hpp"

namespace hcr {

enum class Phase { phase1, phase2 };
enum class Activation { none, relu, softmax };

std::string_view to_string(Phase phase);

inline constexpr std::size_t kInputSide = 32;
inline constexpr std::size_t kInputChannels = 3;
inline constexpr double kHeadDropout = 0.35;

struct NamedLayer {
    std::string name;
    LayerParams params;
    Activation activation = Activation::none;
    Shape output_shape;  // per sample, batch axis omitted
    // Initialized from the pretrained feature extractor and frozen in phase 1.
    bool backbone = false;
};

struct NetworkGraph {
    std::vector<NamedLayer> layers;
    std::size_t num_classes = 0;
    Phase phase = Phase::phase1;

    NamedLayer& layer(std::string_view name);
    const NamedLayer& layer(std::string_view name) const;
};

/// The full architecture: four convolution blocks matching the first ten
/// VGG16 convolutions up to block4_conv2, then BN, flatten, two
/// dense(512)+BN+dropout(0.35) stages and a softmax classifier. Weights are
/// glorot-uniform, BN starts at identity statistics, phase is phase1.
NetworkGraph build_hcrnet(std::size_t num_classes, std::uint64_t seed);

// Names of the nine backbone convolutions, bottom to top.
const std::vector<std::string>& backbone_layer_names();

struct ParamCount {
    std::size_t total = 0;
    std::size_t trainable = 0;
    std::size_t non_trainable = 0;
};

ParamCount param_count(const NetworkGraph& g);
std::size_t layer_param_count(const NamedLayer& layer);

void set_phase(NetworkGraph& g, Phase phase);

/// A gradient-updatable tensor of the graph, e.g. "block1_conv1.weight".
struct ParamRef {
    std::string name;
    Tensor* value;
    bool trainable;
};

// Every weight, bias, gamma and beta in layer order.
std::vector<ParamRef> gradient_params(NetworkGraph& g);

// Every tensor of the graph including BN moving statistics, in layer order.
// Names are "<layer>.<field>" with field one of weight, bias, gamma, beta,
// moving_mean, moving_variance.
std::vector<std::pair<std::string, Tensor*>> all_tensors(NetworkGraph& g);
std::vector<std::pair<std::string, const Tensor*>> all_tensors(const NetworkGraph& g);

struct LayerState {
    LayerCache layer;
    LayerCache activation;
};

struct ForwardPass {
    Tensor logits;
    Tensor probs;
    // Train mode only: caches for layers [first_cached, layers.size()).
    std::size_t first_cached = 0;
    std::vector<LayerState> caches;
};

/// Runs the graph on a [N,32,32,3] batch. Train mode uses batch statistics
/// (updating the BN moving averages), active dropout drawn from `seed`, and
/// retains caches for every layer at or above the lowest trainable one.
ForwardPass forward(NetworkGraph& g, const Tensor& batch, Mode mode, std::uint64_t seed = 0);

// Inference-only forward; a pure function of weights and input.
Tensor infer(const NetworkGraph& g, const Tensor& batch);

// Argmax per row, ties resolved to the lowest class index.
std::vector<int> argmax_rows(const Tensor& probs);
std::vector<int> predict(const NetworkGraph& g, const Tensor& batch);

/// Gradients of the trainable tensors given d(loss)/d(logits), keyed like
/// gradient_params(). Frozen tensors get no entry and nothing below the
/// lowest trainable layer is visited.
std::vector<std::pair<std::string, Tensor>> backward(NetworkGraph& g, const ForwardPass& pass,
                                                     const Tensor& grad_logits);

}  // namespace hcr
