#include "hcrnet/network.hpp"

#include <algorithm>

#include "hcrnet/random.hpp"

namespace hcr {

namespace {

struct ConvSpec {
    const char* name;
    std::size_t in;
    std::size_t out;
};

constexpr ConvSpec kBackbone[] = {
    {"block1_conv1", 3, 64},    {"block1_conv2", 64, 64},   {"block2_conv1", 64, 128},
    {"block2_conv2", 128, 128}, {"block3_conv1", 128, 256}, {"block3_conv2", 256, 256},
    {"block3_conv3", 256, 256}, {"block4_conv1", 256, 512}, {"block4_conv2", 512, 512},
};

bool has_gradient_params(const LayerParams& p) { return p.gradient_param_count() > 0; }

void require_input(const Tensor& batch) {
    if (batch.rank() != 4 || batch.dim(1) != kInputSide || batch.dim(2) != kInputSide ||
        batch.dim(3) != kInputChannels) {
        throw ShapeError("network input must be [N,32,32,3], got " + shape_str(batch.shape()));
    }
}

template <typename Fn>
void for_each_tensor(const LayerParams& p, Fn&& fn) {
    if (p.weights) fn("weight", *p.weights);
    if (p.bias) fn("bias", *p.bias);
    if (p.gamma) fn("gamma", *p.gamma);
    if (p.beta) fn("beta", *p.beta);
    if (p.moving_mean) fn("moving_mean", *p.moving_mean);
    if (p.moving_variance) fn("moving_variance", *p.moving_variance);
}

template <typename Fn>
void for_each_tensor(LayerParams& p, Fn&& fn) {
    if (p.weights) fn("weight", *p.weights);
    if (p.bias) fn("bias", *p.bias);
    if (p.gamma) fn("gamma", *p.gamma);
    if (p.beta) fn("beta", *p.beta);
    if (p.moving_mean) fn("moving_mean", *p.moving_mean);
    if (p.moving_variance) fn("moving_variance", *p.moving_variance);
}

std::size_t lowest_trainable(const NetworkGraph& g) {
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        const auto& p = g.layers[i].params;
        if (has_gradient_params(p) && p.trainable) return i;
    }
    return g.layers.size();
}

Tensor apply_activation(Tensor x, Activation act, LayerCache* cache) {
    if (act != Activation::relu) return x;
    auto [out, c] = relu_forward(x);
    if (cache) *cache = std::move(c);
    return out;
}

}  // namespace

std::string_view to_string(Phase phase) { return phase == Phase::phase1 ? "phase1" : "phase2"; }

NamedLayer& NetworkGraph::layer(std::string_view name) {
    for (auto& l : layers) {
        if (l.name == name) return l;
    }
    throw ConfigError("no layer named " + std::string(name));
}

const NamedLayer& NetworkGraph::layer(std::string_view name) const {
    return const_cast<NetworkGraph*>(this)->layer(name);
}

const std::vector<std::string>& backbone_layer_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto& c : kBackbone) v.emplace_back(c.name);
        return v;
    }();
    return names;
}

NetworkGraph build_hcrnet(std::size_t num_classes, std::uint64_t seed) {
    if (num_classes < 2) throw ConfigError("HCR-Net needs at least 2 classes");
    NetworkGraph g;
    g.num_classes = num_classes;
    std::uint64_t stream = 0;
    auto next_seed = [&] { return mix_seed(seed, stream++); };
    auto add = [&](std::string name, LayerParams p, Activation act, Shape out, bool backbone = false) {
        g.layers.push_back({std::move(name), std::move(p), act, std::move(out), backbone});
    };

    std::size_t side = kInputSide;
    std::size_t conv_index = 0;
    const std::size_t block_sizes[] = {2, 2, 3, 2};
    for (std::size_t block = 0; block < 4; ++block) {
        for (std::size_t k = 0; k < block_sizes[block]; ++k, ++conv_index) {
            const auto& spec = kBackbone[conv_index];
            add(spec.name, make_conv2d<float>(spec.in, spec.out, next_seed()), Activation::relu,
                {side, side, spec.out}, true);
        }
        if (block < 3) {
            side /= 2;
            add("block" + std::to_string(block + 1) + "_pool", make_stateless<float>(LayerKind::maxpool2d),
                Activation::none, {side, side, kBackbone[conv_index - 1].out});
        }
    }
    add("batch_normalization", make_batchnorm<float>(512), Activation::none, {4, 4, 512});
    add("flatten", make_stateless<float>(LayerKind::flatten), Activation::none, {4 * 4 * 512});
    add("dense", make_dense<float>(4 * 4 * 512, 512, next_seed()), Activation::relu, {512});
    add("batch_normalization_1", make_batchnorm<float>(512), Activation::none, {512});
    add("dropout", make_dropout<float>(kHeadDropout), Activation::none, {512});
    add("dense_1", make_dense<float>(512, 512, next_seed()), Activation::relu, {512});
    add("batch_normalization_2", make_batchnorm<float>(512), Activation::none, {512});
    add("dropout_1", make_dropout<float>(kHeadDropout), Activation::none, {512});
    add("dense_2", make_dense<float>(512, num_classes, next_seed()), Activation::softmax, {num_classes});
    set_phase(g, Phase::phase1);
    return g;
}

std::size_t layer_param_count(const NamedLayer& layer) {
    return layer.params.gradient_param_count() + layer.params.statistic_param_count();
}

ParamCount param_count(const NetworkGraph& g) {
    ParamCount c;
    for (const auto& l : g.layers) {
        const auto grad = l.params.gradient_param_count();
        const auto stats = l.params.statistic_param_count();
        c.total += grad + stats;
        c.non_trainable += stats;
        if (l.params.trainable) {
            c.trainable += grad;
        } else {
            c.non_trainable += grad;
        }
    }
    return c;
}

void set_phase(NetworkGraph& g, Phase phase) {
    for (auto& l : g.layers) {
        if (!has_gradient_params(l.params)) continue;
        l.params.trainable = phase == Phase::phase2 || !l.backbone;
    }
    g.phase = phase;
}

std::vector<ParamRef> gradient_params(NetworkGraph& g) {
    std::vector<ParamRef> refs;
    for (auto& l : g.layers) {
        auto& p = l.params;
        for (auto* field : {&p.weights, &p.bias, &p.gamma, &p.beta}) {
            if (!*field) continue;
            const char* suffix = field == &p.weights ? "weight"
                                 : field == &p.bias  ? "bias"
                                 : field == &p.gamma ? "gamma"
                                                     : "beta";
            refs.push_back({l.name + "." + suffix, &**field, p.trainable});
        }
    }
    return refs;
}

std::vector<std::pair<std::string, Tensor*>> all_tensors(NetworkGraph& g) {
    std::vector<std::pair<std::string, Tensor*>> out;
    for (auto& l : g.layers) {
        for_each_tensor(l.params, [&](const char* field, Tensor& t) { out.emplace_back(l.name + "." + field, &t); });
    }
    return out;
}

std::vector<std::pair<std::string, const Tensor*>> all_tensors(const NetworkGraph& g) {
    std::vector<std::pair<std::string, const Tensor*>> out;
    for (const auto& l : g.layers) {
        for_each_tensor(l.params,
                        [&](const char* field, const Tensor& t) { out.emplace_back(l.name + "." + field, &t); });
    }
    return out;
}

ForwardPass forward(NetworkGraph& g, const Tensor& batch, Mode mode, std::uint64_t seed) {
    require_input(batch);
    if (mode == Mode::infer) {
        ForwardPass pass;
        pass.logits = Tensor{};
        pass.probs = infer(g, batch);
        pass.first_cached = g.layers.size();
        return pass;
    }
    ForwardPass pass;
    pass.first_cached = lowest_trainable(g);
    pass.caches.resize(g.layers.size() - pass.first_cached);
    Tensor x = batch;
    for (std::size_t i = 0; i < g.layers.size(); ++i) {
        auto& l = g.layers[i];
        const bool keep = i >= pass.first_cached;
        LayerState* state = keep ? &pass.caches[i - pass.first_cached] : nullptr;
        ForwardResult<float> r;
        switch (l.params.kind) {
            case LayerKind::conv2d:
                r = conv2d_forward(x, l.params);
                break;
            case LayerKind::maxpool2d:
                r = maxpool_forward(x);
                break;
            case LayerKind::batchnorm:
                r = batchnorm_forward(x, l.params, Mode::train);
                break;
            case LayerKind::flatten:
                r = flatten_forward(x);
                break;
            case LayerKind::dense:
                r = dense_forward(x, l.params);
                break;
            case LayerKind::dropout:
                r = dropout_forward(x, l.params.dropout_rate, Mode::train, mix_seed(seed, i));
                break;
            case LayerKind::relu:
                r = relu_forward(x);
                break;
            case LayerKind::softmax:
                r = {softmax(x), LayerCache{LayerKind::softmax, {}, {}, {}, {}, {}, {}}};
                break;
        }
        if (state) state->layer = std::move(r.second);
        x = apply_activation(std::move(r.first), l.activation, state ? &state->activation : nullptr);
        require_finite(x, l.name.c_str());
    }
    pass.logits = std::move(x);
    pass.probs = softmax(pass.logits);
    return pass;
}

Tensor infer(const NetworkGraph& g, const Tensor& batch) {
    require_input(batch);
    Tensor x = batch;
    for (const auto& l : g.layers) {
        switch (l.params.kind) {
            case LayerKind::conv2d:
                x = conv2d_forward(x, l.params).first;
                break;
            case LayerKind::maxpool2d:
                x = maxpool_forward(x).first;
                break;
            case LayerKind::batchnorm:
                x = batchnorm_infer(x, l.params);
                break;
            case LayerKind::flatten:
                x = std::move(x).reshaped({x.dim(0), x.size() / x.dim(0)});
                break;
            case LayerKind::dense:
                x = dense_forward(x, l.params).first;
                break;
            case LayerKind::dropout:
                break;
            case LayerKind::relu:
                x = relu_forward(x).first;
                break;
            case LayerKind::softmax:
                x = softmax(x);
                break;
        }
        x = apply_activation(std::move(x), l.activation, nullptr);
        require_finite(x, l.name.c_str());
    }
    return softmax(x);
}

std::vector<int> argmax_rows(const Tensor& probs) {
    if (probs.rank() != 2) throw ShapeError("argmax_rows expects [N,K]");
    const std::size_t n = probs.dim(0), k = probs.dim(1);
    std::vector<int> out(n);
    for (std::size_t r = 0; r < n; ++r) {
        const float* row = probs.raw() + r * k;
        // max_element returns the first maximum.
        out[r] = static_cast<int>(std::max_element(row, row + k) - row);
    }
    return out;
}

std::vector<int> predict(const NetworkGraph& g, const Tensor& batch) { return argmax_rows(infer(g, batch)); }

std::vector<std::pair<std::string, Tensor>> backward(NetworkGraph& g, const ForwardPass& pass,
                                                     const Tensor& grad_logits) {
    if (grad_logits.shape() != pass.logits.shape()) {
        throw ShapeError("backward: gradient shape " + shape_str(grad_logits.shape()) + " does not match logits");
    }
    std::vector<std::pair<std::string, Tensor>> grads;
    Tensor grad = grad_logits;
    for (std::size_t i = g.layers.size(); i-- > pass.first_cached;) {
        auto& l = g.layers[i];
        const auto& state = pass.caches[i - pass.first_cached];
        if (l.activation == Activation::relu) grad = relu_backward(grad, state.activation);
        const bool want_input = i > pass.first_cached;
        auto lg = layer_backward(grad, state.layer, l.params, want_input);
        if (l.params.trainable) {
            // Pushed in reverse field order; the whole list is reversed below.
            if (lg.beta) grads.emplace_back(l.name + ".beta", std::move(*lg.beta));
            if (lg.gamma) grads.emplace_back(l.name + ".gamma", std::move(*lg.gamma));
            if (lg.bias) grads.emplace_back(l.name + ".bias", std::move(*lg.bias));
            if (lg.weights) grads.emplace_back(l.name + ".weight", std::move(*lg.weights));
        }
        if (want_input) grad = std::move(lg.input);
    }
    std::reverse(grads.begin(), grads.end());
    return grads;
}

}  // namespace hcr
