#include <doctest.h>

#include <cmath>
#include <map>

#include "hcrnet/network.hpp"

using namespace hcr;

namespace {

const std::vector<std::pair<std::string, std::size_t>> kReferenceCounts = {
    {"block1_conv1", 1792},          {"block1_conv2", 36928},      {"block2_conv1", 73856},
    {"block2_conv2", 147584},        {"block3_conv1", 295168},     {"block3_conv2", 590080},
    {"block3_conv3", 590080},        {"block4_conv1", 1180160},    {"block4_conv2", 2359808},
    {"batch_normalization", 2048},   {"dense", 4194816},           {"batch_normalization_1", 2048},
    {"dense_1", 262656},             {"batch_normalization_2", 2048}, {"dense_2", 5130},
};

const std::vector<std::pair<std::string, Shape>> kShapeChain = {
    {"block1_conv1", {32, 32, 64}}, {"block1_conv2", {32, 32, 64}}, {"block1_pool", {16, 16, 64}},
    {"block2_conv1", {16, 16, 128}}, {"block2_conv2", {16, 16, 128}}, {"block2_pool", {8, 8, 128}},
    {"block3_conv1", {8, 8, 256}}, {"block3_conv2", {8, 8, 256}}, {"block3_conv3", {8, 8, 256}},
    {"block3_pool", {4, 4, 256}}, {"block4_conv1", {4, 4, 512}}, {"block4_conv2", {4, 4, 512}},
    {"batch_normalization", {4, 4, 512}}, {"flatten", {8192}}, {"dense", {512}},
    {"batch_normalization_1", {512}}, {"dropout", {512}}, {"dense_1", {512}},
    {"batch_normalization_2", {512}}, {"dropout_1", {512}}, {"dense_2", {10}},
};

Tensor random_batch(std::size_t n, std::uint64_t seed) { return create({n, 32, 32, 3}, fill::Uniform{0, 1, seed}); }

std::vector<bool> trainable_flags(const NetworkGraph& g) {
    std::vector<bool> out;
    for (const auto& l : g.layers) out.push_back(l.params.trainable);
    return out;
}

}  // namespace

TEST_CASE("parameter counts follow the reference table") {
    auto g = build_hcrnet(10, 1);
    std::size_t sum = 0;
    for (const auto& [name, count] : kReferenceCounts) {
        INFO(name);
        CHECK(layer_param_count(g.layer(name)) == count);
        sum += count;
    }
    const auto p1 = param_count(g);
    CHECK(p1.total == 9744202);
    CHECK(sum == p1.total);
    CHECK(p1.trainable == 4465674);

    set_phase(g, Phase::phase2);
    const auto p2 = param_count(g);
    CHECK(p2.total == 9744202);
    CHECK(p2.trainable == 9741130);
    CHECK(p2.non_trainable == 3072);
    CHECK(p2.trainable + p2.non_trainable == p2.total);
}

TEST_CASE("output layer size tracks the class count") {
    CHECK(layer_param_count(build_hcrnet(2, 1).layer("dense_2")) == 1026);
    CHECK(layer_param_count(build_hcrnet(10, 1).layer("dense_2")) == 5130);
    CHECK_THROWS_AS(build_hcrnet(1, 1), ConfigError);
}

TEST_CASE("phase switches gate the backbone") {
    auto g = build_hcrnet(10, 1);
    CHECK(g.phase == Phase::phase1);
    for (const auto& name : backbone_layer_names()) CHECK_FALSE(g.layer(name).params.trainable);
    CHECK(g.layer("dense").params.trainable);
    CHECK(g.layer("batch_normalization").params.trainable);

    const auto before = trainable_flags(g);
    set_phase(g, Phase::phase2);
    CHECK(g.layer("block1_conv1").params.trainable);
    CHECK(g.layer("block4_conv2").params.trainable);
    set_phase(g, Phase::phase1);
    CHECK(trainable_flags(g) == before);
}

TEST_CASE("layer shapes follow the reference chain") {
    const auto g = build_hcrnet(10, 3);
    std::map<std::string, Shape> declared;
    for (const auto& l : g.layers) declared[l.name] = l.output_shape;
    for (const auto& [name, shape] : kShapeChain) {
        INFO(name);
        CHECK(declared.at(name) == shape);
    }

    // Walk a real batch through the layers and compare against the chain.
    for (std::size_t n : {1u, 3u}) {
        Tensor x = random_batch(n, 5);
        for (const auto& l : g.layers) {
            switch (l.params.kind) {
                case LayerKind::conv2d: x = conv2d_forward(x, l.params).first; break;
                case LayerKind::maxpool2d: x = maxpool_forward(x).first; break;
                case LayerKind::batchnorm: x = batchnorm_infer(x, l.params); break;
                case LayerKind::flatten: x = flatten_forward(x).first; break;
                case LayerKind::dense: x = dense_forward(x, l.params).first; break;
                default: break;
            }
            Shape expect{n};
            expect.insert(expect.end(), l.output_shape.begin(), l.output_shape.end());
            INFO(l.name);
            CHECK(x.shape() == expect);
        }
    }
}

TEST_CASE("forward produces probability rows") {
    auto g = build_hcrnet(10, 2);
    const auto batch = random_batch(4, 9);
    const auto pass = forward(g, batch, Mode::train, 1);
    CHECK(pass.probs.shape() == Shape{4, 10});
    CHECK(pass.first_cached == g.layers.size() - pass.caches.size());
    for (std::size_t r = 0; r < 4; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < 10; ++k) s += pass.probs[r * 10 + k];
        CHECK(std::abs(s - 1) < 1e-6);
    }
    CHECK_THROWS_AS(forward(g, create({2, 28, 28, 3}, fill::Zeros{}), Mode::train), ShapeError);
    CHECK_THROWS_AS(infer(g, create({2, 32, 32, 1}, fill::Zeros{})), ShapeError);
}

TEST_CASE("inference is deterministic and near uniform at initialization") {
    const auto g = build_hcrnet(10, 4);
    const auto batch = random_batch(64, 10);
    const auto a = infer(g, batch);
    CHECK(bit_identical(a, infer(g, batch)));
    for (std::size_t k = 0; k < 10; ++k) {
        double mean = 0;
        for (std::size_t r = 0; r < 64; ++r) mean += a[r * 10 + k];
        mean /= 64;
        CHECK(std::abs(mean - 0.1) < 0.05);
    }
}

TEST_CASE("argmax picks the lowest index on ties and ignores logit shifts") {
    CHECK(argmax_rows(Tensor({1, 3}, std::vector<float>{0.1f, 0.7f, 0.2f})) == std::vector<int>{1});
    CHECK(argmax_rows(Tensor({1, 2}, std::vector<float>{0.5f, 0.5f})) == std::vector<int>{0});
    const auto logits = create({6, 5}, fill::Uniform{-3, 3, 2});
    const auto shifted = elementwise(ElementOp::add, logits, 7.5f);
    CHECK(argmax_rows(softmax(logits)) == argmax_rows(softmax(shifted)));
}

TEST_CASE("phase one backward leaves the backbone out") {
    auto g = build_hcrnet(10, 5);
    const auto pass = forward(g, random_batch(2, 3), Mode::train, 2);
    const auto grads = backward(g, pass, create({2, 10}, fill::Uniform{-1, 1, 4}));
    std::size_t scalars = 0;
    for (const auto& [name, t] : grads) {
        CHECK(name.rfind("block", 0) != 0);
        scalars += t.size();
    }
    CHECK(scalars == 4465674);

    set_phase(g, Phase::phase2);
    const auto pass2 = forward(g, random_batch(2, 3), Mode::train, 2);
    CHECK(pass2.first_cached == 0);
    std::size_t all = 0;
    for (const auto& [name, t] : backward(g, pass2, create({2, 10}, fill::Uniform{-1, 1, 4}))) all += t.size();
    CHECK(all == 9741130);
}
