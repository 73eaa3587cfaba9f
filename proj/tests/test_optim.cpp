#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "hcrnet/optim.hpp"
#include "hcrnet/trainer.hpp"

using namespace hcr;

TEST_CASE("cross-entropy closed forms") {
    const Tensor perfect({2, 3}, std::vector<float>{0, 1, 0, 1, 0, 0});
    const std::vector<int> labels{1, 0};
    const auto ce = cross_entropy(perfect, labels);
    CHECK(ce.loss == doctest::Approx(0.0));

    const Tensor uniform({4, 10}, 0.1f);
    CHECK(cross_entropy(uniform, std::vector<int>{0, 3, 9, 5}).loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));

    const Tensor zero({1, 2}, std::vector<float>{0, 1});
    CHECK(cross_entropy(zero, std::vector<int>{0}).loss == doctest::Approx(-std::log(1e-12)));

    CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0, 3, 10, 5}), DataError);
    CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0, -1, 1, 5}), DataError);
    CHECK_THROWS_AS(cross_entropy(uniform, std::vector<int>{0}), ShapeError);
}

TEST_CASE("cross-entropy matches direct summation") {
    const auto probs = softmax(create<double>({6, 7}, fill::Uniform{-4, 4, 31}));
    const std::vector<int> labels{0, 6, 2, 2, 5, 1};
    double s = 0;
    for (std::size_t i = 0; i < 6; ++i) s -= std::log(probs[i * 7 + labels[i]]);
    const auto ce = cross_entropy(probs, labels);
    CHECK(std::abs(ce.loss - s / 6) < 1e-6);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t k = 0; k < 7; ++k) {
            const double onehot = static_cast<int>(k) == labels[i] ? 1.0 : 0.0;
            CHECK(ce.grad_logits[i * 7 + k] == doctest::Approx((probs[i * 7 + k] - onehot) / 6));
        }
}

TEST_CASE("cross-entropy logit gradient matches finite differences") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto r = gradcheck::check_softmax_cross_entropy(seed);
        CHECK(r.max_rel_error <= 1e-4);
    }
}

TEST_CASE("rmsprop single scalar step") {
    Tensor param({1}, 0.0f);
    const Tensor grad({1}, 1.0f);
    RmspropState state;
    const std::vector<ParamUpdate> updates{{"w", &param, &grad, true}};
    rmsprop_step(updates, state, 0.01);
    CHECK(state.accumulators.at("w")[0] == doctest::Approx(0.1));
    CHECK(param[0] == doctest::Approx(-0.01 / (std::sqrt(0.1) + 1e-7)).epsilon(1e-6));
    CHECK(param[0] == doctest::Approx(-0.031623).epsilon(1e-4));
}

TEST_CASE("rmsprop with zero gradient decays the accumulator only") {
    Tensor param({2}, std::vector<float>{1, 2});
    const Tensor one({2}, 1.0f), zero({2});
    RmspropState state;
    rmsprop_step(std::vector<ParamUpdate>{{"w", &param, &one, true}}, state, 0.01);
    const Tensor after = param;
    rmsprop_step(std::vector<ParamUpdate>{{"w", &param, &zero, true}}, state, 0.01);
    CHECK(param == after);
    CHECK(state.accumulators.at("w")[0] == doctest::Approx(0.09));
}

TEST_CASE("rmsprop leaves frozen tensors alone") {
    Tensor frozen = create({3, 3}, fill::Uniform{-1, 1, 2});
    const Tensor before = frozen;
    const Tensor grad({3, 3}, 5.0f);
    RmspropState state;
    rmsprop_step(std::vector<ParamUpdate>{{"f", &frozen, &grad, false}}, state, 0.1);
    CHECK(bit_identical(frozen, before));
    CHECK(state.accumulators.count("f") == 0);

    Tensor p({2});
    const Tensor wrong({3});
    CHECK_THROWS_AS(rmsprop_step(std::vector<ParamUpdate>{{"p", &p, &wrong, true}}, state, 0.1), ShapeError);
}

TEST_CASE("staircase lookup") {
    const StaircaseSchedule constant({{0, 3e-3}}, 7);
    for (int e = 0; e < 7; ++e) CHECK(constant.lr_at(e) == 3e-3);
    CHECK_THROWS_AS(constant.lr_at(7), ConfigError);
    CHECK_THROWS_AS(constant.lr_at(-1), ConfigError);
    CHECK_THROWS_AS(StaircaseSchedule({{1, 1e-3}}, 4), ConfigError);
    CHECK_THROWS_AS(StaircaseSchedule({{0, 1e-3}, {0, 1e-4}}, 4), ConfigError);
    CHECK_THROWS_AS(StaircaseSchedule({{0, -1.0}}, 4), ConfigError);

    const auto s = default_schedule(Phase::phase1, 30);
    CHECK(s.breakpoints().size() == 2);
    CHECK(s.lr_at(0) == 1e-4);
    CHECK(s.lr_at(4) == 1e-4);
    CHECK(s.lr_at(5) == 5e-5);
    CHECK(s.lr_at(29) == 5e-5);
}

TEST_CASE("second phase schedule segments") {
    const auto s = default_schedule(Phase::phase2, 20);
    for (int e = 0; e < 5; ++e) CHECK(s.lr_at(e) == 1e-7);
    for (int e = 5; e < 15; ++e) CHECK(s.lr_at(e) == 5e-6);
    for (int e = 15; e < 20; ++e) CHECK(s.lr_at(e) == 1e-6);
    CHECK(s.lr_at(20 - 3) == 1e-6);

    const auto shortest = default_schedule(Phase::phase2, 11);
    CHECK(shortest.lr_at(4) == 1e-7);
    CHECK(shortest.lr_at(5) == 5e-6);
    CHECK(shortest.lr_at(6) == 1e-6);
    CHECK_THROWS_AS(default_schedule(Phase::phase2, 10), ConfigError);
}

TEST_CASE("loss decreases on a fixed batch") {
    auto g = build_hcrnet(10, 8);
    TrainingSession session(g);
    const auto batch = create({8, 32, 32, 3}, fill::Uniform{0, 1, 3});
    const std::vector<int> labels{0, 1, 2, 3, 4, 5, 6, 7};
    double previous = INFINITY;
    int increases = 0;
    for (int i = 0; i < 50; ++i) {
        const double loss = session.step(batch, labels, 1e-4, 99).loss;
        CHECK(loss >= 0);
        if (loss > previous) ++increases;
        previous = loss;
    }
    CHECK(increases <= 3);
}
