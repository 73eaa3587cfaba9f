#include <doctest.h>

#include <cmath>

#include "hcrnet/random.hpp"
#include "hcrnet/tensor.hpp"

using namespace hcr;

namespace {

Tensor64 triple_loop(const Tensor64& a, const Tensor64& b) {
    Tensor64 c({a.dim(0), b.dim(1)});
    for (std::size_t i = 0; i < a.dim(0); ++i)
        for (std::size_t j = 0; j < b.dim(1); ++j) {
            double s = 0;
            for (std::size_t k = 0; k < a.dim(1); ++k) s += a[i * a.dim(1) + k] * b[k * b.dim(1) + j];
            c[i * b.dim(1) + j] = s;
        }
    return c;
}

}  // namespace

TEST_CASE("create applies the fill rules") {
    const auto z = create({2, 2}, fill::Zeros{});
    CHECK(z == Tensor({2, 2}, std::vector<float>{0, 0, 0, 0}));

    const auto c = create({3}, fill::Constant{1.5});
    CHECK(c == Tensor({3}, std::vector<float>{1.5f, 1.5f, 1.5f}));

    const auto u1 = create({4, 4}, fill::Uniform{-1, 1, 7});
    const auto u2 = create({4, 4}, fill::Uniform{-1, 1, 7});
    CHECK(bit_identical(u1, u2));
    for (float v : u1.data()) CHECK((v >= -1.0f && v < 1.0f));
    CHECK_FALSE(bit_identical(u1, create({4, 4}, fill::Uniform{-1, 1, 8})));
}

TEST_CASE("glorot fill respects the fan-based limit") {
    const auto w = create({3, 3, 64, 128}, fill::GlorotUniform{3});
    const double limit = std::sqrt(6.0 / (9.0 * 64 + 9.0 * 128));
    double sq = 0;
    for (float v : w.data()) {
        CHECK(std::abs(v) <= limit);
        sq += double(v) * v;
    }
    // Uniform(-l, l) has variance l^2/3.
    CHECK(sq / double(w.size()) == doctest::Approx(limit * limit / 3).epsilon(0.02));
}

TEST_CASE("invalid shapes are rejected") {
    CHECK_THROWS_AS(Tensor({0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor({1, 1, 1, 1, 1}), ShapeError);
    CHECK_THROWS_AS(Tensor(Shape{}), ShapeError);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
    CHECK_THROWS_AS(create({2, 0}, fill::Zeros{}), ShapeError);
}

TEST_CASE("matmul: identity and hand-computed product") {
    const Tensor eye({2, 2}, std::vector<float>{1, 0, 0, 1});
    const Tensor m({2, 2}, std::vector<float>{0.5f, -2, 3, 7.25f});
    CHECK(matmul(eye, m) == m);

    const Tensor a({2, 2}, std::vector<float>{1, 2, 3, 4});
    const Tensor ones({2, 1}, std::vector<float>{1, 1});
    CHECK(matmul(a, ones) == Tensor({2, 1}, std::vector<float>{3, 7}));

    CHECK_THROWS_AS(matmul(a, Tensor({3, 1})), ShapeError);
    CHECK_THROWS_AS(matmul(Tensor({2}), a), ShapeError);
}

TEST_CASE("matmul agrees with a triple-loop oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t m = 1 + rng.below(16), k = 1 + rng.below(16), n = 1 + rng.below(16);
        const auto a = create<float>({m, k}, fill::Uniform{-1, 1, rng.next()});
        const auto b = create<float>({k, n}, fill::Uniform{-1, 1, rng.next()});
        const auto got = matmul(a, b);
        const auto want = triple_loop(a.cast<double>(), b.cast<double>());
        for (std::size_t i = 0; i < got.size(); ++i) REQUIRE(std::abs(got[i] - want[i]) <= 1e-5);
    }
}

TEST_CASE("gemm transposition flags match explicit transposes") {
    const auto a = create<double>({5, 3}, fill::Uniform{-1, 1, 1});  // used as A^T (3x5)
    const auto b = create<double>({4, 5}, fill::Uniform{-1, 1, 2});  // used as B^T (5x4)
    Tensor64 c({3, 4});
    gemm(a.raw(), true, b.raw(), true, c.raw(), 3, 5, 4, false);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double s = 0;
            for (std::size_t k = 0; k < 5; ++k) s += a[k * 3 + i] * b[j * 5 + k];
            CHECK(c[i * 4 + j] == doctest::Approx(s));
        }
}

TEST_CASE("elementwise operations") {
    const auto t = create({3, 2}, fill::Uniform{-3, 3, 5});
    CHECK(elementwise(ElementOp::add, t, create({3, 2}, fill::Zeros{})) == t);
    CHECK(elementwise(ElementOp::mul, t, 1.0f) == t);
    CHECK(elementwise(ElementOp::max, Tensor({2}, std::vector<float>{-1, 2}), 0.0f) ==
          Tensor({2}, std::vector<float>{0, 2}));
    CHECK(elementwise(ElementOp::sub, t, t) == create({3, 2}, fill::Zeros{}));
    CHECK(elementwise(ElementOp::div, Tensor({2}, std::vector<float>{1, 3}), 2.0f) ==
          Tensor({2}, std::vector<float>{0.5f, 1.5f}));

    CHECK_THROWS_AS(elementwise(ElementOp::add, t, Tensor({2, 3})), ShapeError);
    CHECK_THROWS_AS(elementwise(ElementOp::div, t, 0.0f), NumericError);
    CHECK_THROWS_AS(elementwise(ElementOp::div, t, create({3, 2}, fill::Zeros{})), NumericError);
    CHECK_THROWS_AS(elementwise(ElementOp::mul, Tensor({1}, 3e38f), 10.0f), NumericError);
}

TEST_CASE("reshape round-trips bit-exactly") {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Shape s1{1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4)};
        const auto t = create(s1, fill::Uniform{-1, 1, rng.next()});
        const auto back = t.reshaped({t.size()}).reshaped({s1[0] * s1[1], s1[2] * s1[3]}).reshaped(s1);
        CHECK(bit_identical(t, back));
    }
    CHECK_THROWS_AS(Tensor({2, 3}).reshaped({4}), ShapeError);
}
