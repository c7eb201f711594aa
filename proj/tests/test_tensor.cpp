#include <catch2/catch.hpp>

#include <cmath>

#include "ticap/gradcheck.hpp"
#include "ticap/tensor.hpp"

using namespace ticap;
using T = double;

TEST_CASE("matmul identity and hand products", "[tensor]") {
    auto I2 = Tensor<T>::constant({2, 2}, {1, 0, 0, 1});
    auto v = Tensor<T>::constant({2, 1}, {5, 6});
    auto r = matmul(I2, v);
    CHECK(r.value() == std::vector<T>{5, 6});

    auto a = Tensor<T>::constant({2, 2}, {1, 2, 3, 4});
    auto r2 = matmul(a, v);
    CHECK(r2.value() == std::vector<T>{17, 39});

    auto z = Tensor<T>::zeros({2, 3});
    auto r3 = matmul(a, z);
    for (T x : r3.value()) CHECK(x == 0.0);
}

TEST_CASE("matmul rejects mismatched inner extents", "[tensor]") {
    auto a = Tensor<T>::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    auto b = Tensor<T>::constant({2, 2}, {1, 2, 3, 4});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
    CHECK_THROWS_AS(matmul(b, Tensor<T>::constant({3}, {1, 2, 3})), ShapeError);
}

TEST_CASE("elementwise activation fixed points", "[tensor]") {
    auto z = Tensor<T>::zeros({1});
    CHECK(sigmoid(z).item() == Approx(0.5));
    CHECK(tanh_op(z).item() == 0.0);
    CHECK(relu(Tensor<T>::scalar(-3)).item() == 0.0);
    CHECK(relu(Tensor<T>::scalar(3)).item() == 3.0);
}

TEST_CASE("broadcast add and mul", "[tensor]") {
    auto m = Tensor<T>::constant({2, 3}, {1, 2, 3, 4, 5, 6});
    auto row = Tensor<T>::constant({3}, {10, 20, 30});
    auto s = add(m, row);
    CHECK(s.value() == std::vector<T>{11, 22, 33, 14, 25, 36});
    auto p = mul(m, row);
    CHECK(p.value() == std::vector<T>{10, 40, 90, 40, 100, 180});
    CHECK_THROWS_AS(add(m, Tensor<T>::constant({2}, {1, 2})), ShapeError);
}

TEST_CASE("softmax symmetry, hand value, stabilization", "[tensor]") {
    auto half = softmax_axis(Tensor<T>::constant({2}, {0, 0}), 0);
    CHECK(half.value()[0] == Approx(0.5).margin(1e-12));

    auto h = softmax_axis(Tensor<T>::constant({2}, {1, 0}), 0);
    const double e = std::exp(1.0);
    CHECK(h.value()[0] == Approx(e / (e + 1)).epsilon(1e-10));
    CHECK(h.value()[1] == Approx(1 / (e + 1)).epsilon(1e-10));

    auto big = softmax_axis(Tensor<T>::constant({2}, {1000, 0}), 0);
    CHECK(std::isfinite(big.value()[0]));
    CHECK(big.value()[0] == Approx(1.0));
    CHECK(big.value()[1] == Approx(0.0).margin(1e-12));
}

TEST_CASE("softmax rows sum to one on random tensors", "[tensor]") {
    Rng rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t r = 1 + rng.below(5), c = 1 + rng.below(6);
        std::vector<T> v(r * c);
        for (T& x : v) x = rng.uniform(-30, 30);
        const std::size_t axis = rng.below(2);
        auto sm = softmax_axis(Tensor<T>::constant({r, c}, v), axis);
        const std::size_t outer = axis == 0 ? c : r;
        const std::size_t extent = axis == 0 ? r : c;
        for (std::size_t o = 0; o < outer; ++o) {
            double sum = 0;
            for (std::size_t e = 0; e < extent; ++e)
                sum += axis == 0 ? sm.value()[e * c + o] : sm.value()[o * c + e];
            CHECK(sum == Approx(1.0).margin(1e-9));
        }
    }
}

TEST_CASE("backward of x*x and reuse of one leaf", "[tensor]") {
    auto x = Tensor<T>::param({1}, {3});
    auto y = mul(x, x);
    x.zero_grad();
    backward(y);
    CHECK(x.grad()[0] == Approx(6.0));

    // diamond: f = x*x + x, df/dx = 2x + 1
    auto f = add(mul(x, x), x);
    x.zero_grad();
    backward(f);
    CHECK(x.grad()[0] == Approx(7.0));
}

TEST_CASE("leaf off the loss path keeps a zero gradient", "[tensor]") {
    auto x = Tensor<T>::param({1}, {2});
    auto unused = Tensor<T>::param({1}, {5});
    auto loss = mul(x, x);
    x.zero_grad();
    unused.zero_grad();
    backward(loss);
    CHECK(unused.grad()[0] == 0.0);
}

TEST_CASE("backward demands a scalar loss", "[tensor]") {
    auto x = Tensor<T>::param({2}, {1, 2});
    auto y = add(x, x);
    CHECK_THROWS_AS(backward(y), ValueError);
}

TEST_CASE("an op producing non-finite values aborts", "[tensor]") {
    auto huge = Tensor<T>::constant({1, 1}, {1e308});
    auto ten = Tensor<T>::constant({1, 1}, {10.0});
    CHECK_THROWS_AS(matmul(huge, ten), NumericError);
}

TEST_CASE("concat along the last axis", "[tensor]") {
    auto a = Tensor<T>::constant({2, 2}, {1, 2, 3, 4});
    auto b = Tensor<T>::constant({2, 3}, {5, 6, 7, 8, 9, 10});
    auto c = concat_last<T>({a, b});
    CHECK(c.shape() == Shape{2, 5});
    CHECK(c.value() == std::vector<T>{1, 2, 5, 6, 7, 3, 4, 8, 9, 10});
    CHECK_THROWS_AS(concat_last<T>({a, Tensor<T>::constant({3, 1}, {1, 2, 3})}), ShapeError);
}

TEST_CASE("reshape guards numel", "[tensor]") {
    auto a = Tensor<T>::param({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
    CHECK(flatten(a).shape() == Shape{6});
}

TEST_CASE("seeded op sequences replay bit-identically", "[tensor]") {
    auto run = [] {
        Rng rng(99);
        auto a = Tensor<T>::param_uniform({4, 4}, -1, 1, rng);
        auto b = Tensor<T>::param_uniform({4, 4}, -1, 1, rng);
        auto y = softmax_axis(matmul(sigmoid(a), tanh_op(b)), 1);
        return y.value();
    };
    auto v1 = run();
    auto v2 = run();
    CHECK(std::equal(v1.begin(), v1.end(), v2.begin(), [](T x, T y) { return x == y; }));
}

TEST_CASE("composite graphs match central differences over 100 trials", "[tensor]") {
    GradChecker checker;
    Rng rng(1234);
    double worst = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t m = 2 + rng.below(3), k = 2 + rng.below(3);
        auto a = detail::random_tensor({m, k}, rng);
        auto b = detail::random_tensor({k, m}, rng);
        auto c = detail::random_tensor({m}, rng);
        auto loss_fn = [&] {
            auto h = tanh_op(matmul(a, b));          // [m x m]
            auto s = softmax_axis(h, 1);
            auto v = sigmoid(add(matmul(s, c), c));  // [m]
            return matmul(reshape(mul(v, v), {1, m}), Tensor<T>::ones({m}));
        };
        worst = std::max(worst, checker.check(loss_fn, {a, b, c}, rng, 3));
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("gradtape pulls each node exactly once in a shared subgraph", "[tensor]") {
    // y = u + u with u = 2x; dy/dx must be 4 (not 8 from a double pull)
    auto x = Tensor<T>::param({1}, {1.5});
    auto u = scale(x, T(2));
    auto y = add(u, u);
    x.zero_grad();
    backward(y);
    CHECK(x.grad()[0] == Approx(4.0));
}
