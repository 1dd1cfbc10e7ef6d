#include "doctest.h"

#include "../support/gradient_suite.hpp"
#include "../support/oracles.hpp"

#include "morphoreg/tensor/ops.hpp"

using namespace morphoreg;
using namespace morphoreg::tensor;
using morphoreg::testing::random_tensor;

TEST_CASE("conv3d identity kernel reproduces the input") {
    std::mt19937_64 rng(1);
    const auto x = random_tensor<float>({2, 1, 4, 5, 3}, rng);
    const auto y = conv3d(x, Tensor::full({1, 1, 1, 1, 1}, 1.0F), Tensor::zeros({1}), 1, 0);
    CHECK(y.shape() == x.shape());
    CHECK(y.values() == x.values());
}

TEST_CASE("conv3d with zero kernel emits the bias") {
    std::mt19937_64 rng(2);
    const auto x = random_tensor<float>({1, 2, 4, 4, 4}, rng);
    const auto y = conv3d(x, Tensor::zeros({3, 2, 3, 3, 3}), Tensor({3}, {0.5F, -1.0F, 2.0F}), 1, 1);
    REQUIRE(y.shape() == Shape{1, 3, 4, 4, 4});
    for (std::size_t o = 0; o < 3; ++o) {
        for (std::size_t i = 0; i < 64; ++i) {
            CHECK(y[o * 64 + i] == std::array{0.5F, -1.0F, 2.0F}[o]);
        }
    }
}

TEST_CASE("conv3d matches the naive seven-loop reference") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor<float>({1, 2, 6, 6, 6}, rng);
    const auto w = random_tensor<float>({3, 2, 3, 3, 3}, rng);
    const auto b = random_tensor<float>({3}, rng);
    const auto y = conv3d(x, w, b, 2, 1);
    CHECK(y.shape() == Shape{1, 3, 3, 3, 3});
    const auto want = testing::naive_conv3d(x, w, b, 2, 1);
    CHECK(testing::max_rel_error(y.data(), want, 1e-2) < 1e-5);

    // 64-bit storage is exact to rounding.
    auto widen = [](const Tensor& t) { return Tensor64(t.shape(), std::vector<double>(t.data().begin(), t.data().end())); };
    const auto y64 = conv3d(widen(x), widen(w), widen(b), 2, 1);
    CHECK(testing::max_rel_error(y64.data(), want, 1e-6) < 1e-12);
}

TEST_CASE("conv3d rejects mismatched channels naming both shapes") {
    const auto x = Tensor::zeros({1, 2, 4, 4, 4});
    const auto w = Tensor::zeros({1, 3, 3, 3, 3});
    try {
        (void)conv3d(x, w, Tensor::zeros({1}), 1, 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1,2,4,4,4]") != std::string::npos);
        CHECK(msg.find("[1,3,3,3,3]") != std::string::npos);
    }
    CHECK_THROWS_AS((void)conv3d(Tensor::zeros({1, 1, 2, 2, 2}), Tensor::zeros({1, 1, 5, 5, 5}), Tensor::zeros({1}), 1, 1),
                    ShapeError);
}

TEST_CASE("maxpool3d on constant input routes one gradient per window") {
    Tape tape;
    const auto x = tape.leaf(Tensor::full({1, 1, 4, 4, 4}, 2.0F));
    const auto y = maxpool3d(x, 2, 2);
    CHECK(y.shape() == Shape{1, 1, 2, 2, 2});
    for (auto v : y.data()) {
        CHECK(v == 2.0F);
    }
    const auto loss = mse_loss(y, Tensor::zeros(y.shape()));
    const auto g = tape.backward(loss).of(x);
    const auto nonzero = std::count_if(g.begin(), g.end(), [](float v) { return v != 0.0F; });
    CHECK(nonzero == 8);
}

TEST_CASE("maxpool3d spike appears in every window containing it") {
    std::vector<float> v(5 * 5 * 5, 0.1F);
    v[(2 * 5 + 2) * 5 + 2] = 9.0F;
    const auto y = maxpool3d(Tensor({1, 1, 5, 5, 5}, v), 2, 1);
    REQUIRE(y.shape() == Shape{1, 1, 4, 4, 4});
    for (std::size_t z = 0; z < 4; ++z) {
        for (std::size_t yy = 0; yy < 4; ++yy) {
            for (std::size_t x = 0; x < 4; ++x) {
                const bool covers = (z == 1 || z == 2) && (yy == 1 || yy == 2) && (x == 1 || x == 2);
                CHECK((y[(z * 4 + yy) * 4 + x] == 9.0F) == covers);
            }
        }
    }
}

TEST_CASE("maxpool3d matches the naive reference and rejects oversized windows") {
    std::mt19937_64 rng(4);
    const auto x = random_tensor<float>({1, 1, 4, 4, 4}, rng);
    const auto y = maxpool3d(x, 2, 2);
    CHECK(testing::max_rel_error(y.data(), testing::naive_maxpool3d(x, 2, 2)) == 0.0);
    CHECK_THROWS_AS((void)maxpool3d(Tensor::zeros({1, 1, 2, 4, 4}), 3, 1), ShapeError);
}

TEST_CASE("linear basics") {
    const auto x = Tensor({1, 2}, {3.0F, 4.0F});
    CHECK(linear(x, Tensor({2, 1}, {1.0F, 1.0F}), Tensor::zeros({1})).item() == 7.0F);

    std::vector<float> eye(9, 0.0F);
    eye[0] = eye[4] = eye[8] = 1.0F;
    std::mt19937_64 rng(5);
    const auto in = random_tensor<float>({2, 3}, rng);
    CHECK(linear(in, Tensor({3, 3}, eye), Tensor::zeros({3})).values() == in.values());

    const auto a = random_tensor<float>({4, 8}, rng);
    const auto w = random_tensor<float>({8, 3}, rng);
    const auto b = random_tensor<float>({3}, rng);
    CHECK(testing::max_rel_error(linear(a, w, b).data(), testing::naive_matmul(a, w, b), 1e-2) < 1e-5);
    CHECK_THROWS_AS((void)linear(a, Tensor::zeros({7, 3}), b), ShapeError);
}

TEST_CASE("relu, softmax and mse_loss") {
    CHECK(relu(Tensor({3}, {-1.0F, 0.0F, 2.0F})).values() == std::vector<float>{0.0F, 0.0F, 2.0F});

    const auto s = softmax(Tensor::full({4}, 0.3F), 0);
    for (auto v : s.data()) {
        CHECK(v == doctest::Approx(0.25).epsilon(1e-7));
    }
    CHECK_THROWS_AS((void)softmax(Tensor::zeros({2, 2}), 2), ShapeError);

    {
        Tape tape;
        const auto x = tape.leaf(Tensor({2}, {1.0F, 2.0F}));
        const auto loss = mse_loss(x, x);
        CHECK(loss.item() == 0.0F);
        for (auto g : tape.backward(loss).of(x)) {
            CHECK(g == 0.0F);
        }
    }
    {
        Tape tape;
        const auto pred = tape.leaf(Tensor({1, 2}, {1.0F, 2.0F}));
        const auto loss = mse_loss(pred, Tensor::zeros({1, 2}));
        CHECK(loss.item() == doctest::Approx(2.5));
        const auto g = tape.backward(loss).of(pred);
        CHECK(g == std::vector<float>{1.0F, 2.0F});
    }
    CHECK_THROWS_AS((void)mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), ShapeError);
}

TEST_CASE("softmax is shift invariant") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 50; ++trial) {
        const auto x = random_tensor<float>({3, 5}, rng, -3.0, 3.0);
        const float c = std::uniform_real_distribution<float>(-20.0F, 20.0F)(rng);
        std::vector<float> shifted(x.data().begin(), x.data().end());
        for (auto& v : shifted) {
            v += c;
        }
        const auto a = softmax(x, 1);
        const auto b = softmax(Tensor(x.shape(), shifted), 1);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(std::abs(a[i] - b[i]) <= 1e-6);
        }
    }
}

TEST_CASE("backward edge cases") {
    SUBCASE("constant loss leaves parameters at zero gradient") {
        Tape tape;
        const auto w = tape.leaf(Tensor::full({3}, 1.0F));
        const auto c = tape.leaf(Tensor({1}, {4.0F}));
        const auto g = tape.backward(c);
        CHECK(g.of(w) == std::vector<float>(3, 0.0F));
        CHECK_FALSE(g.reached(w));
    }
    SUBCASE("disconnected subgraph gets exactly zero") {
        Tape tape;
        const auto a = tape.leaf(Tensor({1, 2}, {1.0F, -2.0F}));
        const auto b = tape.leaf(Tensor({1, 2}, {0.5F, 3.0F}));
        const auto side = relu(b);
        (void)mse_loss(side, Tensor::zeros({1, 2}));
        const auto loss = mse_loss(relu(a), Tensor::zeros({1, 2}));
        const auto g = tape.backward(loss);
        CHECK(g.of(b) == std::vector<float>(2, 0.0F));
        CHECK(g.of(a)[0] != 0.0F);
    }
    SUBCASE("non-scalar loss is rejected") {
        Tape tape;
        const auto a = tape.leaf(Tensor::zeros({2}));
        CHECK_THROWS_AS((void)tape.backward(relu(a)), ShapeError);
    }
    SUBCASE("operands from two tapes are rejected") {
        Tape t1, t2;
        const auto a = t1.leaf(Tensor::zeros({2}));
        const auto b = t2.leaf(Tensor::zeros({2}));
        CHECK_THROWS_AS((void)add(a, b), std::logic_error);
    }
}

TEST_CASE("composite conv3d-relu-linear-mse gradients match finite differences in 32-bit") {
    // Channel 0 pre-activations stay well above zero and channel 1 well below, so the
    // eps=1e-3 stencil never straddles a relu kink while both branches are exercised.
    std::mt19937_64 rng(7);
    const auto x = random_tensor<float>({2, 1, 4, 4, 4}, rng, 0.5, 1.0);
    auto kernel = random_tensor<float>({2, 1, 3, 3, 3}, rng, 0.2, 1.0).values();
    for (std::size_t i = 27; i < 54; ++i) {
        kernel[i] = -kernel[i];
    }
    std::vector<Tensor> inputs{Tensor({2, 1, 3, 3, 3}, kernel), Tensor({2}, {0.1F, -0.1F}),
                               random_tensor<float>({2 * 64, 3}, rng, -0.2, 0.2), random_tensor<float>({3}, rng)};
    const testing::OpFn<float> f = [&](const std::vector<Tensor>& p) {
        const auto h = relu(conv3d(x, p[0], p[1], 1, 1));
        return linear(h.reshaped({2, 2 * 64}), p[2], p[3]);
    };
    const auto r = testing::grad_check<float>(f, inputs, rng, 1e-3, 1e-2, 1e-4, 256);
    INFO("worst rel " << r.worst_rel << " worst abs " << r.worst_abs << " of " << r.checked);
    CHECK(r.checked > 0);
    CHECK(r.failures == 0);
}

TEST_CASE("every op passes random-shape gradient checks") {
    for (const auto& op : testing::op_cases()) {
        CAPTURE(op.name);
        const auto r = testing::run_op_suite(op, 8, 1234);
        CHECK(r.r64.failures == 0);
        CHECK(r.r32.failures == 0);
    }
}

TEST_CASE("forward ops are deterministic and backward leaves forward values intact") {
    std::mt19937_64 rng(8);
    const auto x = random_tensor<float>({2, 3, 6, 5, 4}, rng);
    const auto w = random_tensor<float>({4, 3, 3, 3, 3}, rng);
    const auto b = random_tensor<float>({4}, rng);
    CHECK(conv3d(x, w, b, 2, 1).values() == conv3d(x, w, b, 2, 1).values());
    CHECK(maxpool3d(x, 2, 2).values() == maxpool3d(x, 2, 2).values());

    Tape tape;
    const auto wl = tape.leaf(w);
    const auto y = conv3d(x, wl, b, 1, 1);
    const auto before = y.values();
    const auto loss = mse_loss(relu(y), Tensor::zeros(y.shape()));
    (void)tape.backward(loss);
    (void)tape.backward(loss);
    CHECK(y.values() == before);
    CHECK(wl.values() == w.values());
}
