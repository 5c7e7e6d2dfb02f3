#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hazebridge/tensor.hpp"

using namespace hazebridge;

namespace {

Tensor make(const Shape& s, std::vector<real> v) { return Tensor::from_data(s, std::move(v)); }

// independent forward-only convolution for the conv2d oracle
std::vector<real> naive_conv(const std::vector<real>& x, int64_t B, int64_t Ci, int64_t H,
                             int64_t W, const std::vector<real>& w, int64_t Co, int64_t k,
                             const std::vector<real>& bias, int64_t stride, int64_t pad) {
    const int64_t Ho = (H + 2 * pad - k) / stride + 1;
    const int64_t Wo = (W + 2 * pad - k) / stride + 1;
    std::vector<real> out(B * Co * Ho * Wo, 0);
    for (int64_t b = 0; b < B; ++b)
        for (int64_t co = 0; co < Co; ++co)
            for (int64_t oy = 0; oy < Ho; ++oy)
                for (int64_t ox = 0; ox < Wo; ++ox) {
                    real acc = bias.empty() ? 0 : bias[co];
                    for (int64_t ci = 0; ci < Ci; ++ci)
                        for (int64_t ky = 0; ky < k; ++ky)
                            for (int64_t kx = 0; kx < k; ++kx) {
                                const int64_t iy = oy * stride - pad + ky;
                                const int64_t ix = ox * stride - pad + kx;
                                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                                acc += x[((b * Ci + ci) * H + iy) * W + ix] *
                                       w[((co * Ci + ci) * k + ky) * k + kx];
                            }
                    out[((b * Co + co) * Ho + oy) * Wo + ox] = acc;
                }
    return out;
}

}  // namespace

TEST_CASE("elementwise add and identity matmul") {
    Tensor a = make({2}, {1, 2});
    Tensor b = make({2}, {3, 4});
    Tensor c = add(a, b);
    CHECK(c.data()[0] == doctest::Approx(4));
    CHECK(c.data()[1] == doctest::Approx(6));

    Tensor eye = make({2, 2}, {1, 0, 0, 1});
    Tensor v = make({2, 1}, {5, -7});
    Tensor mv = matmul(eye, v);
    CHECK(mv.data()[0] == doctest::Approx(5));
    CHECK(mv.data()[1] == doctest::Approx(-7));
}

TEST_CASE("softmax of equal entries is uniform") {
    for (real c : {real(-3), real(0), real(41)}) {
        Tensor s = softmax(make({2}, {c, c}), 0);
        CHECK(s.data()[0] == doctest::Approx(0.5));
        CHECK(s.data()[1] == doctest::Approx(0.5));
    }
}

TEST_CASE("broadcasting follows right-aligned rules") {
    Tensor a = make({2, 1, 3}, {1, 2, 3, 4, 5, 6});
    Tensor b = make({2, 1}, {10, 20});
    Tensor c = a + b;  // -> [2,2,3]
    CHECK(c.shape() == Shape{2, 2, 3});
    CHECK(c.data()[0] == doctest::Approx(11));
    CHECK(c.data()[3] == doctest::Approx(21));
    CHECK(c.data()[6] == doctest::Approx(14));

    CHECK_THROWS_AS(add(make({3}, {1, 2, 3}), make({2}, {1, 2})), ShapeError);
    CHECK_THROWS_AS(matmul(make({2, 3}, std::vector<real>(6, 1)), make({2, 3}, std::vector<real>(6, 1))),
                    ShapeError);
}

TEST_CASE("backward of sum of squares") {
    Tensor x = make({2}, {1, 2});
    x.set_requires_grad(true);
    Tensor loss = sum(x * x);
    backward(loss);
    CHECK(x.grad()[0] == doctest::Approx(2));
    CHECK(x.grad()[1] == doctest::Approx(4));
}

TEST_CASE("backward on a constant graph writes nothing") {
    Tensor c = Tensor::scalar(3);
    Tensor loss = sum(c * c);
    backward(loss);  // no leaves require grad; a no-op
    CHECK_FALSE(loss.has_grad());
}

TEST_CASE("backward requires a scalar") {
    Tensor x = make({2}, {1, 2});
    x.set_requires_grad(true);
    CHECK_THROWS_AS(backward(x * x), ContractError);
}

TEST_CASE("gradient accumulation is k-fold on linear graphs") {
    Tensor x = make({3}, {1, -1, 2});
    x.set_requires_grad(true);
    Tensor y = x + x + x + x;  // k = 4
    backward(sum(y));
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(4));
}

TEST_CASE("grad_check closed-form cases") {
    Rng rng(11);
    Tensor x = Tensor::randn({5}, rng);
    // gradient of sum is all-ones: error ~ rounding
    CHECK(grad_check([](const Tensor& t) { return sum(t); }, x, real(1e-4)) < real(1e-9));
    // sum(exp(x)) at x = 0: analytic gradient 1
    Tensor zero = Tensor::zeros({1});
    CHECK(grad_check([](const Tensor& t) { return sum(exp(t)); }, zero, real(1e-4)) < real(1e-7));
}

TEST_CASE("random 3-layer MLP gradients match central differences") {
    Rng rng(3);
    Tensor w1 = Tensor::randn({4, 8}, rng);
    Tensor w2 = Tensor::randn({8, 8}, rng);
    Tensor w3 = Tensor::randn({8, 1}, rng);
    Tensor x = Tensor::randn({2, 4}, rng);
    auto f = [&](const Tensor& w) {
        Tensor h1 = tanh(matmul(x, reshape(w, {4, 8})));
        Tensor h2 = tanh(matmul(h1, w2));
        return sum(square(matmul(h2, w3)));
    };
    CHECK(grad_check(f, reshape(w1, {32}), real(1e-4)) < real(1e-4));

    auto g = [&](const Tensor& xin) {
        Tensor h1 = tanh(matmul(xin, w1));
        Tensor h2 = sigmoid(matmul(h1, w2));
        return mean(square(matmul(h2, w3)));
    };
    CHECK(grad_check(g, x, real(1e-4)) < real(1e-4));
}

TEST_CASE("elementary op gradients match finite differences") {
    Rng rng(17);
    const real eps = real(1e-4), tol = real(1e-4);
    Tensor pos = Tensor::uniform({6}, real(0.2), real(2), rng);
    Tensor any = Tensor::randn({6}, rng);

    CHECK(grad_check([](const Tensor& t) { return sum(exp(t)); }, any, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(log(t)); }, pos, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(sqrt(t)); }, pos, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(tanh(t)); }, any, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(sigmoid(t)); }, any, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(leaky_relu(t))); }, any, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(t) / (sum(t * t) + real(1))); }, any,
                     eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(softmax(t, 0))); }, any, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return mean(square(t - real(0.3))); }, any, eps) < tol);
}

TEST_CASE("reduction and indexing gradients") {
    Rng rng(23);
    const real eps = real(1e-4), tol = real(1e-4);
    Tensor m = Tensor::randn({3, 4}, rng);
    CHECK(grad_check([](const Tensor& t) { return sum(square(sum(t, 1))); }, m, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(mean(t, 0))); }, m, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(reduce_min(t, 1))); }, m, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(slice(t, 1, 1, 3))); }, m, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(transpose(t, 0, 1))); }, m, eps) <
          tol);
    CHECK(grad_check(
              [](const Tensor& t) { return sum(square(index_select(t, 0, {2, 0, 0}))); }, m,
              eps) < tol);
    CHECK(grad_check(
              [](const Tensor& t) {
                  return sum(square(concat({t, t * real(2)}, 1)));
              },
              m, eps) < tol);
}

TEST_CASE("matmul and bmm gradients") {
    Rng rng(29);
    const real eps = real(1e-4), tol = real(1e-4);
    Tensor a = Tensor::randn({3, 4}, rng);
    Tensor b = Tensor::randn({4, 2}, rng);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(matmul(t, b))); }, a, eps) < tol);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(matmul(a, t))); }, b, eps) < tol);

    Tensor ba = Tensor::randn({2, 3, 4}, rng);
    Tensor bb = Tensor::randn({2, 4, 2}, rng);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(bmm(t, bb))); }, ba, eps) < tol);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(bmm(ba, t))); }, bb, eps) < tol);
    // shared rank-2 weight across the batch
    CHECK(grad_check([&](const Tensor& t) { return sum(square(bmm(t, bb))); },
                     Tensor::randn({3, 4}, rng), eps) < tol);
}

TEST_CASE("conv2d matches the naive oracle and its gradients check out") {
    Rng rng(31);
    const int64_t B = 2, Ci = 3, H = 6, W = 6, Co = 4, k = 3;
    Tensor x = Tensor::randn({B, Ci, H, W}, rng);
    Tensor w = Tensor::randn({Co, Ci, k, k}, rng);
    Tensor bias = Tensor::randn({Co}, rng);

    for (int64_t stride : {1, 2}) {
        for (int64_t pad : {0, 1}) {
            Tensor y = conv2d(x, w, bias, stride, pad);
            auto expect =
                naive_conv(std::vector<real>(x.data().begin(), x.data().end()), B, Ci, H, W,
                           std::vector<real>(w.data().begin(), w.data().end()), Co, k,
                           std::vector<real>(bias.data().begin(), bias.data().end()), stride, pad);
            REQUIRE(y.numel() == static_cast<int64_t>(expect.size()));
            for (int64_t i = 0; i < y.numel(); ++i)
                CHECK(y.data()[i] == doctest::Approx(expect[i]).epsilon(1e-10));
        }
    }

    const real eps = real(1e-4), tol = real(1e-4);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(conv2d(t, w, bias, 1, 1))); }, x,
                     eps) < tol);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(conv2d(x, t, bias, 2, 1))); }, w,
                     eps) < tol);
    CHECK(grad_check([&](const Tensor& t) { return sum(square(conv2d(x, w, t, 1, 0))); }, bias,
                     eps) < tol);

    // conv == weights x im2col, the algebraic route
    Tensor col = detail::im2col(x, k, k, 1, 1);
    Tensor w2 = reshape(w, {Co, Ci * k * k});
    Tensor via_col = bmm(w2, col) + reshape(bias, {1, Co, 1});
    Tensor direct = conv2d(x, w, bias, 1, 1);
    auto vc = via_col.data();
    auto dc = direct.data();
    for (int64_t i = 0; i < direct.numel(); ++i)
        CHECK(vc[i] == doctest::Approx(dc[i]).epsilon(1e-12));
}

TEST_CASE("image op gradients: pad, pools, upsample") {
    Rng rng(37);
    const real eps = real(1e-4), tol = real(1e-4);
    Tensor x = Tensor::randn({2, 2, 5, 5}, rng);
    CHECK(grad_check(
              [](const Tensor& t) {
                  return sum(square(pad2d(t, 1, 2, 0, 1, PadMode::Zero)));
              },
              x, eps) < tol);
    CHECK(grad_check(
              [](const Tensor& t) {
                  return sum(square(pad2d(t, 2, 1, 1, 1, PadMode::Replicate)));
              },
              x, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(min_pool2d(t, 3))); }, x, eps) < tol);
    CHECK(grad_check([](const Tensor& t) { return sum(square(upsample_nearest2x(t))); }, x, eps) <
          tol);
    CHECK_THROWS_AS(min_pool2d(x, 4), ContractError);
}

TEST_CASE("checked mode traps domain violations and non-finite values") {
    CheckedModeGuard guard(true);
    Tensor neg = make({2}, {-1, 1});
    CHECK_THROWS_AS(log(neg), DomainError);
    CHECK_THROWS_AS(sqrt(neg), DomainError);
    Tensor zero = Tensor::zeros({1});
    CHECK_THROWS_AS(div(Tensor::ones({1}), zero), DomainError);  // inf output
}

TEST_CASE("no-grad mode keeps results off the tape") {
    Tensor x = make({2}, {1, 2});
    x.set_requires_grad(true);
    Tensor taped = x * x;
    CHECK(taped.has_tape());
    NoGradGuard ng;
    Tensor free = x * x;
    CHECK_FALSE(free.has_tape());
    CHECK_FALSE(free.requires_grad());
}

TEST_CASE("identical seeds give bit-identical forwards and gradients") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        Tensor x = Tensor::randn({4, 4}, rng);
        Tensor w = Tensor::randn({4, 4}, rng);
        w.set_requires_grad(true);
        Tensor loss = sum(square(tanh(matmul(x, w))));
        backward(loss);
        std::vector<real> out(w.grad().begin(), w.grad().end());
        out.push_back(loss.item());
        return out;
    };
    auto a = run(99), b = run(99);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);  // bitwise
}

TEST_CASE("tensor invariants: shape/data agreement and grad shape") {
    CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), ShapeError);
    Tensor x = make({2, 2}, {1, 2, 3, 4});
    x.set_requires_grad(true);
    backward(sum(x));
    CHECK(x.grad().size() == 4);
}
