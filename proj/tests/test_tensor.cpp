#include <doctest.h>

#include <cmath>
#include <functional>

#include "charlab/tensor.hpp"

using namespace charlab;
using tensor::Tensor;
using T = Tensor<double>;

namespace {

T随 randn(tensor::Shape shape, Rng& rng, bool grad = true) { return T::randn(std::move(shape), rng, 1.0, grad); }

}  // namespace

TEST_CASE("softmax: symmetry, normalisation, mask") {
    const T x = T::from({1, 2}, {0.0, 0.0});
    const T y = tensor::softmax(x, 1);
    CHECK(y.values()[0] == doctest::Approx(0.5));
    CHECK(y.values()[1] == doctest::Approx(0.5));

    Rng rng(7);
    const T z = T::randn({5, 9}, rng);
    const T s = tensor::softmax(z, 1);
    for (int r = 0; r < 5; ++r) {
        double total = 0;
        for (int c = 0; c < 9; ++c) {
            const double v = s.values()[r * 9 + c];
            CHECK(v >= 0.0);
            total += v;
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }

    // additive mask zeroes the masked column
    T mask = T::zeros({2, 3});
    mask.values()[2] = -1e9;
    const T m = tensor::softmax(T::zeros({2, 3}), 1, mask);
    CHECK(m.values()[2] == doctest::Approx(0.0));
    CHECK(m.values()[0] == doctest::Approx(0.5));
}

TEST_CASE("layer_norm: zero mean, unit variance") {
    const T x = T::from({1, 3}, {1.0, 2.0, 3.0});
    const T g = T::full({3}, 1.0);
    const T b = T::zeros({3});
    const T y = tensor::layer_norm(x, g, b);
    double mean = 0, var = 0;
    for (const double v : y.values()) mean += v;
    mean /= 3;
    for (const double v : y.values()) var += (v - mean) * (v - mean);
    var /= 3;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("conv1d: length arithmetic") {
    Rng rng(3);
    // width 4, stride 4, length 2048 -> 512
    const T x = T::randn({2048, 3}, rng);
    const T w = T::randn({4, 3, 5}, rng);
    const T b = T::zeros({5});
    const T y = tensor::conv1d(x, w, b, 4);
    CHECK(y.dim(0) == 512);
    CHECK(y.dim(1) == 5);

    // same padding preserves length at stride 1; ceil(n/s) otherwise
    const T x2 = T::randn({37, 3}, rng);
    CHECK(tensor::conv1d(x2, w, b, 1).dim(0) == 37);
    CHECK(tensor::conv1d(x2, w, b, 2).dim(0) == 19);
    CHECK(tensor::conv1d(x2, w, b, 5).dim(0) == 8);
}

TEST_CASE("backward: linear case and gradient accumulation") {
    // loss = sum(w * x), x fixed -> grad(w) = x
    T w = T::from({3}, {1.0, -2.0, 0.5}, true);
    const T x = T::from({3}, {4.0, 5.0, 6.0});
    tensor::backward(tensor::sum(tensor::mul(w, x)));
    for (int i = 0; i < 3; ++i) CHECK(w.grad()[i] == doctest::Approx(x.values()[i]));

    // two uses of the same parameter accumulate both path contributions
    T p = T::from({1}, {3.0}, true);
    const T loss = tensor::add(tensor::mul(p, p), tensor::scale(p, 2.0));  // p^2 + 2p
    tensor::backward(tensor::sum(loss));
    CHECK(p.grad()[0] == doctest::Approx(2.0 * 3.0 + 2.0));
}

TEST_CASE("backward: rejects non-scalar loss") {
    T w = T::from({2}, {1.0, 2.0}, true);
    CHECK_THROWS_AS(tensor::backward(tensor::mul(w, w)), std::invalid_argument);
}

TEST_CASE("shape errors name the primitive") {
    const T a = T::zeros({2, 3});
    const T b = T::zeros({4, 5});
    CHECK_THROWS_WITH_AS(tensor::matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(tensor::add(a, b), doctest::Contains("add"), std::invalid_argument);
}

TEST_CASE("grad_check: quadratic") {
    T w = T::from({1}, {3.0}, true);
    Rng rng(11);
    const double err = tensor::grad_check<double>([&] { return tensor::mul(w, w); }, {w}, 1e-4, rng);
    CHECK(err < 1e-8);
}

TEST_CASE("grad_check: every primitive") {
    Rng rng(1234);
    // matmul with every transpose combination
    {
        T a = randn({3, 4}, rng);
        T b = randn({4, 5}, rng);
        T at = randn({4, 3}, rng);
        T bt = randn({5, 4}, rng);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::gelu(tensor::matmul(a, b))); }, {a, b},
                                         1e-5, rng) < 1e-6);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::gelu(tensor::matmul(at, b, true, false))); }, {at, b}, 1e-5,
                  rng) < 1e-6);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::gelu(tensor::matmul(a, bt, false, true))); }, {a, bt}, 1e-5,
                  rng) < 1e-6);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::gelu(tensor::matmul(at, bt, true, true))); }, {at, bt}, 1e-5,
                  rng) < 1e-6);
    }
    // bias add
    {
        T x = randn({4, 3}, rng);
        T b = randn({3}, rng);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::gelu(tensor::bias_add(x, b))); }, {x, b},
                                         1e-5, rng) < 1e-6);
    }
    // elementwise add / mul including broadcasts
    {
        T a = randn({3, 4}, rng);
        T b = randn({3, 4}, rng);
        T col = randn({3, 1}, rng);
        T s = randn({1}, rng);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::mul(tensor::add(a, b), b)); }, {a, b},
                                         1e-5, rng) < 1e-6);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::mul(col, a)); }, {col, a}, 1e-5, rng) <
              1e-6);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::add(s, tensor::mul(a, s))); }, {s, a},
                                         1e-5, rng) < 1e-6);
    }
    // gelu
    {
        T x = randn({5, 2}, rng);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::gelu(x)); }, {x}, 1e-5, rng) < 1e-6);
    }
    // softmax (with mask) over both axes
    {
        T x = randn({4, 6}, rng);
        T mask = T::zeros({4, 6});
        mask.values()[3] = -1e9;
        T probe = randn({4, 6}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::softmax(x, 1, mask), probe)); }, {x}, 1e-5, rng) <
              1e-6);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::mul(tensor::softmax(x, 0), probe)); },
                                         {x}, 1e-5, rng) < 1e-6);
    }
    // layer norm
    {
        T x = randn({4, 6}, rng);
        T g = randn({6}, rng);
        T b = randn({6}, rng);
        T probe = randn({4, 6}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::layer_norm(x, g, b), probe)); }, {x, g, b}, 1e-5,
                  rng) < 1e-6);
    }
    // conv1d, both strides and even/odd widths
    {
        T x = randn({12, 3}, rng);
        T w4 = randn({4, 3, 2}, rng);
        T w5 = randn({5, 3, 2}, rng);
        T b = randn({2}, rng);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::gelu(tensor::conv1d(x, w4, b, 4))); },
                                         {x, w4, b}, 1e-5, rng) < 1e-6);
        CHECK(tensor::grad_check<double>([&] { return tensor::sum(tensor::gelu(tensor::conv1d(x, w5, b, 1))); },
                                         {x, w5, b}, 1e-5, rng) < 1e-6);
    }
    // mean pool
    {
        T x = randn({10, 3}, rng);
        T probe = randn({3, 3}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::mean_pool1d(x, 4, 4), probe)); }, {x}, 1e-5, rng) <
              1e-6);
    }
    // gather and scatter-add
    {
        T table = randn({6, 3}, rng);
        const std::vector<int64_t> idx{0, 2, 2, 5};
        T probe = randn({4, 3}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::gather_rows(table, idx), probe)); }, {table}, 1e-5,
                  rng) < 1e-6);
        T src = randn({4, 3}, rng);
        T probe2 = randn({6, 3}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::scatter_add_rows(src, idx, 6), probe2)); }, {src},
                  1e-5, rng) < 1e-6);
    }
    // cross entropy
    {
        T logits = randn({5, 7}, rng);
        const std::vector<int64_t> targets{0, 3, 6, 2, 2};
        CHECK(tensor::grad_check<double>([&] { return tensor::cross_entropy(logits, targets); }, {logits}, 1e-5,
                                         rng) < 1e-6);
    }
    // concat / repeat / slice / reshape
    {
        T a = randn({3, 2}, rng);
        T b = randn({2, 2}, rng);
        T probe = randn({5, 2}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::concat<double>({a, b}, 0), probe)); }, {a, b}, 1e-5,
                  rng) < 1e-6);
        T c = randn({3, 4}, rng);
        T probe2 = randn({3, 8}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::repeat_interleave(c, 2, 1), probe2)); }, {c}, 1e-5,
                  rng) < 1e-6);
        T probe3 = randn({2, 2}, rng);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::slice(c, 1, 1, 2), tensor::slice(probe2, 1, 0, 2))); },
                  {c}, 1e-5, rng) < 1e-6);
        CHECK(tensor::grad_check<double>(
                  [&] { return tensor::sum(tensor::mul(tensor::reshape(c, {4, 3}), tensor::reshape(probe2, {4, 6})
                                                                                       , true /*unused*/)); },
                  {c}, 1e-5, rng) < 1e-6);
    }
    // dropout gradient flows through the kept mask (train mode, fixed seed)
    {
        T x = randn({40, 2}, rng);
        Rng drop_rng(5);
        tensor::EvalModeGuard eval_off(false);
        Rng check_rng(6);
        // deterministic closure: reset the dropout stream every call
        auto f = [&] {
            drop_rng.reseed(99);
            return tensor::sum(tensor::dropout(x, 0.8, drop_rng));
        };
        CHECK(tensor::grad_check<double>(f, {x}, 1e-5, check_rng) < 1e-6);
    }
}

TEST_CASE("dropout: identity in evaluation mode, inverted scaling otherwise") {
    Rng rng(21);
    T x = T::randn({50, 4}, rng);
    {
        tensor::EvalModeGuard guard(true);
        Rng d(1);
        const T y = tensor::dropout(x, 0.5, d);
        CHECK(y.node() == x.node());
    }
    tensor::EvalModeGuard guard(false);
    Rng d(1);
    const T y = tensor::dropout(x, 0.5, d);
    int zeros = 0;
    for (size_t i = 0; i < y.values().size(); ++i) {
        if (y.values()[i] == 0.0) ++zeros;
        else CHECK(y.values()[i] == doctest::Approx(x.values()[i] * 2.0));
    }
    CHECK(zeros > 40);
    CHECK(zeros < 160);
}

TEST_CASE("cross entropy: uniform logits give ln C") {
    const T logits = T::zeros({3, 11});
    const double loss = tensor::cross_entropy(logits, {0, 5, 10}).item();
    CHECK(loss == doctest::Approx(std::log(11.0)).epsilon(1e-9));
}

TEST_CASE("forward determinism: identical graphs bitwise") {
    auto build = [] {
        Rng rng(77);
        T a = T::randn({6, 6}, rng);
        T b = T::randn({6, 6}, rng);
        return tensor::softmax(tensor::matmul(tensor::gelu(a), b), 1);
    };
    const T y1 = build();
    const T y2 = build();
    REQUIRE(y1.values().size() == y2.values().size());
    for (size_t i = 0; i < y1.values().size(); ++i) CHECK(y1.values()[i] == y2.values()[i]);
}
