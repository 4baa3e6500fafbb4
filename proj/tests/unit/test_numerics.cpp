// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <numeric>

#include "error.hpp"
#include "numerics/gradcheck.hpp"
#include "numerics/im2col.hpp"
#include "numerics/ops.hpp"
#include "numerics/optim.hpp"
#include "numerics/parallel.hpp"
#include "numerics/tape.hpp"

using namespace mixbit;

namespace {

Tensor naive_conv(const Tensor& x, const Tensor& w, std::size_t stride, std::size_t pad)
{
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({n, o, oh, ow});
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t oc = 0; oc < o; ++oc)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    double acc = 0.0;
                    for (std::size_t ic = 0; ic < c; ++ic)
                        for (std::size_t i = 0; i < kh; ++i)
                            for (std::size_t j = 0; j < kw; ++j) {
                                const long iy = long(y * stride + i) - long(pad);
                                const long ix = long(xx * stride + j) - long(pad);
                                if (iy < 0 || ix < 0 || iy >= long(h) || ix >= long(wd))
                                    continue;
                                acc += x[((b * c + ic) * h + iy) * wd + ix] * w[((oc * c + ic) * kh + i) * kw + j];
                            }
                    out[((b * o + oc) * oh + y) * ow + xx] = acc;
                }
    return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    REQUIRE(a.same_shape(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace

TEST_CASE("conv2d: scalar examples")
{
    const Tensor ones({1, 1, 3, 3}, 1.0);
    const Tensor out = conv2d_forward(ones, ones, 1, 0);
    CHECK(out.shape() == Shape{1, 1, 1, 1});
    CHECK(out[0] == doctest::Approx(9.0));

    Rng rng(3);
    const Tensor x = randn({2, 1, 5, 4}, 1.0, rng);
    const Tensor id({1, 1, 1, 1}, 1.0);
    CHECK(max_abs_diff(conv2d_forward(x, id, 1, 0), x) == 0.0);
}

TEST_CASE("conv2d: matches a direct loop over random geometries")
{
    Rng rng(11);
    const Tensor x = randn({2, 3, 8, 8}, 1.0, rng);
    const Tensor w = randn({4, 3, 3, 3}, 1.0, rng);
    CHECK(max_abs_diff(conv2d_forward(x, w, 2, 1), naive_conv(x, w, 2, 1)) < 1e-6);

    for (int t = 0; t < 10; ++t) {
        std::uniform_int_distribution<std::size_t> d(1, 4);
        const std::size_t k = d(rng), stride = d(rng), pad = d(rng) - 1;
        const std::size_t hw = k + d(rng) + 2;
        const Tensor xi = randn({d(rng), d(rng), hw, hw + 1}, 1.0, rng);
        const Tensor wi = randn({d(rng), xi.dim(1), k, k}, 1.0, rng);
        CHECK(max_abs_diff(conv2d_forward(xi, wi, stride, pad), naive_conv(xi, wi, stride, pad)) < 1e-5);
    }
}

TEST_CASE("conv2d: output extent uses floor division")
{
    const Tensor x({1, 1, 6, 6}, 1.0);
    const Tensor w({1, 1, 3, 3}, 1.0);
    CHECK(conv2d_forward(x, w, 2, 0).shape() == Shape{1, 1, 2, 2});
    CHECK_THROWS_AS(conv2d_forward(Tensor({1, 2, 4, 4}), w, 1, 0), Error);
}

TEST_CASE("im2col and col2im are adjoint")
{
    Rng rng(5);
    ConvGeometry g{3, 5, 6, 3, 2, 2, 1};
    const std::size_t s = g.patch_size(), p = g.positions();
    const Tensor img = randn({3, 5, 6}, 1.0, rng);
    const Tensor cols = randn({s, p}, 1.0, rng);
    std::vector<double> lowered(s * p);
    im2col(img.ptr(), g, lowered.data());
    std::vector<double> lifted(img.size(), 0.0);
    col2im_add(cols.ptr(), g, lifted.data());
    double lhs = 0.0, rhs = 0.0;
    for (std::size_t i = 0; i < s * p; ++i)
        lhs += lowered[i] * cols[i];
    for (std::size_t i = 0; i < img.size(); ++i)
        rhs += img[i] * lifted[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("dense: examples and loop oracle")
{
    CHECK(dense_forward(Tensor({1, 2}, {1, 2}), Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2}, 0.0)).data()[1] == 2.0);
    CHECK(dense_forward(Tensor({1, 2}, {1, 1}), Tensor({1, 2}, {1, 1}), Tensor({1}, 1.0))[0] == 3.0);

    Rng rng(2);
    const Tensor x = randn({4, 10}, 1.0, rng), w = randn({3, 10}, 1.0, rng), b = randn({3}, 1.0, rng);
    const Tensor out = dense_forward(x, w, b);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = b[j];
            for (std::size_t k = 0; k < 10; ++k)
                acc += x[i * 10 + k] * w[j * 10 + k];
            CHECK(out[i * 3 + j] == doctest::Approx(acc).epsilon(1e-12));
        }
}

TEST_CASE("relu: values and kink gradient")
{
    Tape tape;
    Param x("x", Tensor({3}, {-1.0, 0.0, 2.0}));
    Var y = relu(tape.param(x));
    CHECK(y.value()[0] == 0.0);
    CHECK(y.value()[1] == 0.0);
    CHECK(y.value()[2] == 2.0);
    tape.backward(dot_const(y, Tensor({3}, 1.0)));
    CHECK(x.grad[0] == 0.0);
    CHECK(x.grad[1] == 0.0);
    CHECK(x.grad[2] == 1.0);
}

TEST_CASE("batchnorm: training statistics and eval affine")
{
    Rng rng(8);
    Param x("x", randn({4, 2, 3, 3}, 2.0, rng));
    Param gamma("g", Tensor({2}, 1.0)), beta("b", Tensor({2}, 0.0));
    BatchNormState st{Tensor({2}, 0.0), Tensor({2}, 1.0)};
    Tape tape;
    const Tensor y = batchnorm(tape.param(x), tape.param(gamma), tape.param(beta), st, true).value();
    for (std::size_t c = 0; c < 2; ++c) {
        double mean = 0.0, sq = 0.0;
        std::size_t n = 0;
        for (std::size_t b = 0; b < 4; ++b)
            for (std::size_t k = 0; k < 9; ++k) {
                const double v = y[(b * 2 + c) * 9 + k];
                mean += v;
                sq += v * v;
                ++n;
            }
        mean /= double(n);
        CHECK(std::abs(mean) < 1e-6);
        CHECK(std::abs(sq / double(n) - mean * mean - 1.0) < 1e-4);
    }

    Param g2("g", Tensor({2}, 2.0)), b2("b", Tensor({2}, 1.0));
    BatchNormState eval{Tensor({2}, 0.0), Tensor({2}, 1.0)};
    Tape t2;
    const Tensor z = batchnorm(t2.param(x), t2.param(g2), t2.param(b2), eval, false).value();
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(z[i] == doctest::Approx(2.0 * x.value[i] / std::sqrt(1.0 + 1e-5) + 1.0).epsilon(1e-12));
}

TEST_CASE("global average pool and cross entropy")
{
    Tape tape;
    Var c = tape.constant(Tensor({2, 3, 4, 4}, 0.75));
    const Tensor pooled = global_avg_pool(c).value();
    CHECK(pooled.shape() == Shape{2, 3});
    for (double v : pooled.data())
        CHECK(v == doctest::Approx(0.75));

    const std::vector<std::int32_t> labels = {3, 7};
    CHECK(softmax_xent(tape.constant(Tensor({2, 10}, 0.4)), labels).value()[0]
          == doctest::Approx(std::log(10.0)).epsilon(1e-12));
    Tensor sharp({1, 4}, 0.0);
    sharp[2] = 50.0;
    const std::vector<std::int32_t> l2 = {2};
    CHECK(softmax_xent(tape.constant(sharp), l2).value()[0] < 1e-10);

    Rng rng(4);
    const Tensor logits = randn({3, 4}, 2.0, rng);
    const std::vector<std::int32_t> l3 = {0, 3, 1};
    double ref = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        double m = -1e300;
        for (std::size_t k = 0; k < 4; ++k)
            m = std::max(m, logits[i * 4 + k]);
        double s = 0.0;
        for (std::size_t k = 0; k < 4; ++k)
            s += std::exp(logits[i * 4 + k] - m);
        ref += m + std::log(s) - logits[i * 4 + std::size_t(l3[i])];
    }
    CHECK(softmax_xent(tape.constant(logits), l3).value()[0] == doctest::Approx(ref / 3.0).epsilon(1e-12));
}

TEST_CASE("backward of every op matches central differences")
{
    Rng rng(21);
    Param x("x", randn({2, 3, 5, 5}, 1.0, rng));
    Param w("w", randn({4, 3, 3, 3}, 0.5, rng));
    Param gamma("gamma", uniform({4}, 0.5, 1.5, rng));
    Param beta("beta", randn({4}, 0.3, rng));
    Param fw("fw", randn({3, 4}, 0.5, rng));
    Param fb("fb", randn({3}, 0.5, rng));
    const std::vector<std::int32_t> labels = {1, 2};
    const Tensor head = randn({2, 4, 3, 3}, 1.0, rng);

    const ScalarFn fn = [&](Tape& t) {
        BatchNormState st{Tensor({4}, 0.0), Tensor({4}, 1.0)};
        Var h = conv2d(t.param(x), t.param(w), 2, 1);
        h = batchnorm(h, t.param(gamma), t.param(beta), st, true);
        Var skip = scale(h, 0.5);
        h = add(h, skip);
        Var pooled = global_avg_pool(h);
        Var logits = dense(pooled, t.param(fw), t.param(fb));
        return add(softmax_xent(logits, labels), scale(dot_const(h, head), 0.01));
    };
    for (Param* p : {&x, &w, &gamma, &beta, &fw, &fb})
        CHECK(finite_diff_check(fn, *p, 1e-5) < 1e-4);

    Param r("r", Tensor({4}, {-1.3, 0.7, 2.1, -0.4}));
    const ScalarFn rfn = [&](Tape& t) { return sum_squares(relu(t.param(r))); };
    CHECK(finite_diff_check(rfn, r, 1e-5) < 1e-4);
}

TEST_CASE("finite_diff_check: known derivatives")
{
    Param x("x", Tensor({2}, {1.0, 2.0}));
    const ScalarFn sq = [&](Tape& t) { return sum_squares(t.param(x)); };
    CHECK(finite_diff_check(sq, x, 1e-4) < 1e-6);
    const ScalarFn constant = [&](Tape& t) {
        t.param(x);
        return t.constant(Tensor({1}, 3.0));
    };
    CHECK(finite_diff_check(constant, x, 1e-4) < 1e-6);
}

TEST_CASE("sgd and adam follow their scalar recurrences")
{
    Param p("p", Tensor({1}, 1.0));
    p.grad[0] = 1.0;
    sgd_momentum_step(p, 0.1, 0.0, 0.0);
    CHECK(p.value[0] == doctest::Approx(0.9));

    Param z("z", Tensor({1}, 1.0));
    sgd_momentum_step(z, 0.1, 0.9, 0.0);
    CHECK(z.value[0] == 1.0);

    Param m("m", Tensor({1}, 1.0));
    double v = 0.0, val = 1.0;
    for (int i = 0; i < 2; ++i) {
        m.grad[0] = 0.5 + i;
        sgd_momentum_step(m, 0.1, 0.9, 0.0);
        v = 0.9 * v + (0.5 + i);
        val -= 0.1 * v;
    }
    CHECK(m.value[0] == doctest::Approx(val).epsilon(1e-12));

    Param a("a", Tensor({1}, 0.0));
    a.grad[0] = 1.0;
    adam_step(a, 0.02);
    CHECK(a.value[0] == doctest::Approx(-0.02).epsilon(1e-6));

    Param still("s", Tensor({1}, 0.3));
    adam_step(still, 0.02);
    CHECK(still.value[0] == 0.3);

    Param c("c", Tensor({1}, 0.0));
    double m1 = 0.0, m2 = 0.0, cv = 0.0;
    for (int t = 1; t <= 5; ++t) {
        c.grad[0] = 0.7;
        adam_step(c, 0.01);
        m1 = 0.9 * m1 + 0.1 * 0.7;
        m2 = 0.999 * m2 + 0.001 * 0.49;
        const double mh = m1 / (1.0 - std::pow(0.9, t)), vh = m2 / (1.0 - std::pow(0.999, t));
        cv -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    CHECK(std::abs(c.value[0] - cv) < 1e-9);

    CHECK(cosine_lr(0.1, 0, 10) == doctest::Approx(0.1));
    CHECK(cosine_lr(0.1, 5, 10) == doctest::Approx(0.05));
}

TEST_CASE("parallel conv is bit-identical across thread counts")
{
    Rng rng(9);
    const Tensor x = randn({6, 3, 9, 9}, 1.0, rng);
    const Tensor w = randn({5, 3, 3, 3}, 1.0, rng);
    set_thread_count(1);
    const Tensor one = conv2d_forward(x, w, 1, 1);
    set_thread_count(3);
    const Tensor three = conv2d_forward(x, w, 1, 1);
    set_thread_count(1);
    CHECK(max_abs_diff(one, three) == 0.0);
}

TEST_CASE("tensor validation")
{
    CHECK_THROWS_AS(Tensor({2, 0}), Error);
    CHECK_THROWS_AS(Tensor({2, 2}, std::vector<double>{1, 2, 3}), Error);
    Tensor t({2}, 0.0);
    t[1] = std::nan("");
    CHECK_THROWS_AS(t.check_finite("t"), Error);
}
