// SPDX-FileCopyrightText: © 2026 The mixbit Authors
// SPDX-License-Identifier: Apache-2.0

#include "numerics/ops.hpp"

#include <algorithm>
#include <cmath>

#include "error.hpp"
#include "numerics/parallel.hpp"

namespace mixbit {

namespace {

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad)
{
    require(input.rank() == 4, ErrorKind::InvalidArgument, "conv2d: input must be NCHW, got " + shape_str(input.shape()));
    require(weight.rank() == 4, ErrorKind::InvalidArgument, "conv2d: weight must be OIHW, got " + shape_str(weight.shape()));
    require(input.dim(1) == weight.dim(1), ErrorKind::InvalidArgument,
            "conv2d: input channels " + std::to_string(input.dim(1)) + " != weight input channels "
                + std::to_string(weight.dim(1)));
    ConvGeometry g{input.dim(1), input.dim(2), input.dim(3), weight.dim(2), weight.dim(3), stride, pad};
    g.validate();
    return g;
}

// out[O x P] = w[O x S] * cols[S x P]
void gemm_nn(const double* w, const double* cols, double* out, std::size_t o, std::size_t s, std::size_t p)
{
    std::fill(out, out + o * p, 0.0);
    for (std::size_t i = 0; i < o; ++i) {
        double* orow = out + i * p;
        const double* wrow = w + i * s;
        for (std::size_t k = 0; k < s; ++k) {
            const double a = wrow[k];
            const double* crow = cols + k * p;
            for (std::size_t j = 0; j < p; ++j)
                orow[j] += a * crow[j];
        }
    }
}

// dw[O x S] += dout[O x P] * cols[S x P]^T
void gemm_nt_add(const double* dout, const double* cols, double* dw, std::size_t o, std::size_t s, std::size_t p)
{
    for (std::size_t i = 0; i < o; ++i) {
        const double* drow = dout + i * p;
        for (std::size_t k = 0; k < s; ++k) {
            const double* crow = cols + k * p;
            double acc = 0.0;
            for (std::size_t j = 0; j < p; ++j)
                acc += drow[j] * crow[j];
            dw[i * s + k] += acc;
        }
    }
}

// dcols[S x P] = w[O x S]^T * dout[O x P]
void gemm_tn(const double* w, const double* dout, double* dcols, std::size_t o, std::size_t s, std::size_t p)
{
    std::fill(dcols, dcols + s * p, 0.0);
    for (std::size_t i = 0; i < o; ++i) {
        const double* drow = dout + i * p;
        for (std::size_t k = 0; k < s; ++k) {
            const double a = w[i * s + k];
            double* crow = dcols + k * p;
            for (std::size_t j = 0; j < p; ++j)
                crow[j] += a * drow[j];
        }
    }
}

} // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, std::size_t stride, std::size_t pad)
{
    const auto g = conv_geometry(input, weight, stride, pad);
    const std::size_t n = input.dim(0), o = weight.dim(0);
    const std::size_t s = g.patch_size(), p = g.positions();
    Tensor out({n, o, g.out_h(), g.out_w()});
    const std::size_t in_stride = g.channels * g.height * g.width;
    parallel_for(n, [&](std::size_t b) {
        std::vector<double> cols(s * p);
        im2col(input.ptr() + b * in_stride, g, cols.data());
        gemm_nn(weight.ptr(), cols.data(), out.ptr() + b * o * p, o, s, p);
    });
    return out;
}

Var conv2d(Var input, Var weight, std::size_t stride, std::size_t pad)
{
    Tape& tape = *input.tape;
    Tensor out = conv2d_forward(input.value(), weight.value(), stride, pad);
    return tape.record("conv2d", std::move(out), {input, weight}, [&tape, input, weight, stride, pad](const Tensor& gout) {
        const Tensor& x = input.value();
        const Tensor& w = weight.value();
        const auto g = conv_geometry(x, w, stride, pad);
        const std::size_t n = x.dim(0), o = w.dim(0);
        const std::size_t s = g.patch_size(), p = g.positions();
        const std::size_t in_stride = g.channels * g.height * g.width;
        const bool need_x = tape.requires_grad(input);
        const bool need_w = tape.requires_grad(weight);
        Tensor dx = need_x ? Tensor::zeros_like(x) : Tensor{};
        Tensor dw = need_w ? Tensor::zeros_like(w) : Tensor{};
        // Images are processed in groups; per-image weight-gradient partials
        // are summed in image order, so the result is thread-count independent.
        const std::size_t group = static_cast<std::size_t>(std::max(1, thread_count()));
        std::vector<std::vector<double>> partial(need_w ? group : 0, std::vector<double>(o * s));
        for (std::size_t base = 0; base < n; base += group) {
            const std::size_t count = std::min(group, n - base);
            parallel_for(count, [&](std::size_t t) {
                const std::size_t b = base + t;
                std::vector<double> cols(s * p);
                im2col(x.ptr() + b * in_stride, g, cols.data());
                const double* dout = gout.ptr() + b * o * p;
                if (need_w) {
                    std::fill(partial[t].begin(), partial[t].end(), 0.0);
                    gemm_nt_add(dout, cols.data(), partial[t].data(), o, s, p);
                }
                if (need_x) {
                    gemm_tn(w.ptr(), dout, cols.data(), o, s, p);
                    col2im_add(cols.data(), g, dx.ptr() + b * in_stride);
                }
            });
            if (need_w)
                for (std::size_t t = 0; t < count; ++t)
                    for (std::size_t k = 0; k < o * s; ++k)
                        dw[k] += partial[t][k];
        }
        if (need_x)
            tape.accumulate(input, dx.data());
        if (need_w)
            tape.accumulate(weight, dw.data());
    });
}

Tensor dense_forward(const Tensor& input, const Tensor& weight, const Tensor& bias)
{
    require(input.rank() == 2 && weight.rank() == 2 && bias.rank() == 1, ErrorKind::InvalidArgument,
            "dense: expected N x F input, G x F weight, G bias");
    require(input.dim(1) == weight.dim(1) && bias.dim(0) == weight.dim(0), ErrorKind::InvalidArgument,
            "dense: shape mismatch " + shape_str(input.shape()) + " * " + shape_str(weight.shape()) + "^T + "
                + shape_str(bias.shape()));
    const std::size_t n = input.dim(0), f = input.dim(1), gdim = weight.dim(0);
    Tensor out({n, gdim});
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < gdim; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < f; ++k)
                acc += input[i * f + k] * weight[j * f + k];
            out[i * gdim + j] = acc + bias[j];
        }
    return out;
}

Var dense(Var input, Var weight, Var bias)
{
    Tape& tape = *input.tape;
    Tensor out = dense_forward(input.value(), weight.value(), bias.value());
    return tape.record("dense", std::move(out), {input, weight, bias}, [&tape, input, weight, bias](const Tensor& gout) {
        const Tensor& x = input.value();
        const Tensor& w = weight.value();
        const std::size_t n = x.dim(0), f = x.dim(1), gdim = w.dim(0);
        if (tape.requires_grad(input)) {
            Tensor dx = Tensor::zeros_like(x);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < gdim; ++j) {
                    const double gv = gout[i * gdim + j];
                    for (std::size_t k = 0; k < f; ++k)
                        dx[i * f + k] += gv * w[j * f + k];
                }
            tape.accumulate(input, dx.data());
        }
        if (tape.requires_grad(weight)) {
            Tensor dw = Tensor::zeros_like(w);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < gdim; ++j) {
                    const double gv = gout[i * gdim + j];
                    for (std::size_t k = 0; k < f; ++k)
                        dw[j * f + k] += gv * x[i * f + k];
                }
            tape.accumulate(weight, dw.data());
        }
        if (tape.requires_grad(bias)) {
            Tensor db({gdim});
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < gdim; ++j)
                    db[j] += gout[i * gdim + j];
            tape.accumulate(bias, db.data());
        }
    });
}

Var relu(Var input)
{
    Tape& tape = *input.tape;
    Tensor out = input.value();
    for (auto& v : out.data())
        v = v > 0.0 ? v : 0.0;
    return tape.record("relu", std::move(out), {input}, [&tape, input](const Tensor& gout) {
        const Tensor& x = input.value();
        Tensor dx = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < x.size(); ++i)
            dx[i] = x[i] > 0.0 ? gout[i] : 0.0;
        tape.accumulate(input, dx.data());
    });
}

Var add(Var a, Var b)
{
    require(a.value().same_shape(b.value()), ErrorKind::InvalidArgument,
            "add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    Tape& tape = *a.tape;
    Tensor out = a.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += b.value()[i];
    return tape.record("add", std::move(out), {a, b}, [&tape, a, b](const Tensor& gout) {
        tape.accumulate(a, gout.data());
        tape.accumulate(b, gout.data());
    });
}

Var batchnorm(Var input, Var gamma, Var beta, BatchNormState& state, bool training, double momentum, double eps)
{
    require(eps > 0.0, ErrorKind::InvalidArgument, "batchnorm: eps must be positive");
    const Tensor& x = input.value();
    require(x.rank() == 4, ErrorKind::InvalidArgument, "batchnorm: input must be NCHW");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    require(gamma.value().size() == c && beta.value().size() == c && state.running_mean.size() == c
                && state.running_var.size() == c,
            ErrorKind::InvalidArgument, "batchnorm: channel count mismatch");
    const std::size_t m = n * hw;

    Tensor mean({c}), invstd({c});
    if (training) {
        require(m > 1, ErrorKind::InvalidArgument, "batchnorm: training mode needs more than one value per channel");
        for (std::size_t ch = 0; ch < c; ++ch) {
            double sum = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t k = 0; k < hw; ++k)
                    sum += x[(b * c + ch) * hw + k];
            const double mu = sum / static_cast<double>(m);
            double sq = 0.0;
            for (std::size_t b = 0; b < n; ++b)
                for (std::size_t k = 0; k < hw; ++k) {
                    const double d = x[(b * c + ch) * hw + k] - mu;
                    sq += d * d;
                }
            const double var = sq / static_cast<double>(m);
            mean[ch] = mu;
            invstd[ch] = 1.0 / std::sqrt(var + eps);
            state.running_mean[ch] = (1.0 - momentum) * state.running_mean[ch] + momentum * mu;
            state.running_var[ch] =
                (1.0 - momentum) * state.running_var[ch] + momentum * sq / static_cast<double>(m - 1);
        }
    } else {
        for (std::size_t ch = 0; ch < c; ++ch) {
            mean[ch] = state.running_mean[ch];
            invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + eps);
        }
    }

    Tensor xhat = Tensor::zeros_like(x);
    Tensor out = Tensor::zeros_like(x);
    const Tensor& gm = gamma.value();
    const Tensor& bt = beta.value();
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t k = 0; k < hw; ++k) {
                const std::size_t i = (b * c + ch) * hw + k;
                xhat[i] = (x[i] - mean[ch]) * invstd[ch];
                out[i] = gm[ch] * xhat[i] + bt[ch];
            }

    Tape& tape = *input.tape;
    return tape.record("batchnorm", std::move(out), {input, gamma, beta},
                       [&tape, input, gamma, beta, xhat = std::move(xhat), invstd, training, n, c, hw,
                        m](const Tensor& gout) {
                           const Tensor& gm = gamma.value();
                           Tensor dgamma({c}), dbeta({c});
                           Tensor dx = Tensor::zeros_like(xhat);
                           for (std::size_t ch = 0; ch < c; ++ch) {
                               double sum_g = 0.0, sum_gx = 0.0;
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t k = 0; k < hw; ++k) {
                                       const std::size_t i = (b * c + ch) * hw + k;
                                       sum_g += gout[i];
                                       sum_gx += gout[i] * xhat[i];
                                   }
                               dgamma[ch] = sum_gx;
                               dbeta[ch] = sum_g;
                               const double scale = gm[ch] * invstd[ch];
                               const double md = static_cast<double>(m);
                               for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t k = 0; k < hw; ++k) {
                                       const std::size_t i = (b * c + ch) * hw + k;
                                       dx[i] = training ? scale * (gout[i] - sum_g / md - xhat[i] * sum_gx / md)
                                                        : scale * gout[i];
                                   }
                           }
                           tape.accumulate(input, dx.data());
                           tape.accumulate(gamma, dgamma.data());
                           tape.accumulate(beta, dbeta.data());
                       });
}

Tensor global_avg_pool_forward(const Tensor& input)
{
    require(input.rank() == 4, ErrorKind::InvalidArgument, "global_avg_pool: input must be NCHW");
    const std::size_t n = input.dim(0), c = input.dim(1), hw = input.dim(2) * input.dim(3);
    Tensor out({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        double sum = 0.0;
        for (std::size_t k = 0; k < hw; ++k)
            sum += input[i * hw + k];
        out[i] = sum / static_cast<double>(hw);
    }
    return out;
}

Var global_avg_pool(Var input)
{
    Tape& tape = *input.tape;
    Tensor out = global_avg_pool_forward(input.value());
    return tape.record("global_avg_pool", std::move(out), {input}, [&tape, input](const Tensor& gout) {
        const Tensor& x = input.value();
        const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
        Tensor dx = Tensor::zeros_like(x);
        for (std::size_t i = 0; i < nc; ++i)
            for (std::size_t k = 0; k < hw; ++k)
                dx[i * hw + k] = gout[i] / static_cast<double>(hw);
        tape.accumulate(input, dx.data());
    });
}

Var softmax_xent(Var logits, std::span<const std::int32_t> labels)
{
    const Tensor& z = logits.value();
    require(z.rank() == 2, ErrorKind::InvalidArgument, "softmax_xent: logits must be N x K");
    const std::size_t n = z.dim(0), k = z.dim(1);
    require(labels.size() == n, ErrorKind::InvalidArgument, "softmax_xent: label count mismatch");
    Tensor prob = Tensor::zeros_like(z);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        require(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < k, ErrorKind::InvalidArgument,
                "softmax_xent: label " + std::to_string(labels[i]) + " out of range [0," + std::to_string(k) + ")");
        double mx = z[i * k];
        for (std::size_t j = 1; j < k; ++j)
            mx = std::max(mx, z[i * k + j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            prob[i * k + j] = std::exp(z[i * k + j] - mx);
            sum += prob[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j)
            prob[i * k + j] /= sum;
        loss += (mx + std::log(sum)) - z[i * k + static_cast<std::size_t>(labels[i])];
    }
    loss /= static_cast<double>(n);
    Tape& tape = *logits.tape;
    std::vector<std::int32_t> lab(labels.begin(), labels.end());
    return tape.record("softmax_xent", Tensor({1}, {loss}), {logits},
                       [&tape, logits, prob = std::move(prob), lab = std::move(lab), n, k](const Tensor& gout) {
                           Tensor dz = prob;
                           for (std::size_t i = 0; i < n; ++i)
                               dz[i * k + static_cast<std::size_t>(lab[i])] -= 1.0;
                           const double f = gout[0] / static_cast<double>(n);
                           for (auto& v : dz.data())
                               v *= f;
                           tape.accumulate(logits, dz.data());
                       });
}

Var sum_squares(Var x)
{
    double s = 0.0;
    for (double v : x.value().data())
        s += v * v;
    Tape& tape = *x.tape;
    return tape.record("sum_squares", Tensor({1}, {s}), {x}, [&tape, x](const Tensor& gout) {
        Tensor dx = x.value();
        for (auto& v : dx.data())
            v *= 2.0 * gout[0];
        tape.accumulate(x, dx.data());
    });
}

Var dot_const(Var x, const Tensor& weights)
{
    require(x.value().size() == weights.size(), ErrorKind::InvalidArgument, "dot_const: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i)
        s += x.value()[i] * weights[i];
    Tape& tape = *x.tape;
    return tape.record("dot_const", Tensor({1}, {s}), {x}, [&tape, x, weights](const Tensor& gout) {
        Tensor dx = weights;
        for (auto& v : dx.data())
            v *= gout[0];
        tape.accumulate(x, dx.data());
    });
}

Var scale(Var x, double factor)
{
    Tensor out = x.value();
    for (auto& v : out.data())
        v *= factor;
    Tape& tape = *x.tape;
    return tape.record("scale", std::move(out), {x}, [&tape, x, factor](const Tensor& gout) {
        Tensor dx = gout;
        for (auto& v : dx.data())
            v *= factor;
        tape.accumulate(x, dx.data());
    });
}

} // namespace mixbit
