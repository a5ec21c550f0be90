#include "elc/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "elc/errors.hpp"

namespace elc::ops {

namespace {

void check_conv_shapes(const Tensor4& input, size_t weight_len, size_t bias_len,
                       const ConvSpec& spec, std::string_view layer_name) {
    std::string name(layer_name);
    if (spec.out_ch <= 0 || spec.in_ch <= 0 || spec.kh <= 0 || spec.kw <= 0)
        throw ShapeError(name + ": non-positive kernel spec");
    if (spec.kh % 2 == 0 || spec.kw % 2 == 0)
        throw ShapeError(name + ": kernel must be odd for size-preserving padding, got " +
                         std::to_string(spec.kh) + "x" + std::to_string(spec.kw));
    if (input.shape.c != spec.in_ch)
        throw ShapeError(name + ": input has " + std::to_string(input.shape.c) +
                         " channels, layer expects " + std::to_string(spec.in_ch));
    if (static_cast<int64_t>(weight_len) != spec.weight_count())
        throw ShapeError(name + ": weight tensor length " + std::to_string(weight_len) +
                         " does not match spec " + std::to_string(spec.weight_count()));
    if (static_cast<int64_t>(bias_len) != spec.out_ch)
        throw ShapeError(name + ": bias length " + std::to_string(bias_len) +
                         " does not match out_ch " + std::to_string(spec.out_ch));
}

// Copies plane (H x W) into the middle of a zeroed (H+kh-1) x (W+kw-1)
// buffer so the convolution loops need no bounds checks.
void pad_plane(const double* src, int64_t h, int64_t w, int ph, int pw,
               double* dst, int64_t dw) {
    for (int64_t y = 0; y < h; ++y) {
        double* drow = dst + (y + ph) * dw + pw;
        const double* srow = src + y * w;
        std::copy(srow, srow + w, drow);
    }
}

} // namespace

Tensor4 conv2d(const Tensor4& input, std::span<const double> weights,
               std::span<const double> bias, const ConvSpec& spec,
               std::string_view layer_name) {
    check_conv_shapes(input, weights.size(), bias.size(), spec, layer_name);

    const int64_t n = input.shape.n, h = input.shape.h, w = input.shape.w;
    const int ph = (spec.kh - 1) / 2, pw = (spec.kw - 1) / 2;
    const int64_t pad_h = h + spec.kh - 1, pad_w = w + spec.kw - 1;

    Tensor4 out(Shape4{n, spec.out_ch, h, w});
    std::vector<double> padded(static_cast<size_t>(spec.in_ch) * pad_h * pad_w, 0.0);

    for (int64_t b = 0; b < n; ++b) {
        for (int ic = 0; ic < spec.in_ch; ++ic)
            pad_plane(input.plane(b, ic), h, w, ph, pw,
                      padded.data() + size_t(ic) * pad_h * pad_w, pad_w);

        for (int oc = 0; oc < spec.out_ch; ++oc) {
            double* op = out.plane(b, oc);
            const double bv = bias[size_t(oc)];
            for (int64_t i = 0; i < h * w; ++i) op[i] = bv;

            for (int ic = 0; ic < spec.in_ch; ++ic) {
                const double* pin = padded.data() + size_t(ic) * pad_h * pad_w;
                const double* wk = weights.data() +
                                   (size_t(oc) * spec.in_ch + ic) * spec.kh * spec.kw;
                for (int ky = 0; ky < spec.kh; ++ky) {
                    for (int kx = 0; kx < spec.kw; ++kx) {
                        const double wv = wk[ky * spec.kw + kx];
                        for (int64_t y = 0; y < h; ++y) {
                            const double* prow = pin + (y + ky) * pad_w + kx;
                            double* orow = op + y * w;
                            for (int64_t x = 0; x < w; ++x) orow[x] += wv * prow[x];
                        }
                    }
                }
            }
        }
    }
    return out;
}

void conv2d_backward(const Tensor4& input, std::span<const double> weights,
                     const ConvSpec& spec, const Tensor4& grad_out,
                     Tensor4* grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias, std::string_view layer_name) {
    check_conv_shapes(input, weights.size(), size_t(spec.out_ch), spec, layer_name);
    std::string name(layer_name);
    Shape4 want{input.shape.n, spec.out_ch, input.shape.h, input.shape.w};
    if (grad_out.shape != want)
        throw ShapeError(name + ": grad_out shape " + grad_out.shape.str() +
                         " does not match " + want.str());
    if (!grad_weights.empty() && static_cast<int64_t>(grad_weights.size()) != spec.weight_count())
        throw ShapeError(name + ": grad_weights length mismatch");
    if (!grad_bias.empty() && static_cast<int64_t>(grad_bias.size()) != spec.out_ch)
        throw ShapeError(name + ": grad_bias length mismatch");

    const int64_t n = input.shape.n, h = input.shape.h, w = input.shape.w;
    const int ph = (spec.kh - 1) / 2, pw = (spec.kw - 1) / 2;
    const int64_t pad_h = h + spec.kh - 1, pad_w = w + spec.kw - 1;

    if (grad_input) *grad_input = Tensor4(input.shape);

    std::vector<double> pad_go;   // padded grad_out planes, for grad_input
    std::vector<double> pad_in;   // padded input planes, for grad_weights
    if (grad_input) pad_go.assign(size_t(spec.out_ch) * pad_h * pad_w, 0.0);
    if (!grad_weights.empty()) pad_in.assign(size_t(spec.in_ch) * pad_h * pad_w, 0.0);

    for (int64_t b = 0; b < n; ++b) {
        if (grad_input)
            for (int oc = 0; oc < spec.out_ch; ++oc)
                pad_plane(grad_out.plane(b, oc), h, w, ph, pw,
                          pad_go.data() + size_t(oc) * pad_h * pad_w, pad_w);
        if (!grad_weights.empty())
            for (int ic = 0; ic < spec.in_ch; ++ic)
                pad_plane(input.plane(b, ic), h, w, ph, pw,
                          pad_in.data() + size_t(ic) * pad_h * pad_w, pad_w);

        if (!grad_bias.empty()) {
            for (int oc = 0; oc < spec.out_ch; ++oc) {
                const double* go = grad_out.plane(b, oc);
                double s = 0.0;
                for (int64_t i = 0; i < h * w; ++i) s += go[i];
                grad_bias[size_t(oc)] += s;
            }
        }

        if (grad_input) {
            // d in(ic,y,x) = sum_{oc,ky,kx} go(oc, y - ky + ph, x - kx + pw) * w(oc,ic,ky,kx)
            // which is a same-pad convolution of go with the kernel flipped in (ky,kx).
            for (int ic = 0; ic < spec.in_ch; ++ic) {
                double* gi = grad_input->plane(b, ic);
                for (int oc = 0; oc < spec.out_ch; ++oc) {
                    const double* pgo = pad_go.data() + size_t(oc) * pad_h * pad_w;
                    const double* wk = weights.data() +
                                       (size_t(oc) * spec.in_ch + ic) * spec.kh * spec.kw;
                    for (int ky = 0; ky < spec.kh; ++ky) {
                        for (int kx = 0; kx < spec.kw; ++kx) {
                            const double wv = wk[(spec.kh - 1 - ky) * spec.kw + (spec.kw - 1 - kx)];
                            for (int64_t y = 0; y < h; ++y) {
                                const double* prow = pgo + (y + ky) * pad_w + kx;
                                double* grow = gi + y * w;
                                for (int64_t x = 0; x < w; ++x) grow[x] += wv * prow[x];
                            }
                        }
                    }
                }
            }
        }

        if (!grad_weights.empty()) {
            // d w(oc,ic,ky,kx) = sum_{y,x} go(oc,y,x) * in(ic, y+ky-ph, x+kx-pw)
            for (int oc = 0; oc < spec.out_ch; ++oc) {
                const double* go = grad_out.plane(b, oc);
                for (int ic = 0; ic < spec.in_ch; ++ic) {
                    const double* pin = pad_in.data() + size_t(ic) * pad_h * pad_w;
                    double* gw = grad_weights.data() +
                                 (size_t(oc) * spec.in_ch + ic) * spec.kh * spec.kw;
                    for (int ky = 0; ky < spec.kh; ++ky) {
                        for (int kx = 0; kx < spec.kw; ++kx) {
                            double s = 0.0;
                            for (int64_t y = 0; y < h; ++y) {
                                const double* prow = pin + (y + ky) * pad_w + kx;
                                const double* grow = go + y * w;
                                for (int64_t x = 0; x < w; ++x) s += grow[x] * prow[x];
                            }
                            gw[ky * spec.kw + kx] += s;
                        }
                    }
                }
            }
        }
    }
}

Tensor4 relu(const Tensor4& input) {
    Tensor4 out(input.shape);
    for (size_t i = 0; i < input.data.size(); ++i)
        out.data[i] = input.data[i] > 0.0 ? input.data[i] : 0.0;
    return out;
}

Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out) {
    if (input.shape != grad_out.shape)
        throw ShapeError("relu_backward: shape mismatch " + input.shape.str() + " vs " +
                         grad_out.shape.str());
    Tensor4 gi(input.shape);
    for (size_t i = 0; i < input.data.size(); ++i)
        gi.data[i] = input.data[i] > 0.0 ? grad_out.data[i] : 0.0;
    return gi;
}

std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target) {
    if (pred.shape != target.shape)
        throw ShapeError("mse_loss: shape mismatch " + pred.shape.str() + " vs " +
                         target.shape.str());
    if (pred.size() == 0) throw ShapeError("mse_loss: empty tensors");

    const double inv_count = 1.0 / static_cast<double>(pred.size());
    Tensor4 grad(pred.shape);
    double acc = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        acc += d * d;
        grad.data[i] = 2.0 * d * inv_count;
    }
    return {acc * inv_count, std::move(grad)};
}

void ste_round(std::span<const double> in, std::span<double> out) {
    if (in.size() != out.size()) throw ShapeError("ste_round: span length mismatch");
    for (size_t i = 0; i < in.size(); ++i) out[i] = std::round(in[i]);
}

Tensor4 ste_round(const Tensor4& input) {
    Tensor4 out(input.shape);
    ste_round(std::span<const double>(input.data), std::span<double>(out.data));
    return out;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size() ||
        params.size() != state.v.size())
        throw ShapeError("adam_step: parameter/gradient/state length mismatch");
    if (!(state.lr > 0.0)) throw NumericError("adam_step: learning rate must be positive");

    for (size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step: non-finite gradient at index " + std::to_string(i) +
                               " (step " + std::to_string(state.step + 1) + ")");

    state.step += 1;
    const double b1t = 1.0 - std::pow(state.beta1, double(state.step));
    const double b2t = 1.0 - std::pow(state.beta2, double(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / b1t;
        const double vhat = state.v[i] / b2t;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

} // namespace elc::ops
