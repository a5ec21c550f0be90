#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "elc/tensor.hpp"

// Minimal deterministic reverse-mode kernels: 2-D convolution, ReLU,
// MSE loss, Adam, and straight-through rounding. Shapes are validated on
// every call; all accumulation orders are fixed so repeated runs are
// bit-identical.
namespace elc::ops {

// Kernel geometry of one convolution. Stride 1, zero padding, output
// spatial size equals input spatial size (kernels must be odd).
struct ConvSpec {
    int out_ch = 0;
    int in_ch = 0;
    int kh = 0;
    int kw = 0;

    int64_t weight_count() const { return int64_t(out_ch) * in_ch * kh * kw; }
};

// Learnable bundle of one convolution layer: the real-valued weights
// (stored at full precision), the bias vector, and the per-layer affine
// pair applied after dequantization.
struct ConvLayerParams {
    ConvSpec spec;
    std::vector<double> weights; // (out_ch, in_ch, kh, kw) row-major
    std::vector<double> bias;    // out_ch
    double affine_gain = 1.0;
    double affine_offset = 0.0;
};

// out(n,oc,y,x) = bias(oc) + sum_{ic,ky,kx} in(n,ic,y+ky-ph,x+kx-pw) * w(oc,ic,ky,kx)
// `layer_name` only decorates shape-error messages.
Tensor4 conv2d(const Tensor4& input, std::span<const double> weights,
               std::span<const double> bias, const ConvSpec& spec,
               std::string_view layer_name = "conv");

inline Tensor4 conv2d(const Tensor4& input, const ConvLayerParams& params,
                      std::string_view layer_name = "conv") {
    return conv2d(input, params.weights, params.bias, params.spec, layer_name);
}

// Gradients of conv2d. Any of the outputs may be null/empty to skip it.
// grad_weights/grad_bias are accumulated into (callers zero them first).
void conv2d_backward(const Tensor4& input, std::span<const double> weights,
                     const ConvSpec& spec, const Tensor4& grad_out,
                     Tensor4* grad_input, std::span<double> grad_weights,
                     std::span<double> grad_bias,
                     std::string_view layer_name = "conv");

Tensor4 relu(const Tensor4& input);
// Masks grad_out by the sign of the forward *input* (derivative 0 at x <= 0).
Tensor4 relu_backward(const Tensor4& input, const Tensor4& grad_out);

// Returns (mean squared error, d loss / d pred). Shapes must match.
std::pair<double, Tensor4> mse_loss(const Tensor4& pred, const Tensor4& target);

// Rounding node of the quantization path. Forward: round half away from
// zero. Backward: identity (the straight-through rule), so there is no
// backward function -- upstream gradients pass through unchanged.
inline double ste_round(double x) { return std::round(x); }
void ste_round(std::span<const double> in, std::span<double> out);
Tensor4 ste_round(const Tensor4& input);

struct AdamState {
    std::vector<double> m; // first moments
    std::vector<double> v; // second moments
    int64_t step = 0;
    double lr = 0.0002;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(size_t param_count, double learning_rate)
        : m(param_count, 0.0), v(param_count, 0.0), lr(learning_rate) {}
};

// In-place Adam update. Throws NumericError on non-finite gradients,
// naming the offending index.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

} // namespace elc::ops
