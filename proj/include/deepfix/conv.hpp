#pragma once

#include <string>
#include <vector>

#include "deepfix/tensor.hpp"

namespace deepfix {

/// Geometry of one 2-D convolution. hole == 1 is a dense kernel; hole > 1
/// spaces the kernel taps so the effective extent grows without extra weights.
struct ConvSpec {
    int kernel_h = 3, kernel_w = 3;
    int stride = 1;
    int hole = 1;
    int pad = 0;
    int in_channels = 0, out_channels = 0;

    int effective_h() const { return kernel_h + (kernel_h - 1) * (hole - 1); }
    int effective_w() const { return kernel_w + (kernel_w - 1) * (hole - 1); }

    void validate() const {
        if (kernel_h < 1 || kernel_w < 1)
            throw ShapeError("conv spec: kernel extent must be >= 1");
        if (stride < 1) throw ShapeError("conv spec: stride must be >= 1");
        if (hole < 1) throw ShapeError("conv spec: hole must be >= 1");
        if (pad < 0) throw ShapeError("conv spec: pad must be >= 0");
        if (in_channels < 1 || out_channels < 1)
            throw ShapeError("conv spec: channel counts must be >= 1");
    }
};

/// Padding that keeps the spatial size unchanged for stride-1 convolutions.
inline int same_pad(int kernel, int hole = 1) {
    return (kernel + (kernel - 1) * (hole - 1)) / 2;
}

namespace detail {

inline int ceil_div(int a, int b) { return a > 0 ? (a + b - 1) / b : a / b; }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Output index range [lo, hi] such that o*stride + offset lands in [0, limit).
inline void valid_range(int offset, int stride, int limit, int out_extent, int& lo, int& hi) {
    lo = ceil_div(-offset, stride);
    hi = floor_div(limit - 1 - offset, stride);
    if (lo < 0) lo = 0;
    if (hi > out_extent - 1) hi = out_extent - 1;
}

inline void check_conv_args(const Tensor& input, const Tensor& weights,
                            const std::vector<real>& bias, const ConvSpec& spec) {
    spec.validate();
    if (input.c != spec.in_channels)
        throw ShapeError("conv2d: input channel axis is " + std::to_string(input.c) +
                         ", spec expects " + std::to_string(spec.in_channels));
    if (weights.n != spec.out_channels)
        throw ShapeError("conv2d: weight out-channel axis is " + std::to_string(weights.n) +
                         ", spec expects " + std::to_string(spec.out_channels));
    if (weights.c != spec.in_channels)
        throw ShapeError("conv2d: weight in-channel axis is " + std::to_string(weights.c) +
                         ", spec expects " + std::to_string(spec.in_channels));
    if (weights.h != spec.kernel_h || weights.w != spec.kernel_w)
        throw ShapeError("conv2d: weight kernel axes are " + std::to_string(weights.h) + "x" +
                         std::to_string(weights.w) + ", spec expects " +
                         std::to_string(spec.kernel_h) + "x" + std::to_string(spec.kernel_w));
    if (static_cast<int>(bias.size()) != spec.out_channels)
        throw ShapeError("conv2d: bias length is " + std::to_string(bias.size()) +
                         ", spec expects " + std::to_string(spec.out_channels));
    if (input.h + 2 * spec.pad < spec.effective_h() || input.w + 2 * spec.pad < spec.effective_w())
        throw ShapeError("conv2d: padded input " + std::to_string(input.h + 2 * spec.pad) + "x" +
                         std::to_string(input.w + 2 * spec.pad) +
                         " smaller than effective kernel " + std::to_string(spec.effective_h()) +
                         "x" + std::to_string(spec.effective_w()));
}

}  // namespace detail

/// Zero-padded dilated convolution. Kernel taps sample the input at
/// hole-spaced offsets; out-of-bounds samples read as zero.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& weights,
                             const std::vector<real>& bias, const ConvSpec& spec) {
    detail::check_conv_args(input, weights, bias, spec);
    const int oh = (input.h + 2 * spec.pad - spec.effective_h()) / spec.stride + 1;
    const int ow = (input.w + 2 * spec.pad - spec.effective_w()) / spec.stride + 1;
    Tensor out(input.n, spec.out_channels, oh, ow);

    for (int b = 0; b < input.n; ++b) {
        for (int oc = 0; oc < spec.out_channels; ++oc) {
            real* op = out.plane(b, oc);
            const real bv = bias[oc];
            for (size_t i = 0, sz = static_cast<size_t>(oh) * ow; i < sz; ++i) op[i] = bv;
            for (int ic = 0; ic < spec.in_channels; ++ic) {
                const real* ip = input.plane(b, ic);
                for (int ky = 0; ky < spec.kernel_h; ++ky) {
                    const int dy = ky * spec.hole - spec.pad;
                    int oy_lo, oy_hi;
                    detail::valid_range(dy, spec.stride, input.h, oh, oy_lo, oy_hi);
                    for (int kx = 0; kx < spec.kernel_w; ++kx) {
                        const real wv = weights.at(oc, ic, ky, kx);
                        const int dx = kx * spec.hole - spec.pad;
                        int ox_lo, ox_hi;
                        detail::valid_range(dx, spec.stride, input.w, ow, ox_lo, ox_hi);
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const real* irow = ip + static_cast<size_t>(oy * spec.stride + dy) * input.w + dx;
                            real* orow = op + static_cast<size_t>(oy) * ow;
                            if (spec.stride == 1) {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) orow[ox] += wv * irow[ox];
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                    orow[ox] += wv * irow[static_cast<size_t>(ox) * spec.stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

struct ConvGrads {
    Tensor input_grad;
    Tensor weight_grad;
    std::vector<real> bias_grad;
};

/// Reverse-mode companion of conv2d_forward: analytic partials with respect
/// to the input, the weights and the bias.
inline ConvGrads conv2d_backward(const Tensor& output_grad, const Tensor& input,
                                 const Tensor& weights, const ConvSpec& spec) {
    std::vector<real> bias_probe(static_cast<size_t>(spec.out_channels), real(0));
    detail::check_conv_args(input, weights, bias_probe, spec);
    const int oh = (input.h + 2 * spec.pad - spec.effective_h()) / spec.stride + 1;
    const int ow = (input.w + 2 * spec.pad - spec.effective_w()) / spec.stride + 1;
    if (output_grad.n != input.n || output_grad.c != spec.out_channels || output_grad.h != oh ||
        output_grad.w != ow)
        throw ShapeError("conv2d backward: output_grad is " + output_grad.shape_str() +
                         ", forward output is " + Tensor::shape_str_of(input.n, spec.out_channels, oh, ow));

    ConvGrads grads;
    grads.input_grad = Tensor::zeros_like(input);
    grads.weight_grad = Tensor::zeros_like(weights);
    grads.bias_grad.assign(static_cast<size_t>(spec.out_channels), real(0));

    for (int b = 0; b < input.n; ++b) {
        for (int oc = 0; oc < spec.out_channels; ++oc) {
            const real* gp = output_grad.plane(b, oc);
            real acc = 0;
            for (size_t i = 0, sz = static_cast<size_t>(oh) * ow; i < sz; ++i) acc += gp[i];
            grads.bias_grad[oc] += acc;
            for (int ic = 0; ic < spec.in_channels; ++ic) {
                const real* ip = input.plane(b, ic);
                real* igp = grads.input_grad.plane(b, ic);
                for (int ky = 0; ky < spec.kernel_h; ++ky) {
                    const int dy = ky * spec.hole - spec.pad;
                    int oy_lo, oy_hi;
                    detail::valid_range(dy, spec.stride, input.h, oh, oy_lo, oy_hi);
                    for (int kx = 0; kx < spec.kernel_w; ++kx) {
                        const real wv = weights.at(oc, ic, ky, kx);
                        const int dx = kx * spec.hole - spec.pad;
                        int ox_lo, ox_hi;
                        detail::valid_range(dx, spec.stride, input.w, ow, ox_lo, ox_hi);
                        real wg = 0;
                        for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                            const size_t ioff = static_cast<size_t>(oy * spec.stride + dy) * input.w + dx;
                            const real* grow = gp + static_cast<size_t>(oy) * ow;
                            const real* irow = ip + ioff;
                            real* igrow = igp + ioff;
                            if (spec.stride == 1) {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    const real go = grow[ox];
                                    wg += go * irow[ox];
                                    igrow[ox] += wv * go;
                                }
                            } else {
                                for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                    const real go = grow[ox];
                                    const size_t ix = static_cast<size_t>(ox) * spec.stride;
                                    wg += go * irow[ix];
                                    igrow[ix] += wv * go;
                                }
                            }
                        }
                        grads.weight_grad.at(oc, ic, ky, kx) += wg;
                    }
                }
            }
        }
    }
    return grads;
}

}  // namespace deepfix
