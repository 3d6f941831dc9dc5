#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "deepfix/tensor.hpp"

namespace deepfix {

struct PoolResult {
    Tensor output;
    std::vector<int64_t> argmax;  // flat input index per output element, for backward routing
};

/// Max pooling over window x window with zero-free padding: out-of-bounds
/// positions are simply excluded from the max. The default pad (window-1)/2
/// makes the output extent ceil(in/stride). Ties go to the first element in
/// row-major scan order.
inline PoolResult maxpool_forward(const Tensor& input, int window, int stride, int pad = -1) {
    if (window < 1) throw ShapeError("maxpool: window must be >= 1");
    if (stride < 1) throw ShapeError("maxpool: stride must be >= 1");
    if (pad < 0) pad = (window - 1) / 2;
    const int oh = (input.h + 2 * pad - window) / stride + 1;
    const int ow = (input.w + 2 * pad - window) / stride + 1;
    if (oh < 1 || ow < 1)
        throw ShapeError("maxpool: window " + std::to_string(window) + " larger than padded input " +
                         std::to_string(input.h + 2 * pad) + "x" + std::to_string(input.w + 2 * pad));

    PoolResult res;
    res.output = Tensor(input.n, input.c, oh, ow);
    res.argmax.assign(res.output.size(), -1);

    size_t oi = 0;
    for (int b = 0; b < input.n; ++b) {
        for (int ch = 0; ch < input.c; ++ch) {
            const real* ip = input.plane(b, ch);
            const size_t base = input.index(b, ch, 0, 0);
            for (int oy = 0; oy < oh; ++oy) {
                int y0 = oy * stride - pad;
                int y1 = y0 + window;
                if (y0 < 0) y0 = 0;
                if (y1 > input.h) y1 = input.h;
                for (int ox = 0; ox < ow; ++ox) {
                    int x0 = ox * stride - pad;
                    int x1 = x0 + window;
                    if (x0 < 0) x0 = 0;
                    if (x1 > input.w) x1 = input.w;
                    real best = -std::numeric_limits<real>::infinity();
                    int64_t best_idx = -1;
                    for (int y = y0; y < y1; ++y) {
                        const real* irow = ip + static_cast<size_t>(y) * input.w;
                        for (int x = x0; x < x1; ++x) {
                            if (irow[x] > best) {
                                best = irow[x];
                                best_idx = static_cast<int64_t>(base + static_cast<size_t>(y) * input.w + x);
                            }
                        }
                    }
                    res.output.v[oi] = best;
                    res.argmax[oi] = best_idx;
                    ++oi;
                }
            }
        }
    }
    return res;
}

/// Routes each output gradient to the input position that won the max.
inline Tensor maxpool_backward(const Tensor& output_grad, const std::vector<int64_t>& argmax,
                               int n, int c, int h, int w) {
    if (output_grad.size() != argmax.size())
        throw ShapeError("maxpool backward: output_grad has " + std::to_string(output_grad.size()) +
                         " elements, argmax has " + std::to_string(argmax.size()));
    Tensor grad(n, c, h, w);
    for (size_t i = 0; i < argmax.size(); ++i) grad.v[static_cast<size_t>(argmax[i])] += output_grad.v[i];
    return grad;
}

}  // namespace deepfix
