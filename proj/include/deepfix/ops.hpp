#pragma once

#include <cstdint>
#include <stdexcept>

#include "deepfix/rng.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

inline Tensor relu(const Tensor& x) {
    Tensor out = x;
    for (real& e : out.v)
        if (e < 0) e = 0;
    return out;
}

/// Gradient is masked by positivity of the pre-activation; the kink at zero
/// uses the zero subgradient.
inline Tensor relu_backward(const Tensor& grad_out, const Tensor& preact) {
    if (!grad_out.same_shape(preact))
        throw ShapeError("relu backward: grad " + grad_out.shape_str() + " vs preact " +
                         preact.shape_str());
    Tensor grad = grad_out;
    for (size_t i = 0; i < grad.v.size(); ++i)
        if (preact.v[i] <= 0) grad.v[i] = 0;
    return grad;
}

/// Inverted-dropout mask: each element is 0 with probability rate, otherwise
/// 1/(1-rate), so eval mode needs no rescaling.
inline Tensor dropout_mask(int n, int c, int h, int w, real rate, uint64_t seed) {
    if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    Tensor mask(n, c, h, w);
    Rng rng(seed);
    const real keep_scale = real(1) / (real(1) - rate);
    for (real& e : mask.v) e = (rng.uniform() < rate) ? real(0) : keep_scale;
    return mask;
}

inline Tensor apply_mask(const Tensor& x, const Tensor& mask) {
    if (!x.same_shape(mask))
        throw ShapeError("apply_mask: " + x.shape_str() + " vs " + mask.shape_str());
    Tensor out = x;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= mask.v[i];
    return out;
}

/// Train mode zeroes values independently with the given probability and
/// rescales survivors; eval mode is the identity. Deterministic given seed.
inline Tensor dropout(const Tensor& x, real rate, bool train, uint64_t seed) {
    if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    if (!train || rate == 0) return x;
    return apply_mask(x, dropout_mask(x.n, x.c, x.h, x.w, rate, seed));
}

}  // namespace deepfix
