#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepfix/layers.hpp"
#include "deepfix/network.hpp"
#include "deepfix/rng.hpp"

namespace deepfix {

constexpr real kGradCheckStep = 1e-5;
constexpr real kGradCheckTolerance = 1e-4;

inline real grad_rel_err(real analytic, real numeric) {
    const real scale = std::max({std::abs(analytic), std::abs(numeric), real(1e-4)});
    return std::abs(analytic - numeric) / scale;
}

struct CheckOutcome {
    std::string name;
    real max_rel = 0;
    int probes = 0;

    bool ok() const { return max_rel < kGradCheckTolerance; }
};

namespace detail {

inline Tensor random_tensor(int n, int c, int h, int w, Rng& rng, real lo, real hi) {
    Tensor t(n, c, h, w);
    for (real& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

inline real probe_dot(const Tensor& out, const Tensor& r) {
    real j = 0;
    for (size_t i = 0; i < out.v.size(); ++i) j += out.v[i] * r.v[i];
    return j;
}

/// Relative error of one coordinate against central differences of the
/// objective eval(delta) = J(theta + delta). A coordinate that misses the
/// tolerance at the primary step is re-measured at smaller steps: an interval
/// straddling a ReLU or max-pool corner shrinks out of the artifact, while a
/// wrong gradient keeps its error at every step. A corner sitting exactly at
/// the base point survives any step; there the one-sided slopes disagree by
/// twice the central-difference discrepancy, which no smooth mismatch can
/// reproduce, so such coordinates are dropped as non-differentiable.
template <typename Eval>
inline real fd_rel_err(real analytic, Eval&& at) {
    auto central = [&](real h) { return (at(h) - at(-h)) / (2 * h); };
    real rel = grad_rel_err(analytic, central(kGradCheckStep));
    for (real h : {kGradCheckStep / 8, kGradCheckStep / 64}) {
        if (rel < kGradCheckTolerance) return rel;
        rel = std::min(rel, grad_rel_err(analytic, central(h)));
    }
    if (rel < kGradCheckTolerance) return rel;
    const real h = kGradCheckStep / 64;
    const real j0 = at(0), jp = at(h), jm = at(-h);
    const real fwd = (jp - j0) / h, bwd = (j0 - jm) / h;
    if (std::abs(fwd - bwd) > std::abs(analytic - (jp - jm) / (2 * h))) return 0;
    return rel;
}

/// Coordinate indices to probe: everything for small arrays, a seeded random
/// sample otherwise.
inline std::vector<size_t> probe_indices(size_t size, int budget, Rng& rng) {
    std::vector<size_t> idx;
    if (budget <= 0 || size <= static_cast<size_t>(budget)) {
        idx.resize(size);
        for (size_t i = 0; i < size; ++i) idx[i] = i;
        return idx;
    }
    for (int i = 0; i < budget; ++i)
        idx.push_back(static_cast<size_t>(rng.uniform_int(0, static_cast<int>(size) - 1)));
    return idx;
}

}  // namespace detail

/// Compare a layer's reverse-mode gradients against central differences of
/// the probe objective J = sum(R * forward(x)). budget <= 0 probes every
/// coordinate of every parameter and of the input.
inline CheckOutcome check_layer(const std::string& name, Layer& layer, const Tensor& input,
                                Rng& rng, int budget = 0) {
    CheckOutcome res;
    res.name = name;

    Tensor out = layer.forward(input, false);
    const Tensor r = detail::random_tensor(out.n, out.c, out.h, out.w, rng, -1, 1);

    std::vector<ParamRef> params;
    layer.collect_params(params);
    for (const ParamRef& p : params) std::fill(p.grad->begin(), p.grad->end(), real(0));
    const Tensor input_grad = layer.backward(r);

    for (const ParamRef& p : params) {
        for (size_t idx : detail::probe_indices(p.value->size(), budget, rng)) {
            const real saved = (*p.value)[idx];
            auto at = [&](real d) {
                (*p.value)[idx] = saved + d;
                const real j = detail::probe_dot(layer.forward(input, false), r);
                (*p.value)[idx] = saved;
                return j;
            };
            res.max_rel = std::max(res.max_rel, detail::fd_rel_err((*p.grad)[idx], at));
            ++res.probes;
        }
    }

    Tensor x = input;
    for (size_t idx : detail::probe_indices(x.v.size(), budget, rng)) {
        const real saved = x.v[idx];
        auto at = [&](real d) {
            x.v[idx] = saved + d;
            const real j = detail::probe_dot(layer.forward(x, false), r);
            x.v[idx] = saved;
            return j;
        };
        res.max_rel = std::max(res.max_rel, detail::fd_rel_err(input_grad.v[idx], at));
        ++res.probes;
    }
    return res;
}

/// FD check of the standalone ReLU kernel. Inputs are pushed away from zero
/// so no finite-difference interval straddles the kink.
inline CheckOutcome check_relu(Rng& rng) {
    CheckOutcome res;
    res.name = "relu";
    Tensor x = detail::random_tensor(2, 3, 5, 5, rng, -1, 1);
    for (real& v : x.v) v += v >= 0 ? 0.05 : -0.05;
    const Tensor r = detail::random_tensor(2, 3, 5, 5, rng, -1, 1);
    const Tensor g = relu_backward(r, x);
    const real h = kGradCheckStep;
    for (size_t i = 0; i < x.v.size(); ++i) {
        const real saved = x.v[i];
        x.v[i] = saved + h;
        const real jp = detail::probe_dot(relu(x), r);
        x.v[i] = saved - h;
        const real jm = detail::probe_dot(relu(x), r);
        x.v[i] = saved;
        res.max_rel = std::max(res.max_rel, grad_rel_err(g.v[i], (jp - jm) / (2 * h)));
        ++res.probes;
    }
    return res;
}

inline CheckOutcome check_loss(Rng& rng) {
    CheckOutcome res;
    res.name = "euclidean_loss";
    Tensor pred = detail::random_tensor(2, 1, 6, 8, rng, -1, 1);
    const Tensor target = detail::random_tensor(2, 1, 6, 8, rng, -1, 1);
    const LossResult base = euclidean_loss(pred, target);
    const real h = kGradCheckStep;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        const real saved = pred.v[i];
        pred.v[i] = saved + h;
        const real jp = euclidean_loss(pred, target).loss;
        pred.v[i] = saved - h;
        const real jm = euclidean_loss(pred, target).loss;
        pred.v[i] = saved;
        res.max_rel = std::max(res.max_rel, grad_rel_err(base.grad.v[i], (jp - jm) / (2 * h)));
        ++res.probes;
    }
    return res;
}

/// Re-draw all network weights at fan-in-scaled magnitudes so activations and
/// gradients sit at finite-difference-friendly scales. The production init
/// policy is exercised by its own statistical checks; this one exists to make
/// the chain rule measurable through eighteen layers.
inline void gradcheck_init(Network& net, uint64_t seed) {
    for (auto& layer : net.layers) {
        if (auto* c = dynamic_cast<ConvLayer*>(layer.get())) {
            const real fan = static_cast<real>(c->spec.in_channels) * c->spec.kernel_h *
                             c->spec.kernel_w;
            c->set_init_std(c->relu_after ? std::sqrt(2 / fan) : 0.02);
        } else if (auto* l = dynamic_cast<LBCLayer*>(layer.get())) {
            const real fan = static_cast<real>(l->spec.in_channels) * l->spec.kernel_h *
                             l->spec.kernel_w;
            l->set_init_std(std::sqrt(2 / fan));
        } else if (dynamic_cast<InceptionModule*>(layer.get())) {
            layer->set_init_std(std::sqrt(2 / (9 * static_cast<real>(layer->in_channels()))));
        }
    }
    net.init_weights(seed);
    // positive biases keep most units active, thinning the dead-ReLU plateaus
    // that finite differences cannot see through
    for (const ParamRef& p : net.params())
        if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0)
            std::fill(p.value->begin(), p.value->end(), real(0.1));
}

/// End-to-end check through the whole desk network: input gradients plus a
/// sample of coordinates from every parameter array.
inline CheckOutcome check_network(uint64_t seed, int probes_per_array = 2, int input_probes = 8) {
    CheckOutcome res;
    res.name = "network_end_to_end";
    Network net(NetworkConfig::desk(), Variant::LBC);
    gradcheck_init(net, seed);
    Rng rng(Rng::derive(seed, 0xe2e));

    Tensor x = detail::random_tensor(1, 3, net.config.input_height, net.config.input_width, rng, 0, 1);
    Tensor out = net.forward(x, false);
    const Tensor r = detail::random_tensor(out.n, out.c, out.h, out.w, rng, -1, 1);

    net.zero_grads();
    const Tensor input_grad = net.backward(r);
    const std::vector<ParamRef> params = net.params();

    auto objective = [&](const Tensor& in) { return detail::probe_dot(net.forward(in, false), r); };

    for (const ParamRef& p : params) {
        for (size_t idx : detail::probe_indices(p.value->size(), probes_per_array, rng)) {
            const real saved = (*p.value)[idx];
            auto at = [&](real d) {
                (*p.value)[idx] = saved + d;
                const real j = objective(x);
                (*p.value)[idx] = saved;
                return j;
            };
            res.max_rel = std::max(res.max_rel, detail::fd_rel_err((*p.grad)[idx], at));
            ++res.probes;
        }
    }
    for (size_t idx : detail::probe_indices(x.v.size(), input_probes, rng)) {
        const real saved = x.v[idx];
        auto at = [&](real d) {
            x.v[idx] = saved + d;
            const real j = objective(x);
            x.v[idx] = saved;
            return j;
        };
        res.max_rel = std::max(res.max_rel, detail::fd_rel_err(input_grad.v[idx], at));
        ++res.probes;
    }
    return res;
}

/// The full battery: every differentiable kernel, then the assembled network.
inline std::vector<CheckOutcome> gradcheck_suite(uint64_t seed) {
    std::vector<CheckOutcome> out;
    Rng rng(seed);

    auto conv_case = [&](const std::string& name, int kernel, int hole, int stride) {
        ConvSpec spec;
        spec.kernel_h = spec.kernel_w = kernel;
        spec.hole = hole;
        spec.stride = stride;
        spec.pad = same_pad(kernel, hole);
        spec.in_channels = 3;
        spec.out_channels = 4;
        ConvLayer layer(name, spec, true, LrGroup::Fresh, 0.3);
        layer.init_params(rng);
        for (real& b : layer.bias) b = rng.gaussian(0, 0.1);
        out.push_back(check_layer(name, layer, detail::random_tensor(2, 3, 7, 7, rng, -1, 1), rng));
    };
    conv_case("conv3", 3, 1, 1);
    conv_case("conv3_stride2", 3, 1, 2);
    conv_case("conv3_hole2", 3, 2, 1);
    conv_case("conv5_hole6", 5, 6, 1);

    {
        MaxPoolLayer pool("maxpool", 3, 2, 3);
        out.push_back(check_layer("maxpool", pool, detail::random_tensor(2, 3, 7, 7, rng, -1, 1), rng));
    }
    out.push_back(check_relu(rng));
    {
        ConvSpec spec;
        spec.kernel_h = spec.kernel_w = 5;
        spec.hole = 6;
        spec.pad = same_pad(5, 6);
        spec.in_channels = 3;
        spec.out_channels = 4;
        LBCLayer layer("lbc", spec, default_variance_grid(), LrGroup::Fresh, 0.2);
        layer.init_params(rng);
        for (real& b : layer.bias) b = rng.gaussian(0, 0.1);
        out.push_back(check_layer("lbc", layer, detail::random_tensor(2, 3, 7, 7, rng, -1, 1), rng));
    }
    {
        InceptionModule layer("inception", 6, InceptionWidths{4, 6, 4, 4}, 0.25);
        layer.init_params(rng);
        std::vector<ParamRef> refs;
        layer.collect_params(refs);
        for (const ParamRef& p : refs)
            if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0)
                for (real& b : *p.value) b = rng.gaussian(0.1, 0.05);
        out.push_back(
            check_layer("inception", layer, detail::random_tensor(2, 6, 9, 9, rng, -1, 1), rng));
    }
    out.push_back(check_loss(rng));
    out.push_back(check_network(seed));
    return out;
}

/// Width of the input region one output cell reacts to, measured by poking
/// input pixels one at a time.
inline int probe_receptive_extent(int kernel, int hole) {
    ConvSpec spec;
    spec.kernel_h = spec.kernel_w = kernel;
    spec.hole = hole;
    spec.pad = 0;
    spec.in_channels = 1;
    spec.out_channels = 1;
    const int extent = spec.effective_h();
    const int margin = 4;
    Tensor weights(1, 1, kernel, kernel);
    weights.fill(1);
    const std::vector<real> bias(1, 0);

    Tensor input(1, 1, extent + margin, extent + margin);
    const Tensor base = conv2d_forward(input, weights, bias, spec);
    int min_y = input.h, max_y = -1, min_x = input.w, max_x = -1;
    for (int y = 0; y < input.h; ++y)
        for (int x = 0; x < input.w; ++x) {
            input.at(0, 0, y, x) = 1;
            const Tensor probed = conv2d_forward(input, weights, bias, spec);
            input.at(0, 0, y, x) = 0;
            if (probed.at(0, 0, 0, 0) != base.at(0, 0, 0, 0)) {
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                min_x = std::min(min_x, x);
                max_x = std::max(max_x, x);
            }
        }
    if (max_y < 0) return 0;
    const int ext_y = max_y - min_y + 1, ext_x = max_x - min_x + 1;
    if (ext_y != ext_x) throw NumericalError("receptive probe: asymmetric extent");
    return ext_y;
}

}  // namespace deepfix
