#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deepfix/conv.hpp"
#include "deepfix/location_bank.hpp"
#include "deepfix/ops.hpp"
#include "deepfix/pool.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

/// Learning-rate group of a parameter block. Trunk convolutions would take
/// transferred weights in the original pipeline and train slowly; everything
/// initialized from scratch trains at the higher rate.
enum class LrGroup { Pretrained, Fresh };

/// Flat view of one parameter array with its gradient and momentum buffers.
struct ParamRef {
    std::string name;
    LrGroup group = LrGroup::Fresh;
    std::vector<real>* value = nullptr;
    std::vector<real>* grad = nullptr;
    std::vector<real>* momentum = nullptr;
};

class Layer {
public:
    std::string name;

    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool train) = 0;
    virtual Tensor backward(const Tensor& grad_out) = 0;
    virtual void collect_params(std::vector<ParamRef>&) {}
    /// Draw fresh parameters from the shared stream; zero biases and momentum.
    virtual void init_params(Rng&) {}
    /// Change the Gaussian scale the next init_params call will draw from.
    virtual void set_init_std(real) {}
    virtual int in_channels() const = 0;
    virtual int out_channels() const = 0;
    /// Receptive extent of a single application of this layer on its input.
    virtual int receptive_extent() const = 0;
    virtual int stride() const { return 1; }
    virtual const char* kind() const = 0;
};

// ---------------------------------------------------------------------------
// plain convolution layer
// ---------------------------------------------------------------------------

class ConvLayer : public Layer {
public:
    ConvSpec spec;
    bool relu_after = true;
    LrGroup group = LrGroup::Fresh;
    real init_std = 0.01;

    Tensor weights, weight_grad, weight_mom;
    std::vector<real> bias, bias_grad, bias_mom;

    ConvLayer(std::string layer_name, ConvSpec s, bool with_relu, LrGroup g, real std_dev)
        : spec(s), relu_after(with_relu), group(g), init_std(std_dev) {
        name = std::move(layer_name);
        spec.validate();
        weights = Tensor(spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w);
        weight_grad = Tensor::zeros_like(weights);
        weight_mom = Tensor::zeros_like(weights);
        bias.assign(spec.out_channels, 0);
        bias_grad.assign(spec.out_channels, 0);
        bias_mom.assign(spec.out_channels, 0);
    }

    Tensor forward(const Tensor& x, bool) override {
        input_cache_ = x;
        Tensor pre = conv2d_forward(x, weights, bias, spec);
        if (!relu_after) return pre;
        preact_cache_ = pre;
        return relu(pre);
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor g = relu_after ? relu_backward(grad_out, preact_cache_) : grad_out;
        ConvGrads cg = conv2d_backward(g, input_cache_, weights, spec);
        for (size_t i = 0; i < weight_grad.v.size(); ++i) weight_grad.v[i] += cg.weight_grad.v[i];
        for (size_t i = 0; i < bias_grad.size(); ++i) bias_grad[i] += cg.bias_grad[i];
        return std::move(cg.input_grad);
    }

    void collect_params(std::vector<ParamRef>& out) override {
        out.push_back({name + ".weight", group, &weights.v, &weight_grad.v, &weight_mom.v});
        out.push_back({name + ".bias", group, &bias, &bias_grad, &bias_mom});
    }

    void init_params(Rng& rng) override {
        for (real& x : weights.v) x = rng.gaussian(0, init_std);
        std::fill(bias.begin(), bias.end(), real(0));
        weight_mom.fill(0);
        std::fill(bias_mom.begin(), bias_mom.end(), real(0));
    }

    void set_init_std(real s) override { init_std = s; }

    int in_channels() const override { return spec.in_channels; }
    int out_channels() const override { return spec.out_channels; }
    int receptive_extent() const override { return spec.effective_h(); }
    int stride() const override { return spec.stride; }
    const char* kind() const override { return "conv"; }

private:
    Tensor input_cache_, preact_cache_;
};

// ---------------------------------------------------------------------------
// location biased convolution
// ---------------------------------------------------------------------------

/// Response of a location biased convolution before the activation: the data
/// term plus the bank term under one shared kernel geometry and bias.
inline Tensor lbc_preact(const Tensor& input, const LocationFeatureBank& bank,
                         const Tensor& weights, const Tensor& loc_weights,
                         const std::vector<real>& bias, const ConvSpec& spec) {
    if (bank.height != input.h || bank.width != input.w)
        throw ShapeError("lbc: bank resolution " + std::to_string(bank.height) + "x" +
                         std::to_string(bank.width) + " vs input " + std::to_string(input.h) + "x" +
                         std::to_string(input.w));
    Tensor pre = conv2d_forward(input, weights, bias, spec);

    ConvSpec loc_spec = spec;
    loc_spec.in_channels = static_cast<int>(bank.count());
    const std::vector<real> zero_bias(static_cast<size_t>(spec.out_channels), real(0));
    Tensor loc = conv2d_forward(bank_tensor(bank), loc_weights, zero_bias, loc_spec);

    // the bank term is identical for every batch item
    const size_t plane = static_cast<size_t>(pre.h) * pre.w * pre.c;
    for (int b = 0; b < pre.n; ++b) {
        real* dst = pre.v.data() + static_cast<size_t>(b) * plane;
        for (size_t i = 0; i < plane; ++i) dst[i] += loc.v[i];
    }
    return pre;
}

/// Full location biased convolution response: data term, bank term, bias, ReLU.
inline Tensor lbc_forward(const Tensor& input, const LocationFeatureBank& bank,
                          const Tensor& weights, const Tensor& loc_weights,
                          const std::vector<real>& bias, const ConvSpec& spec) {
    return relu(lbc_preact(input, bank, weights, loc_weights, bias, spec));
}

class LBCLayer : public Layer {
public:
    ConvSpec spec;  // data path; the bank path shares kernel geometry
    LrGroup group = LrGroup::Fresh;
    real init_std = 0.01;

    Tensor weights, weight_grad, weight_mom;
    Tensor loc_weights, loc_weight_grad, loc_weight_mom;
    std::vector<real> bias, bias_grad, bias_mom;
    std::vector<std::pair<real, real>> variances;

    LBCLayer(std::string layer_name, ConvSpec s, std::vector<std::pair<real, real>> vars,
             LrGroup g, real std_dev)
        : spec(s), group(g), init_std(std_dev), variances(std::move(vars)) {
        name = std::move(layer_name);
        spec.validate();
        if (variances.size() != static_cast<size_t>(kLocationBankSize))
            throw std::invalid_argument("lbc layer needs " + std::to_string(kLocationBankSize) +
                                        " variance pairs, got " + std::to_string(variances.size()));
        weights = Tensor(spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w);
        weight_grad = Tensor::zeros_like(weights);
        weight_mom = Tensor::zeros_like(weights);
        loc_weights = Tensor(spec.out_channels, kLocationBankSize, spec.kernel_h, spec.kernel_w);
        loc_weight_grad = Tensor::zeros_like(loc_weights);
        loc_weight_mom = Tensor::zeros_like(loc_weights);
        bias.assign(spec.out_channels, 0);
        bias_grad.assign(spec.out_channels, 0);
        bias_mom.assign(spec.out_channels, 0);
    }

    const LocationFeatureBank& bank_for(int height, int width) {
        if (bank_.height != height || bank_.width != width)
            bank_ = make_location_bank(height, width, variances);
        return bank_;
    }

    Tensor forward(const Tensor& x, bool) override {
        input_cache_ = x;
        const LocationFeatureBank& bank = bank_for(x.h, x.w);
        preact_cache_ = lbc_preact(x, bank, weights, loc_weights, bias, spec);
        return relu(preact_cache_);
    }

    Tensor backward(const Tensor& grad_out) override {
        Tensor g = relu_backward(grad_out, preact_cache_);
        ConvGrads cg = conv2d_backward(g, input_cache_, weights, spec);
        for (size_t i = 0; i < weight_grad.v.size(); ++i) weight_grad.v[i] += cg.weight_grad.v[i];
        for (size_t i = 0; i < bias_grad.size(); ++i) bias_grad[i] += cg.bias_grad[i];

        // bank term: sum the gradient over the batch, then one batch-1 pass
        Tensor gsum(1, g.c, g.h, g.w);
        const size_t plane = static_cast<size_t>(g.c) * g.h * g.w;
        for (int b = 0; b < g.n; ++b) {
            const real* src = g.v.data() + static_cast<size_t>(b) * plane;
            for (size_t i = 0; i < plane; ++i) gsum.v[i] += src[i];
        }
        ConvSpec loc_spec = spec;
        loc_spec.in_channels = kLocationBankSize;
        ConvGrads lg = conv2d_backward(gsum, bank_tensor(bank_), loc_weights, loc_spec);
        for (size_t i = 0; i < loc_weight_grad.v.size(); ++i)
            loc_weight_grad.v[i] += lg.weight_grad.v[i];

        return std::move(cg.input_grad);
    }

    void collect_params(std::vector<ParamRef>& out) override {
        out.push_back({name + ".weight", group, &weights.v, &weight_grad.v, &weight_mom.v});
        out.push_back({name + ".locweight", group, &loc_weights.v, &loc_weight_grad.v, &loc_weight_mom.v});
        out.push_back({name + ".bias", group, &bias, &bias_grad, &bias_mom});
    }

    void init_params(Rng& rng) override {
        for (real& x : weights.v) x = rng.gaussian(0, init_std);
        for (real& x : loc_weights.v) x = rng.gaussian(0, init_std);
        std::fill(bias.begin(), bias.end(), real(0));
        weight_mom.fill(0);
        loc_weight_mom.fill(0);
        std::fill(bias_mom.begin(), bias_mom.end(), real(0));
    }

    void set_init_std(real s) override { init_std = s; }

    int in_channels() const override { return spec.in_channels; }
    int out_channels() const override { return spec.out_channels; }
    int receptive_extent() const override { return spec.effective_h(); }
    int stride() const override { return spec.stride; }
    const char* kind() const override { return "lbc"; }

private:
    Tensor input_cache_, preact_cache_;
    LocationFeatureBank bank_;
};

// ---------------------------------------------------------------------------
// max-pool and dropout as graph nodes
// ---------------------------------------------------------------------------

class MaxPoolLayer : public Layer {
public:
    int window = 3, pool_stride = 2, pad = 1;
    int channels = 0;

    MaxPoolLayer(std::string layer_name, int win, int s, int ch)
        : window(win), pool_stride(s), pad((win - 1) / 2), channels(ch) {
        name = std::move(layer_name);
    }

    Tensor forward(const Tensor& x, bool) override {
        in_n_ = x.n;
        in_c_ = x.c;
        in_h_ = x.h;
        in_w_ = x.w;
        PoolResult res = maxpool_forward(x, window, pool_stride, pad);
        argmax_ = std::move(res.argmax);
        return std::move(res.output);
    }

    Tensor backward(const Tensor& grad_out) override {
        return maxpool_backward(grad_out, argmax_, in_n_, in_c_, in_h_, in_w_);
    }

    int in_channels() const override { return channels; }
    int out_channels() const override { return channels; }
    int receptive_extent() const override { return window; }
    int stride() const override { return pool_stride; }
    const char* kind() const override { return "maxpool"; }

private:
    std::vector<int64_t> argmax_;
    int in_n_ = 0, in_c_ = 0, in_h_ = 0, in_w_ = 0;
};

class DropoutLayer : public Layer {
public:
    real rate = 0.5;
    int channels = 0;

    DropoutLayer(std::string layer_name, real r, int ch) : rate(r), channels(ch) {
        name = std::move(layer_name);
        if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    }

    void set_seed(uint64_t seed) {
        seed_ = seed;
        counter_ = 0;
    }

    Tensor forward(const Tensor& x, bool train) override {
        if (!train || rate == 0) {
            mask_ = Tensor();
            return x;
        }
        mask_ = dropout_mask(x.n, x.c, x.h, x.w, rate, Rng::derive(seed_, counter_++));
        return apply_mask(x, mask_);
    }

    Tensor backward(const Tensor& grad_out) override {
        if (mask_.empty()) return grad_out;
        return apply_mask(grad_out, mask_);
    }

    int in_channels() const override { return channels; }
    int out_channels() const override { return channels; }
    int receptive_extent() const override { return 1; }
    const char* kind() const override { return "dropout"; }

private:
    Tensor mask_;
    uint64_t seed_ = 0x6b79d2f1a5c3e801ull;
    uint64_t counter_ = 0;
};

// ---------------------------------------------------------------------------
// inception module
// ---------------------------------------------------------------------------

inline Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    const Tensor& first = *parts.front();
    int total_c = 0;
    for (const Tensor* p : parts) {
        if (p->n != first.n || p->h != first.h || p->w != first.w)
            throw ShapeError("concat: branch output " + p->shape_str() + " does not align with " +
                             first.shape_str());
        total_c += p->c;
    }
    Tensor out(first.n, total_c, first.h, first.w);
    for (int b = 0; b < first.n; ++b) {
        int co = 0;
        for (const Tensor* p : parts) {
            for (int ch = 0; ch < p->c; ++ch, ++co) {
                const real* src = p->plane(b, ch);
                std::copy(src, src + static_cast<size_t>(first.h) * first.w, out.plane(b, co));
            }
        }
    }
    return out;
}

inline Tensor slice_channels(const Tensor& t, int from, int count) {
    Tensor out(t.n, count, t.h, t.w);
    for (int b = 0; b < t.n; ++b)
        for (int ch = 0; ch < count; ++ch) {
            const real* src = t.plane(b, from + ch);
            std::copy(src, src + static_cast<size_t>(t.h) * t.w, out.plane(b, ch));
        }
    return out;
}

/// Branch widths of one inception module. Reducer widths for the 3x3 branches
/// default to half the branch output.
struct InceptionWidths {
    int narrow = 16;        // 1x1 branch
    int spread = 32;        // 1x1 -> 3x3 branch
    int spread_holes = 16;  // 1x1 -> 3x3 hole-2 branch
    int pooled = 16;        // 3x3 max-pool -> 1x1 branch

    int total() const { return narrow + spread + spread_holes + pooled; }
};

/// Four spatial-size-preserving branches concatenated along channels:
/// 1x1, 1x1 -> 3x3, 1x1 -> 3x3 with hole 2, and 3x3 stride-1 max-pool -> 1x1.
class InceptionModule : public Layer {
public:
    InceptionWidths widths;

    InceptionModule(std::string layer_name, int input_channels, InceptionWidths w, real std_dev)
        : widths(w), in_c_(input_channels) {
        name = std::move(layer_name);
        const int rb = std::max(1, w.spread / 2);
        const int rc = std::max(1, w.spread_holes / 2);
        a_ = make_conv(".a", input_channels, w.narrow, 1, 1, std_dev);
        b_reduce_ = make_conv(".b_reduce", input_channels, rb, 1, 1, std_dev);
        b_ = make_conv(".b", rb, w.spread, 3, 1, std_dev);
        c_reduce_ = make_conv(".c_reduce", input_channels, rc, 1, 1, std_dev);
        c_ = make_conv(".c", rc, w.spread_holes, 3, 2, std_dev);
        d_proj_ = make_conv(".d_proj", input_channels, w.pooled, 1, 1, std_dev);
        pool_ = std::make_unique<MaxPoolLayer>(name + ".d_pool", 3, 1, input_channels);
    }

    Tensor forward(const Tensor& x, bool train) override {
        Tensor oa = a_->forward(x, train);
        Tensor ob = b_->forward(b_reduce_->forward(x, train), train);
        Tensor oc = c_->forward(c_reduce_->forward(x, train), train);
        Tensor od = d_proj_->forward(pool_->forward(x, train), train);
        if (!(oa.h == ob.h && ob.h == oc.h && oc.h == od.h && oa.w == ob.w && ob.w == oc.w &&
              oc.w == od.w))
            throw ShapeError(name + ": branch spatial extents diverge (" + oa.shape_str() + ", " +
                             ob.shape_str() + ", " + oc.shape_str() + ", " + od.shape_str() + ")");
        return concat_channels({&oa, &ob, &oc, &od});
    }

    Tensor backward(const Tensor& grad_out) override {
        int off = 0;
        Tensor ga = slice_channels(grad_out, off, widths.narrow);
        off += widths.narrow;
        Tensor gb = slice_channels(grad_out, off, widths.spread);
        off += widths.spread;
        Tensor gc = slice_channels(grad_out, off, widths.spread_holes);
        off += widths.spread_holes;
        Tensor gd = slice_channels(grad_out, off, widths.pooled);

        Tensor gx = a_->backward(ga);
        Tensor g2 = b_reduce_->backward(b_->backward(gb));
        Tensor g3 = c_reduce_->backward(c_->backward(gc));
        Tensor g4 = pool_->backward(d_proj_->backward(gd));
        for (size_t i = 0; i < gx.v.size(); ++i) gx.v[i] += g2.v[i] + g3.v[i] + g4.v[i];
        return gx;
    }

    void collect_params(std::vector<ParamRef>& out) override {
        a_->collect_params(out);
        b_reduce_->collect_params(out);
        b_->collect_params(out);
        c_reduce_->collect_params(out);
        c_->collect_params(out);
        d_proj_->collect_params(out);
    }

    void init_params(Rng& rng) override {
        a_->init_params(rng);
        b_reduce_->init_params(rng);
        b_->init_params(rng);
        c_reduce_->init_params(rng);
        c_->init_params(rng);
        d_proj_->init_params(rng);
    }

    void set_init_std(real s) override {
        a_->set_init_std(s);
        b_reduce_->set_init_std(s);
        b_->set_init_std(s);
        c_reduce_->set_init_std(s);
        c_->set_init_std(s);
        d_proj_->set_init_std(s);
    }

    int in_channels() const override { return in_c_; }
    int out_channels() const override { return widths.total(); }
    int receptive_extent() const override { return 5; }  // widest branch: 3x3 with hole 2
    const char* kind() const override { return "inception"; }

private:
    std::unique_ptr<ConvLayer> make_conv(const char* suffix, int in, int out, int kernel, int hole,
                                         real std_dev) {
        ConvSpec s;
        s.kernel_h = s.kernel_w = kernel;
        s.hole = hole;
        s.pad = same_pad(kernel, hole);
        s.in_channels = in;
        s.out_channels = out;
        return std::make_unique<ConvLayer>(name + suffix, s, true, LrGroup::Fresh, std_dev);
    }

    int in_c_ = 0;
    std::unique_ptr<ConvLayer> a_, b_reduce_, b_, c_reduce_, c_, d_proj_;
    std::unique_ptr<MaxPoolLayer> pool_;
};

// ---------------------------------------------------------------------------
// loss
// ---------------------------------------------------------------------------

struct LossResult {
    real loss = 0;
    Tensor grad;
};

/// Mean squared error with the 1/2 factor: loss = sum((S-G)^2) / (2N) over all
/// N elements, so the gradient is (S-G)/N and learning rates transfer across
/// resolutions.
inline LossResult euclidean_loss(const Tensor& predicted, const Tensor& target) {
    if (!predicted.same_shape(target))
        throw ShapeError("euclidean_loss: predicted " + predicted.shape_str() + " vs target " +
                         target.shape_str());
    LossResult res;
    res.grad = Tensor::zeros_like(predicted);
    const real inv_n = real(1) / static_cast<real>(predicted.size());
    real acc = 0;
    for (size_t i = 0; i < predicted.v.size(); ++i) {
        const real d = predicted.v[i] - target.v[i];
        acc += d * d;
        res.grad.v[i] = d * inv_n;
    }
    res.loss = acc * inv_n / 2;
    return res;
}

}  // namespace deepfix
