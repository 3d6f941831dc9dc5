#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deepfix/layers.hpp"

namespace deepfix {

/// Model variants used in the bias ablation: the full model, the model with
/// the location bank removed, and the bank-free model whose predictions get an
/// explicit mean-map bias added afterwards.
enum class Variant { LBC, NoLBC, ExplicitCB };

inline const char* variant_name(Variant v) {
    switch (v) {
        case Variant::LBC: return "lbc";
        case Variant::NoLBC: return "no-lbc";
        case Variant::ExplicitCB: return "explicit-cb";
    }
    throw std::invalid_argument("variant_name: bad enum value");
}

inline Variant parse_variant(const std::string& s) {
    if (s == "lbc") return Variant::LBC;
    if (s == "no-lbc") return Variant::NoLBC;
    if (s == "explicit-cb") return Variant::ExplicitCB;
    throw DataError("unknown variant '" + s + "' (expected lbc, no-lbc or explicit-cb)");
}

/// Width and resolution profile of a network. The "desk" profile divides every
/// channel count of the reference profile by eight so the model trains in
/// minutes on one core; the topology is identical.
struct NetworkConfig {
    std::string name = "desk";
    int input_height = 48, input_width = 64;  // multiples of 8
    int block_widths[5] = {8, 16, 32, 64, 64};
    InceptionWidths inception{16, 32, 16, 16};
    int lbc_channels = 64;
    real dropout_rate = 0.5;
    real trunk_init_std = 0.01;
    real fresh_init_std = 0.01;
    real head_init_std = 10.0;
    std::vector<std::pair<real, real>> bank_variances = default_variance_grid();

    static NetworkConfig desk() { return NetworkConfig(); }

    static NetworkConfig full() {
        NetworkConfig cfg;
        cfg.name = "full";
        cfg.input_height = 384;
        cfg.input_width = 512;
        int widths[5] = {64, 128, 256, 512, 512};
        std::copy(widths, widths + 5, cfg.block_widths);
        cfg.inception = InceptionWidths{128, 256, 128, 128};
        cfg.lbc_channels = 512;
        return cfg;
    }
};

inline NetworkConfig parse_config(const std::string& s) {
    if (s == "desk") return NetworkConfig::desk();
    if (s == "full") return NetworkConfig::full();
    throw DataError("unknown config '" + s + "' (expected desk or full)");
}

/// Fully convolutional saliency network. Five convolution blocks with three
/// downsampling pools, two inception modules, two wide dilated layers (with or
/// without the location bank depending on the variant), dropout and a linear
/// 1x1 scoring layer. The output grid is the input grid divided by eight.
class Network {
public:
    NetworkConfig config;
    Variant variant = Variant::LBC;
    std::vector<std::unique_ptr<Layer>> layers;

    Network(NetworkConfig cfg, Variant var) : config(std::move(cfg)), variant(var) {
        const int* bw = config.block_widths;
        add_conv("conv1_1", 3, bw[0], 3, 1, LrGroup::Pretrained, config.trunk_init_std);
        add_conv("conv1_2", bw[0], bw[0], 3, 1, LrGroup::Pretrained, config.trunk_init_std);
        add_pool("pool1", 2, bw[0]);
        add_conv("conv2_1", bw[0], bw[1], 3, 1, LrGroup::Pretrained, config.trunk_init_std);
        add_conv("conv2_2", bw[1], bw[1], 3, 1, LrGroup::Pretrained, config.trunk_init_std);
        add_pool("pool2", 2, bw[1]);
        for (int i = 1; i <= 3; ++i)
            add_conv("conv3_" + std::to_string(i), i == 1 ? bw[1] : bw[2], bw[2], 3, 1,
                     LrGroup::Pretrained, config.trunk_init_std);
        add_pool("pool3", 2, bw[2]);
        for (int i = 1; i <= 3; ++i)
            add_conv("conv4_" + std::to_string(i), i == 1 ? bw[2] : bw[3], bw[3], 3, 1,
                     LrGroup::Pretrained, config.trunk_init_std);
        add_pool("pool4", 1, bw[3]);
        for (int i = 1; i <= 3; ++i)
            add_conv("conv5_" + std::to_string(i), i == 1 ? bw[3] : bw[4], bw[4], 3, 2,
                     LrGroup::Pretrained, config.trunk_init_std);

        layers.push_back(std::make_unique<InceptionModule>("incep1", bw[4], config.inception,
                                                           config.fresh_init_std));
        layers.push_back(std::make_unique<InceptionModule>("incep2", config.inception.total(),
                                                           config.inception, config.fresh_init_std));

        add_wide("lbc1", config.inception.total(), config.lbc_channels);
        add_wide("lbc2", config.lbc_channels, config.lbc_channels);

        layers.push_back(
            std::make_unique<DropoutLayer>("drop", config.dropout_rate, config.lbc_channels));

        ConvSpec head;
        head.kernel_h = head.kernel_w = 1;
        head.pad = 0;
        head.in_channels = config.lbc_channels;
        head.out_channels = 1;
        layers.push_back(
            std::make_unique<ConvLayer>("score", head, false, LrGroup::Fresh, config.head_init_std));
        validate_chain();
    }

    /// Assemble from an explicit layer list; used to exercise chain checking.
    explicit Network(std::vector<std::unique_ptr<Layer>> raw) : layers(std::move(raw)) {
        validate_chain();
    }

    Tensor forward(const Tensor& x, bool train) {
        if (x.c != layers.front()->in_channels())
            throw ShapeError("network: input has " + std::to_string(x.c) + " channels, first layer " +
                             layers.front()->name + " expects " +
                             std::to_string(layers.front()->in_channels()));
        Tensor cur = x;
        for (auto& layer : layers) cur = layer->forward(cur, train);
        return cur;
    }

    Tensor backward(const Tensor& grad_out) {
        Tensor cur = grad_out;
        for (auto it = layers.rbegin(); it != layers.rend(); ++it) cur = (*it)->backward(cur);
        return cur;
    }

    std::vector<ParamRef> params() {
        std::vector<ParamRef> out;
        for (auto& layer : layers) layer->collect_params(out);
        return out;
    }

    void zero_grads() {
        for (ParamRef& p : params()) std::fill(p.grad->begin(), p.grad->end(), real(0));
    }

    void init_weights(uint64_t seed) {
        Rng rng(seed);
        for (auto& layer : layers) layer->init_params(rng);
    }

    void set_dropout_seed(uint64_t seed) {
        uint64_t idx = 0;
        for (auto& layer : layers)
            if (auto* d = dynamic_cast<DropoutLayer*>(layer.get())) d->set_seed(Rng::derive(seed, idx++));
    }

    Layer* find(const std::string& layer_name) {
        for (auto& layer : layers)
            if (layer->name == layer_name) return layer.get();
        return nullptr;
    }

    /// Extent of the input patch feeding one output cell, composed over the
    /// whole chain: rf grows by (extent - 1) * jump per layer, jump by stride.
    int receptive_extent() const {
        int rf = 1, jump = 1;
        for (const auto& layer : layers) {
            rf += (layer->receptive_extent() - 1) * jump;
            jump *= layer->stride();
        }
        return rf;
    }

    int total_stride() const {
        int s = 1;
        for (const auto& layer : layers) s *= layer->stride();
        return s;
    }

private:
    void add_conv(const std::string& nm, int in, int out, int kernel, int hole, LrGroup g, real sd) {
        ConvSpec s;
        s.kernel_h = s.kernel_w = kernel;
        s.hole = hole;
        s.pad = same_pad(kernel, hole);
        s.in_channels = in;
        s.out_channels = out;
        layers.push_back(std::make_unique<ConvLayer>(nm, s, true, g, sd));
    }

    void add_pool(const std::string& nm, int stride, int ch) {
        layers.push_back(std::make_unique<MaxPoolLayer>(nm, 3, stride, ch));
    }

    void add_wide(const std::string& nm, int in, int out) {
        ConvSpec s;
        s.kernel_h = s.kernel_w = 5;
        s.hole = 6;
        s.pad = same_pad(5, 6);
        s.in_channels = in;
        s.out_channels = out;
        if (variant == Variant::LBC)
            layers.push_back(std::make_unique<LBCLayer>(nm, s, config.bank_variances, LrGroup::Fresh,
                                                        config.fresh_init_std));
        else
            layers.push_back(
                std::make_unique<ConvLayer>(nm, s, true, LrGroup::Fresh, config.fresh_init_std));
    }

    void validate_chain() const {
        if (layers.empty()) throw ShapeError("network: empty layer chain");
        for (size_t i = 1; i < layers.size(); ++i)
            if (layers[i]->in_channels() != layers[i - 1]->out_channels())
                throw ShapeError("network: " + layers[i - 1]->name + " emits " +
                                 std::to_string(layers[i - 1]->out_channels()) + " channels but " +
                                 layers[i]->name + " expects " +
                                 std::to_string(layers[i]->in_channels()));
    }
};

}  // namespace deepfix
