#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "deepfix/layers.hpp"

namespace deepfix {

struct OptimizerOptions {
    real lr_pretrained = 2e-4;
    real lr_fresh = 2e-3;
    real momentum = 0.9;
    real weight_decay = 0.0005;
    real plateau_drop = 5;         // divide both rates by this on saturation
    int plateau_window = 3;        // evaluations without improvement before a drop
    real plateau_rel_eps = 0.005;  // smallest relative improvement that counts
};

/// Momentum SGD over two rate groups, with a step-down schedule driven by
/// validation loss saturation.
class Optimizer {
public:
    OptimizerOptions opts;
    real lr_pretrained, lr_fresh;

    explicit Optimizer(OptimizerOptions o = {})
        : opts(o), lr_pretrained(o.lr_pretrained), lr_fresh(o.lr_fresh) {}

    /// v <- momentum * v - lr * (g + wd * w); w <- w + v
    void step(const std::vector<ParamRef>& params) {
        for (const ParamRef& p : params) {
            const real lr = p.group == LrGroup::Pretrained ? lr_pretrained : lr_fresh;
            std::vector<real>& w = *p.value;
            std::vector<real>& g = *p.grad;
            std::vector<real>& v = *p.momentum;
            for (size_t i = 0; i < w.size(); ++i) {
                if (!std::isfinite(g[i]))
                    throw NumericalError("optimizer: non-finite gradient in " + p.name);
                v[i] = opts.momentum * v[i] - lr * (g[i] + opts.weight_decay * w[i]);
                w[i] += v[i];
            }
        }
    }

    /// Feed one validation loss; drops both rates when the loss has failed to
    /// improve by the relative threshold for a full window. Returns whether a
    /// drop happened.
    bool observe_validation(real val_loss) {
        if (!std::isfinite(val_loss)) throw NumericalError("optimizer: non-finite validation loss");
        if (val_loss < best_ * (1 - opts.plateau_rel_eps)) {
            best_ = val_loss;
            stale_ = 0;
            return false;
        }
        if (++stale_ < opts.plateau_window) return false;
        lr_pretrained /= opts.plateau_drop;
        lr_fresh /= opts.plateau_drop;
        ++decays_;
        stale_ = 0;
        return true;
    }

    int decays() const { return decays_; }
    real best_validation() const { return best_; }

private:
    real best_ = std::numeric_limits<real>::infinity();
    int stale_ = 0;
    int decays_ = 0;
};

}  // namespace deepfix
