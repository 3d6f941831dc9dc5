#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "deepfix/optimizer.hpp"

using namespace deepfix;

namespace {

/// One flat parameter with its buffers, wired the way layers expose them.
struct Param {
    std::string name;
    LrGroup group;
    std::vector<real> value, grad, momentum;

    Param(std::string n, LrGroup g, std::vector<real> w)
        : name(std::move(n)), group(g), value(std::move(w)) {
        grad.assign(value.size(), 0);
        momentum.assign(value.size(), 0);
    }

    ParamRef ref() { return {name, group, &value, &grad, &momentum}; }
};

OptimizerOptions plain(real lr_pre, real lr_fresh, real momentum = 0, real wd = 0) {
    OptimizerOptions o;
    o.lr_pretrained = lr_pre;
    o.lr_fresh = lr_fresh;
    o.momentum = momentum;
    o.weight_decay = wd;
    return o;
}

}  // namespace

TEST(Optimizer, SingleStepClosedForm) {
    Param p("p.weight", LrGroup::Fresh, {1.0});
    p.grad[0] = 1.0;
    Optimizer opt(plain(0.01, 0.1));
    opt.step({p.ref()});
    EXPECT_NEAR(p.value[0], 0.9, 1e-15);
    EXPECT_NEAR(p.momentum[0], -0.1, 1e-15);
}

TEST(Optimizer, MomentumAccumulatesOverSteps) {
    Param p("p.weight", LrGroup::Fresh, {0.0});
    Optimizer opt(plain(0.01, 0.1, 0.9));
    for (int i = 0; i < 3; ++i) {
        p.grad[0] = 1.0;
        opt.step({p.ref()});
    }
    // v: -0.1, -0.19, -0.271; w accumulates their sum
    EXPECT_NEAR(p.momentum[0], -0.271, 1e-12);
    EXPECT_NEAR(p.value[0], -0.561, 1e-12);
}

TEST(Optimizer, GroupsUseTheirOwnRate) {
    Param pre("trunk.weight", LrGroup::Pretrained, {1.0});
    Param fresh("head.weight", LrGroup::Fresh, {1.0});
    pre.grad[0] = fresh.grad[0] = 1.0;
    Optimizer opt(plain(0.01, 0.1));
    opt.step({pre.ref(), fresh.ref()});
    EXPECT_NEAR(pre.value[0], 0.99, 1e-15);
    EXPECT_NEAR(fresh.value[0], 0.9, 1e-15);
}

TEST(Optimizer, WeightDecayAloneShrinksGeometrically) {
    Param p("p.weight", LrGroup::Fresh, {2.0});
    Optimizer opt(plain(0.01, 0.1, 0, 0.5));
    for (int i = 0; i < 3; ++i) {
        p.grad[0] = 0;
        opt.step({p.ref()});
    }
    EXPECT_NEAR(p.value[0], 2.0 * 0.95 * 0.95 * 0.95, 1e-12);
}

TEST(Optimizer, NothingMovesWithoutGradOrDecay) {
    Param p("p.weight", LrGroup::Fresh, {1.5, -2.5});
    Optimizer opt(plain(0.01, 0.1));
    opt.step({p.ref()});
    EXPECT_EQ(p.value[0], 1.5);
    EXPECT_EQ(p.value[1], -2.5);
    EXPECT_EQ(p.momentum[0], 0);
}

TEST(Optimizer, NonFiniteGradientNamesTheParameter) {
    Param p("conv3_1.weight", LrGroup::Fresh, {1.0});
    p.grad[0] = std::numeric_limits<real>::quiet_NaN();
    Optimizer opt;
    try {
        opt.step({p.ref()});
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("conv3_1.weight"), std::string::npos);
    }
}

TEST(Optimizer, PlateauDropsBothRatesTogether) {
    Optimizer opt;
    const real ratio = opt.lr_fresh / opt.lr_pretrained;
    EXPECT_FALSE(opt.observe_validation(1.0));  // becomes best
    EXPECT_FALSE(opt.observe_validation(1.0));
    EXPECT_FALSE(opt.observe_validation(1.0));
    EXPECT_TRUE(opt.observe_validation(1.0));  // window of 3 stale evals
    EXPECT_EQ(opt.decays(), 1);
    EXPECT_NEAR(opt.lr_pretrained, opt.opts.lr_pretrained / 5, 1e-18);
    EXPECT_NEAR(opt.lr_fresh, opt.opts.lr_fresh / 5, 1e-18);
    EXPECT_NEAR(opt.lr_fresh / opt.lr_pretrained, ratio, 1e-12);

    for (int i = 0; i < 2; ++i) EXPECT_FALSE(opt.observe_validation(1.0));
    EXPECT_TRUE(opt.observe_validation(1.0));
    EXPECT_EQ(opt.decays(), 2);
    EXPECT_NEAR(opt.lr_fresh, opt.opts.lr_fresh / 25, 1e-18);
}

TEST(Optimizer, RealImprovementResetsTheWindow) {
    Optimizer opt;
    EXPECT_FALSE(opt.observe_validation(1.0));
    EXPECT_FALSE(opt.observe_validation(1.0));   // stale 1
    EXPECT_FALSE(opt.observe_validation(0.9));   // clear improvement, reset
    EXPECT_FALSE(opt.observe_validation(0.9));
    EXPECT_FALSE(opt.observe_validation(0.9));
    EXPECT_EQ(opt.decays(), 0);
    EXPECT_EQ(opt.lr_fresh, opt.opts.lr_fresh);
    EXPECT_EQ(opt.best_validation(), 0.9);
}

TEST(Optimizer, TinyImprovementsStillCountAsStale) {
    Optimizer opt;
    EXPECT_FALSE(opt.observe_validation(1.0));
    EXPECT_FALSE(opt.observe_validation(0.999));  // under the 0.5% bar
    EXPECT_FALSE(opt.observe_validation(0.998));
    EXPECT_TRUE(opt.observe_validation(0.9985));
    EXPECT_EQ(opt.decays(), 1);
}

TEST(Optimizer, NonFiniteValidationLossIsRejected) {
    Optimizer opt;
    EXPECT_THROW(opt.observe_validation(std::numeric_limits<real>::infinity()), NumericalError);
}

TEST(Optimizer, StepsAfterADropUseTheReducedRate) {
    Optimizer opt(plain(0.01, 0.1));
    for (int i = 0; i < 4; ++i) opt.observe_validation(1.0);
    ASSERT_EQ(opt.decays(), 1);
    Param p("p.weight", LrGroup::Fresh, {1.0});
    p.grad[0] = 1.0;
    opt.step({p.ref()});
    EXPECT_NEAR(p.value[0], 1.0 - 0.1 / 5, 1e-15);
}
