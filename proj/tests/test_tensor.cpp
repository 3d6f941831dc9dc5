#include <gtest/gtest.h>

#include "deepfix/rng.hpp"
#include "deepfix/tensor.hpp"

using namespace deepfix;

TEST(Tensor, ShapeAndIndexing) {
    Tensor t(2, 3, 4, 5);
    EXPECT_EQ(t.size(), 2u * 3 * 4 * 5);
    t.at(1, 2, 3, 4) = 7.5;
    EXPECT_EQ(t.v.back(), 7.5);
    t.at(0, 0, 0, 0) = -1;
    EXPECT_EQ(t.v.front(), -1);
    EXPECT_EQ(t.index(0, 1, 0, 0), 20u);
    EXPECT_EQ(t.index(1, 0, 0, 0), 60u);
}

TEST(Tensor, NegativeExtentThrows) {
    EXPECT_THROW(Tensor(1, -1, 2, 2), ShapeError);
    EXPECT_THROW(Map2D(-1, 3), ShapeError);
}

TEST(Tensor, FillAndZerosLike) {
    Tensor t(1, 2, 2, 2);
    t.fill(3);
    for (real x : t.v) EXPECT_EQ(x, 3);
    Tensor z = Tensor::zeros_like(t);
    EXPECT_TRUE(z.same_shape(t));
    for (real x : z.v) EXPECT_EQ(x, 0);
}

TEST(Tensor, GradAllocation) {
    Tensor t(1, 1, 2, 2);
    EXPECT_FALSE(t.has_grad());
    t.alloc_grad();
    EXPECT_TRUE(t.has_grad());
    t.g[0] = 5;
    t.zero_grad();
    EXPECT_EQ(t.g[0], 0);
}

TEST(Tensor, CheckFiniteThrows) {
    Tensor t(1, 1, 1, 2);
    t.v[1] = std::numeric_limits<real>::quiet_NaN();
    EXPECT_THROW(t.check_finite("probe"), NumericalError);
}

TEST(Tensor, MapPlaneRoundTrip) {
    Tensor t(2, 3, 4, 5);
    for (size_t i = 0; i < t.v.size(); ++i) t.v[i] = static_cast<real>(i);
    Map2D m = map_from_plane(t, 1, 2);
    EXPECT_EQ(m.height, 4);
    EXPECT_EQ(m.width, 5);
    EXPECT_EQ(m.at(0, 0), t.at(1, 2, 0, 0));
    EXPECT_EQ(m.at(3, 4), t.at(1, 2, 3, 4));

    Tensor back(2, 3, 4, 5);
    plane_from_map(back, 1, 2, m);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x) EXPECT_EQ(back.at(1, 2, y, x), t.at(1, 2, y, x));
}

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(Rng, DifferentSeedsDiffer) {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 100; ++i)
        if (a.uniform() == b.uniform()) ++same;
    EXPECT_LT(same, 5);
}

TEST(Rng, DeriveSeparatesStreams) {
    EXPECT_NE(Rng::derive(7, 0), Rng::derive(7, 1));
    EXPECT_NE(Rng::derive(7, 0), Rng::derive(8, 0));
    EXPECT_EQ(Rng::derive(7, 3), Rng::derive(7, 3));
}

TEST(Rng, UniformIntInclusiveBounds) {
    Rng rng(3);
    bool saw_lo = false, saw_hi = false;
    for (int i = 0; i < 2000; ++i) {
        const int v = rng.uniform_int(2, 5);
        EXPECT_GE(v, 2);
        EXPECT_LE(v, 5);
        saw_lo = saw_lo || v == 2;
        saw_hi = saw_hi || v == 5;
    }
    EXPECT_TRUE(saw_lo);
    EXPECT_TRUE(saw_hi);
}

TEST(Rng, GaussianMoments) {
    Rng rng(11);
    const int n = 200000;
    real sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        const real x = rng.gaussian(2, 3);
        sum += x;
        sumsq += x * x;
    }
    const real mean = sum / n;
    const real var = sumsq / n - mean * mean;
    EXPECT_NEAR(mean, 2.0, 0.05);
    EXPECT_NEAR(std::sqrt(var), 3.0, 0.05);
}

TEST(Rng, UniformRangeRespected) {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const real v = rng.uniform(-1.5, 2.5);
        EXPECT_GE(v, -1.5);
        EXPECT_LT(v, 2.5);
    }
}
