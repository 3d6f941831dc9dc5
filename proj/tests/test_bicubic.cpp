#include <gtest/gtest.h>

#include "deepfix/bicubic.hpp"

using namespace deepfix;

TEST(CatmullRom, KernelKnots) {
    EXPECT_EQ(catmull_rom(0), 1.0);
    EXPECT_EQ(catmull_rom(1), 0.0);
    EXPECT_EQ(catmull_rom(2), 0.0);
    EXPECT_EQ(catmull_rom(3), 0.0);
    EXPECT_EQ(catmull_rom(0.5), catmull_rom(-0.5));
    EXPECT_EQ(catmull_rom(1.5), catmull_rom(-1.5));
}

TEST(CatmullRom, PartitionOfUnity) {
    // weights at the four taps around any sampling phase sum to one
    for (real t = 0; t < 1.0; t += 0.0625) {
        const real s = catmull_rom(t + 1) + catmull_rom(t) + catmull_rom(t - 1) + catmull_rom(t - 2);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Bicubic, ConstantIsExact) {
    Map2D in(5, 7);
    for (real& x : in.v) x = 3.25;
    const Map2D out = bicubic_upsample(in, 40, 56);
    ASSERT_EQ(out.height, 40);
    ASSERT_EQ(out.width, 56);
    for (real x : out.v) EXPECT_NEAR(x, 3.25, 1e-12);
}

TEST(Bicubic, LinearRampReproducedOnInterior) {
    Map2D in(6, 8);
    for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 8; ++x) in.at(y, x) = 0.5 + 0.25 * y + 0.125 * x;

    const int f = 8;
    const Map2D out = bicubic_upsample(in, 6 * f, 8 * f);
    // half-pixel alignment maps output center (oy+0.5)/f - 0.5 onto input coords
    int checked = 0;
    for (int oy = 0; oy < out.height; ++oy) {
        const real sy = (oy + 0.5) / f - 0.5;
        if (sy < 1 || sy > 4) continue;  // stay away from the clamped borders
        for (int ox = 0; ox < out.width; ++ox) {
            const real sx = (ox + 0.5) / f - 0.5;
            if (sx < 1 || sx > 6) continue;
            const real want = 0.5 + 0.25 * sy + 0.125 * sx;
            EXPECT_NEAR(out.at(oy, ox), want, 1e-6);
            ++checked;
        }
    }
    EXPECT_GT(checked, 500);
}

TEST(Bicubic, FourByFourToThirtyTwo) {
    Map2D in(4, 4);
    for (size_t i = 0; i < in.v.size(); ++i) in.v[i] = static_cast<real>(i);
    const Map2D out = bicubic_upsample(in, 32, 32);
    EXPECT_EQ(out.height, 32);
    EXPECT_EQ(out.width, 32);
}

TEST(Bicubic, NetworkOutputGridToInputGrid) {
    Map2D in(6, 8);
    for (size_t i = 0; i < in.v.size(); ++i) in.v[i] = static_cast<real>(i % 5);
    const Map2D out = bicubic_upsample(in, 48, 64);
    EXPECT_EQ(out.height, 48);
    EXPECT_EQ(out.width, 64);
}

TEST(Bicubic, IdentityResolutionKeepsValues) {
    Map2D in(5, 5);
    for (size_t i = 0; i < in.v.size(); ++i) in.v[i] = static_cast<real>(i) * 0.3;
    const Map2D out = bicubic_upsample(in, 5, 5);
    for (size_t i = 0; i < in.v.size(); ++i) EXPECT_NEAR(out.v[i], in.v[i], 1e-12);
}

TEST(Bicubic, RejectsTinyInput) {
    Map2D in(1, 5);
    EXPECT_THROW(bicubic_upsample(in, 8, 8), std::invalid_argument);
    Map2D ok(2, 2);
    EXPECT_NO_THROW(bicubic_upsample(ok, 4, 4));
}
