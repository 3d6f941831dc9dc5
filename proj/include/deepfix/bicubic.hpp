#pragma once

#include <cmath>
#include <stdexcept>

#include "deepfix/tensor.hpp"

namespace deepfix {

/// Catmull-Rom cubic kernel (Keys, a = -0.5).
inline real catmull_rom(real t) {
    t = std::abs(t);
    if (t < 1) return ((real(1.5) * t - real(2.5)) * t) * t + real(1);
    if (t < 2) return ((real(-0.5) * t + real(2.5)) * t - real(4)) * t + real(2);
    return 0;
}

/// Bicubic resampling with pixel-center alignment and edge clamping.
inline Map2D bicubic_upsample(const Map2D& in, int out_h, int out_w) {
    if (in.height < 2 || in.width < 2)
        throw std::invalid_argument("bicubic_upsample: input must be at least 2x2");
    if (out_h < 1 || out_w < 1)
        throw std::invalid_argument("bicubic_upsample: output extents must be >= 1");

    Map2D out(out_h, out_w);
    const real sy_scale = static_cast<real>(in.height) / out_h;
    const real sx_scale = static_cast<real>(in.width) / out_w;

    for (int oy = 0; oy < out_h; ++oy) {
        const real sy = (oy + real(0.5)) * sy_scale - real(0.5);
        const int iy0 = static_cast<int>(std::floor(sy));
        const real fy = sy - iy0;
        real wy[4];
        for (int m = 0; m < 4; ++m) wy[m] = catmull_rom(fy - (m - 1));
        for (int ox = 0; ox < out_w; ++ox) {
            const real sx = (ox + real(0.5)) * sx_scale - real(0.5);
            const int ix0 = static_cast<int>(std::floor(sx));
            const real fx = sx - ix0;
            real wx[4];
            for (int m = 0; m < 4; ++m) wx[m] = catmull_rom(fx - (m - 1));
            real acc = 0;
            for (int m = 0; m < 4; ++m) {
                int y = iy0 - 1 + m;
                if (y < 0) y = 0;
                if (y > in.height - 1) y = in.height - 1;
                real row = 0;
                for (int k = 0; k < 4; ++k) {
                    int x = ix0 - 1 + k;
                    if (x < 0) x = 0;
                    if (x > in.width - 1) x = in.width - 1;
                    row += wx[k] * in.at(y, x);
                }
                acc += wy[m] * row;
            }
            out.at(oy, ox) = acc;
        }
    }
    return out;
}

}  // namespace deepfix
