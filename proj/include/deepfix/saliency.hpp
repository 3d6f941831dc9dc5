#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "deepfix/tensor.hpp"

namespace deepfix {

/// One recorded gaze point in pixel coordinates, x rightward, y downward.
struct Fixation {
    int x = 0, y = 0;
};

/// All fixations recorded for one image, with the image extents they refer to.
struct FixationSet {
    int height = 0, width = 0;
    std::vector<Fixation> points;

    void check_bounds() const {
        for (size_t i = 0; i < points.size(); ++i) {
            const Fixation& f = points[i];
            if (f.x < 0 || f.x >= width || f.y < 0 || f.y >= height)
                throw DataError("fixation " + std::to_string(i) + " at (" + std::to_string(f.x) +
                                "," + std::to_string(f.y) + ") outside " + std::to_string(width) +
                                "x" + std::to_string(height));
        }
    }
};

inline real map_sum(const Map2D& m) {
    real s = 0;
    for (real x : m.v) s += x;
    return s;
}

inline real map_mean(const Map2D& m) {
    if (m.v.empty()) throw ShapeError("map_mean: empty map");
    return map_sum(m) / static_cast<real>(m.v.size());
}

/// Population standard deviation.
inline real map_std(const Map2D& m) {
    const real mu = map_mean(m);
    real acc = 0;
    for (real x : m.v) {
        const real d = x - mu;
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<real>(m.v.size()));
}

/// Rescale to [0, 1]. A constant map comes back all zero.
inline Map2D minmax_normalize(const Map2D& m) {
    if (m.v.empty()) throw ShapeError("minmax_normalize: empty map");
    const auto [lo_it, hi_it] = std::minmax_element(m.v.begin(), m.v.end());
    const real lo = *lo_it, hi = *hi_it;
    Map2D out(m.height, m.width);
    if (hi > lo) {
        // divide rather than multiply by the reciprocal so the extremes land
        // exactly on 0 and 1
        const real range = hi - lo;
        for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = (m.v[i] - lo) / range;
    }
    return out;
}

/// Scale a non-negative map so its entries sum to one.
inline Map2D sum_normalize(const Map2D& m) {
    real s = 0;
    for (real x : m.v) {
        if (x < 0) throw NumericalError("sum_normalize: negative entry");
        s += x;
    }
    if (s <= 0) throw NumericalError("sum_normalize: map has no mass");
    Map2D out(m.height, m.width);
    const real inv = 1 / s;
    for (size_t i = 0; i < m.v.size(); ++i) out.v[i] = m.v[i] * inv;
    return out;
}

namespace detail {

inline Map2D box_downsample_impl(const Map2D& m, int factor, bool mean) {
    if (factor < 1) throw std::invalid_argument("box_downsample: factor must be >= 1");
    if (factor == 1) return m;
    const int oh = (m.height + factor - 1) / factor;
    const int ow = (m.width + factor - 1) / factor;
    Map2D out(oh, ow);
    for (int oy = 0; oy < oh; ++oy) {
        const int y0 = oy * factor, y1 = std::min(y0 + factor, m.height);
        for (int ox = 0; ox < ow; ++ox) {
            const int x0 = ox * factor, x1 = std::min(x0 + factor, m.width);
            real acc = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) acc += m.at(y, x);
            out.at(oy, ox) = mean ? acc / ((y1 - y0) * (x1 - x0)) : acc;
        }
    }
    return out;
}

}  // namespace detail

/// Average each factor-by-factor cell; ragged edge cells average what exists.
inline Map2D box_downsample(const Map2D& m, int factor) {
    return detail::box_downsample_impl(m, factor, true);
}

/// Sum each factor-by-factor cell, preserving total mass.
inline Map2D box_downsample_sum(const Map2D& m, int factor) {
    return detail::box_downsample_impl(m, factor, false);
}

/// Smallest uniform factor that brings both extents under the cap.
inline int downsample_factor_for_cap(int height, int width, int cap) {
    if (cap < 1) throw std::invalid_argument("downsample cap must be >= 1");
    int f = 1;
    while ((height + f - 1) / f > cap || (width + f - 1) / f > cap) ++f;
    return f;
}

/// Separable Gaussian smoothing, kernel truncated at three sigma. Near edges
/// the kernel renormalizes over in-bounds taps so mean level is preserved.
inline Map2D gaussian_blur(const Map2D& m, real sigma) {
    if (sigma < 0) throw std::invalid_argument("gaussian_blur: sigma must be >= 0");
    if (sigma == 0) return m;
    const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
    std::vector<real> k(static_cast<size_t>(2 * radius + 1));
    for (int i = -radius; i <= radius; ++i)
        k[i + radius] = std::exp(-static_cast<real>(i) * i / (2 * sigma * sigma));

    Map2D tmp(m.height, m.width), out(m.height, m.width);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            real acc = 0, wsum = 0;
            const int lo = std::max(-radius, -x), hi = std::min(radius, m.width - 1 - x);
            for (int i = lo; i <= hi; ++i) {
                acc += k[i + radius] * m.at(y, x + i);
                wsum += k[i + radius];
            }
            tmp.at(y, x) = acc / wsum;
        }
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x) {
            real acc = 0, wsum = 0;
            const int lo = std::max(-radius, -y), hi = std::min(radius, m.height - 1 - y);
            for (int i = lo; i <= hi; ++i) {
                acc += k[i + radius] * tmp.at(y + i, x);
                wsum += k[i + radius];
            }
            out.at(y, x) = acc / wsum;
        }
    return out;
}

/// Continuous ground truth from discrete fixations: impulse counts smoothed
/// with a Gaussian and rescaled to peak one.
inline Map2D fixation_density(const FixationSet& fix, real sigma) {
    fix.check_bounds();
    if (fix.points.empty()) throw DataError("fixation_density: no fixations");
    Map2D impulses(fix.height, fix.width);
    for (const Fixation& f : fix.points) impulses.at(f.y, f.x) += 1;
    return minmax_normalize(gaussian_blur(impulses, sigma));
}

}  // namespace deepfix
