#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "deepfix/tensor.hpp"

namespace deepfix {

/// Constant bank of centered Gaussian maps concatenated to the input of
/// location-biased convolution layers. Maps are fixed for the lifetime of a
/// model; only the weights reading them are learned.
struct LocationFeatureBank {
    int height = 0, width = 0;
    std::vector<std::pair<real, real>> variances;  // (sigma_x^2, sigma_y^2), normalized extents
    std::vector<Map2D> maps;

    size_t count() const { return maps.size(); }
};

constexpr int kLocationBankSize = 16;

/// 4x4 Cartesian grid of per-axis spreads, as squared normalized extents.
inline std::vector<std::pair<real, real>> default_variance_grid() {
    const real sigmas[4] = {0.08, 0.16, 0.32, 0.64};
    std::vector<std::pair<real, real>> grid;
    grid.reserve(kLocationBankSize);
    for (real sx : sigmas)
        for (real sy : sigmas) grid.emplace_back(sx * sx, sy * sy);
    return grid;
}

/// Each map is exp(-((x-cx)^2 / (2 vx W^2) + (y-cy)^2 / (2 vy H^2))) with the
/// continuous center c = ((W-1)/2, (H-1)/2), so the peak value is 1 and every
/// map is symmetric under horizontal and vertical reflection.
inline LocationFeatureBank make_location_bank(int height, int width,
                                              const std::vector<std::pair<real, real>>& variances) {
    if (height < 1 || width < 1)
        throw std::invalid_argument("location bank: extents must be >= 1");
    if (variances.empty()) throw std::invalid_argument("location bank: no variance pairs");
    LocationFeatureBank bank;
    bank.height = height;
    bank.width = width;
    bank.variances = variances;
    const real cx = (width - 1) / real(2);
    const real cy = (height - 1) / real(2);
    for (const auto& [vx, vy] : variances) {
        if (vx <= 0 || vy <= 0) throw std::invalid_argument("location bank: non-positive variance");
        Map2D m(height, width);
        const real inv_x = real(1) / (2 * vx * static_cast<real>(width) * width);
        const real inv_y = real(1) / (2 * vy * static_cast<real>(height) * height);
        for (int y = 0; y < height; ++y) {
            const real dy2 = (y - cy) * (y - cy) * inv_y;
            for (int x = 0; x < width; ++x) {
                const real dx2 = (x - cx) * (x - cx) * inv_x;
                m.at(y, x) = std::exp(-(dx2 + dy2));
            }
        }
        bank.maps.push_back(std::move(m));
    }
    return bank;
}

/// Bank planes stacked as a (1, 16, H, W) tensor for convolution.
inline Tensor bank_tensor(const LocationFeatureBank& bank) {
    Tensor t(1, static_cast<int>(bank.count()), bank.height, bank.width);
    for (size_t i = 0; i < bank.count(); ++i) plane_from_map(t, 0, static_cast<int>(i), bank.maps[i]);
    return t;
}

}  // namespace deepfix
