#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "deepfix/image_io.hpp"
#include "deepfix/rng.hpp"
#include "deepfix/saliency.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

// ---------------------------------------------------------------------------
// manifest
// ---------------------------------------------------------------------------

/// One dataset row: a split tag plus relative paths. Empty map or fixation
/// path means the record carries none.
struct ManifestRecord {
    std::string split;
    std::string image, map, fix;
};

struct Manifest {
    bool has_seed = false;
    uint64_t seed = 0;
    std::vector<ManifestRecord> records;
    std::string dir;  // directory the relative paths resolve against
};

inline bool valid_split(const std::string& s) {
    return s == "train" || s == "val" || s == "test";
}

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    for (;;) {
        const size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
}

inline Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open for reading");
    Manifest m;
    m.dir = std::filesystem::path(path).parent_path().string();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const std::vector<std::string> f = split_tabs(line);
        if (f[0] == "seed") {
            if (f.size() != 2)
                throw DataError(path + ":" + std::to_string(lineno) + ": seed line needs one value");
            try {
                m.seed = std::stoull(f[1]);
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(lineno) + ": bad seed '" + f[1] + "'");
            }
            m.has_seed = true;
            continue;
        }
        if (f.size() != 4)
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected 'split<TAB>image<TAB>map<TAB>fixations'");
        if (!valid_split(f[0]))
            throw DataError(path + ":" + std::to_string(lineno) + ": unknown split '" + f[0] + "'");
        if (f[1].empty() || f[1] == "-")
            throw DataError(path + ":" + std::to_string(lineno) + ": record has no image");
        ManifestRecord rec;
        rec.split = f[0];
        rec.image = f[1];
        rec.map = f[2] == "-" ? "" : f[2];
        rec.fix = f[3] == "-" ? "" : f[3];
        m.records.push_back(std::move(rec));
    }
    return m;
}

inline void save_manifest(const std::string& path, const Manifest& m) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    if (m.has_seed) out << "seed\t" << m.seed << "\n";
    for (const ManifestRecord& r : m.records)
        out << r.split << "\t" << r.image << "\t" << (r.map.empty() ? "-" : r.map) << "\t"
            << (r.fix.empty() ? "-" : r.fix) << "\n";
    if (!out) throw DataError(path + ": write failed");
}

inline std::string resolve_path(const Manifest& m, const std::string& rel) {
    if (m.dir.empty()) return rel;
    return (std::filesystem::path(m.dir) / rel).string();
}

// ---------------------------------------------------------------------------
// sample loading
// ---------------------------------------------------------------------------

/// One record pulled into memory: image cropped to multiples of eight, map
/// min-max normalized and cropped alike, fixations shifted into the crop.
struct LoadedSample {
    std::string id;
    Tensor image;    // (1,3,H,W)
    Map2D map;       // empty when the record has none
    FixationSet fix; // width 0 when the record has none
};

inline LoadedSample load_sample(const Manifest& m, const ManifestRecord& rec) {
    LoadedSample s;
    s.id = rec.image;
    const Tensor raw = load_image_ppm(resolve_path(m, rec.image));
    const CropGeom geom = center_crop_geom(raw.h, raw.w, 8);
    s.image = crop_tensor(raw, geom);
    if (!rec.map.empty()) {
        Map2D map = load_map_pgm16(resolve_path(m, rec.map));
        if (map.height != raw.h || map.width != raw.w)
            throw DataError(rec.map + ": map is " + std::to_string(map.width) + "x" +
                            std::to_string(map.height) + ", image is " + std::to_string(raw.w) +
                            "x" + std::to_string(raw.h));
        s.map = crop_map(minmax_normalize(map), geom);
    }
    if (!rec.fix.empty()) {
        const FixationSet fix = load_fixations(resolve_path(m, rec.fix), raw.h, raw.w);
        s.fix = crop_fixations(fix, geom);
    }
    return s;
}

inline std::vector<const ManifestRecord*> split_records(const Manifest& m,
                                                        const std::string& split) {
    std::vector<const ManifestRecord*> out;
    for (const ManifestRecord& r : m.records)
        if (r.split == split) out.push_back(&r);
    return out;
}

// ---------------------------------------------------------------------------
// synthetic dataset
// ---------------------------------------------------------------------------

struct SynthOptions {
    int train = 0, val = 0, test = 0;
    int height = 48, width = 64;
    real strength = 0.7;  // share of fixations drawn from the center Gaussian
    uint64_t seed = 1;
};

struct SynthObject {
    real cx = 0, cy = 0, radius = 0;
    bool disc = true;
};

/// One generated scene before quantization to files.
struct SynthSample {
    Tensor image;
    Map2D map;
    FixationSet fix;
    std::vector<SynthObject> objects;
};

constexpr real kSynthCenterSigma = 0.18;  // center prior spread, fraction of extent
constexpr real kSynthBlurSigma = 0.07;    // ground-truth blur, fraction of min extent

/// Paint a gradient-plus-stripes background, drop one to three colored shapes
/// on it, then sample fixations from the mixture of a center Gaussian (with
/// probability `strength`) and Gaussian jitter around a random object.
inline SynthSample synth_sample(int height, int width, real strength, Rng& rng) {
    if (height < 8 || width < 8) throw std::invalid_argument("synth: extents must be >= 8");
    if (strength < 0 || strength > 1) throw std::invalid_argument("synth: strength must be in [0,1]");
    SynthSample s;
    s.image = Tensor(1, 3, height, width);

    real c0[3], c1[3];
    for (int ch = 0; ch < 3; ++ch) {
        c0[ch] = rng.uniform(0.05, 0.45);
        c1[ch] = rng.uniform(0.05, 0.45);
    }
    const bool horizontal = rng.uniform() < 0.5;
    const real freq = rng.uniform(2, 6), phase = rng.uniform(0, 6.28318530717958648);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const real t = horizontal ? static_cast<real>(x) / (width - 1)
                                      : static_cast<real>(y) / (height - 1);
            const real stripe =
                0.03 * std::sin(freq * 6.28318530717958648 * static_cast<real>(x + y) /
                                    (width + height) + phase);
            for (int ch = 0; ch < 3; ++ch)
                s.image.at(0, ch, y, x) = c0[ch] + (c1[ch] - c0[ch]) * t + stripe;
        }

    const int k = rng.uniform_int(1, 3);
    const real min_ext = static_cast<real>(std::min(height, width));
    for (int i = 0; i < k; ++i) {
        SynthObject obj;
        obj.cx = rng.uniform(0.15, 0.85) * (width - 1);
        obj.cy = rng.uniform(0.15, 0.85) * (height - 1);
        obj.radius = rng.uniform(0.08, 0.16) * min_ext;
        obj.disc = rng.uniform() < 0.5;
        real col[3];
        for (int ch = 0; ch < 3; ++ch) col[ch] = rng.uniform(0.55, 1.0);
        const int x0 = std::max(0, static_cast<int>(std::floor(obj.cx - obj.radius)));
        const int x1 = std::min(width - 1, static_cast<int>(std::ceil(obj.cx + obj.radius)));
        const int y0 = std::max(0, static_cast<int>(std::floor(obj.cy - obj.radius)));
        const int y1 = std::min(height - 1, static_cast<int>(std::ceil(obj.cy + obj.radius)));
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                const real dx = x - obj.cx, dy = y - obj.cy;
                const bool inside = obj.disc ? dx * dx + dy * dy <= obj.radius * obj.radius
                                             : std::abs(dx) <= obj.radius &&
                                                   std::abs(dy) <= obj.radius;
                if (inside)
                    for (int ch = 0; ch < 3; ++ch) s.image.at(0, ch, y, x) = col[ch];
            }
        s.objects.push_back(obj);
    }

    auto draw_point = [&](real mx, real my, real sx, real sy) {
        for (int tries = 0; tries < 64; ++tries) {
            const real x = rng.gaussian(mx, sx), y = rng.gaussian(my, sy);
            if (x >= 0 && x <= width - 1 && y >= 0 && y <= height - 1)
                return Fixation{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
        }
        return Fixation{static_cast<int>(std::lround(std::clamp(mx, real(0), real(width - 1)))),
                        static_cast<int>(std::lround(std::clamp(my, real(0), real(height - 1))))};
    };

    s.fix.height = height;
    s.fix.width = width;
    const int nf = rng.uniform_int(10, 20);
    const real ccx = (width - 1) / real(2), ccy = (height - 1) / real(2);
    for (int i = 0; i < nf; ++i) {
        if (rng.uniform() < strength) {
            s.fix.points.push_back(
                draw_point(ccx, ccy, kSynthCenterSigma * width, kSynthCenterSigma * height));
        } else {
            const SynthObject& obj = s.objects[static_cast<size_t>(rng.uniform_int(0, k - 1))];
            const real jitter = obj.radius / 2;
            s.fix.points.push_back(draw_point(obj.cx, obj.cy, jitter, jitter));
        }
    }

    s.map = fixation_density(s.fix, kSynthBlurSigma * min_ext);
    return s;
}

namespace detail {

inline std::string index_name(const char* prefix, int i, const char* ext) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%04d.%s", prefix, i, ext);
    return buf;
}

}  // namespace detail

/// Write a fully reproducible synthetic dataset (images, maps, fixation
/// lists, manifest) into the given directory. Each sample draws from its own
/// stream derived from the dataset seed, so content is order-independent.
inline Manifest generate_synthetic_dataset(const std::string& dir, const SynthOptions& opts) {
    if (opts.train + opts.val + opts.test < 1)
        throw std::invalid_argument("synthetic dataset needs at least one sample");
    std::filesystem::create_directories(dir);
    Manifest m;
    m.dir = dir;
    m.has_seed = true;
    m.seed = opts.seed;
    const int total = opts.train + opts.val + opts.test;
    for (int i = 0; i < total; ++i) {
        Rng rng(Rng::derive(opts.seed, static_cast<uint64_t>(i)));
        const SynthSample s = synth_sample(opts.height, opts.width, opts.strength, rng);
        ManifestRecord rec;
        rec.split = i < opts.train ? "train" : (i < opts.train + opts.val ? "val" : "test");
        rec.image = detail::index_name("img", i, "ppm");
        rec.map = detail::index_name("map", i, "pgm");
        rec.fix = detail::index_name("fix", i, "txt");
        save_image_ppm(resolve_path(m, rec.image), s.image);
        save_map_pgm16(resolve_path(m, rec.map), s.map);
        save_fixations(resolve_path(m, rec.fix), s.fix);
        m.records.push_back(std::move(rec));
    }
    save_manifest((std::filesystem::path(dir) / "manifest.tsv").string(), m);
    return m;
}

}  // namespace deepfix
