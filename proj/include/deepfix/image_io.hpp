#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deepfix/saliency.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

namespace detail {

inline int pnm_token_int(std::istream& in, const std::string& path) {
    // skip whitespace and '#' comments between header tokens
    for (;;) {
        const int c = in.peek();
        if (c == EOF) throw DataError(path + ": truncated header");
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            continue;
        }
        break;
    }
    int value = 0;
    if (!(in >> value) || value < 0) throw DataError(path + ": bad header token");
    return value;
}

inline std::vector<unsigned char> pnm_payload(std::istream& in, const std::string& path,
                                              size_t bytes) {
    const int sep = in.get();  // single whitespace byte ends the header
    if (sep == EOF || !std::isspace(sep)) throw DataError(path + ": missing header terminator");
    std::vector<unsigned char> data(bytes);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<size_t>(in.gcount()) != bytes)
        throw DataError(path + ": short pixel payload, expected " + std::to_string(bytes) +
                        " bytes");
    return data;
}

inline std::ifstream open_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(path + ": cannot open for reading");
    return in;
}

inline std::ofstream create_binary(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    return out;
}

inline unsigned char quantize8(real x) {
    const real c = x < 0 ? 0 : (x > 1 ? 1 : x);
    return static_cast<unsigned char>(std::lround(c * 255));
}

}  // namespace detail

/// Read a binary RGB image into a (1,3,H,W) tensor with values in [0,1].
inline Tensor load_image_ppm(const std::string& path) {
    std::ifstream in = detail::open_binary(path);
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '6') throw DataError(path + ": not a binary P6 image");
    const int w = detail::pnm_token_int(in, path);
    const int h = detail::pnm_token_int(in, path);
    const int maxval = detail::pnm_token_int(in, path);
    if (w < 1 || h < 1) throw DataError(path + ": bad image extents");
    if (maxval != 255) throw DataError(path + ": unsupported max value " + std::to_string(maxval));
    const auto data = detail::pnm_payload(in, path, static_cast<size_t>(w) * h * 3);
    Tensor img(1, 3, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const size_t o = (static_cast<size_t>(y) * w + x) * 3;
            for (int ch = 0; ch < 3; ++ch)
                img.at(0, ch, y, x) = static_cast<real>(data[o + ch]) / 255;
        }
    return img;
}

inline void save_image_ppm(const std::string& path, const Tensor& img) {
    if (img.n != 1 || img.c != 3) throw ShapeError("save_image_ppm: tensor must be (1,3,H,W)");
    std::ofstream out = detail::create_binary(path);
    out << "P6\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> data(static_cast<size_t>(img.w) * img.h * 3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const size_t o = (static_cast<size_t>(y) * img.w + x) * 3;
            for (int ch = 0; ch < 3; ++ch) data[o + ch] = detail::quantize8(img.at(0, ch, y, x));
        }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError(path + ": write failed");
}

/// Read a 16-bit grayscale map; sample bytes are big-endian, values map to [0,1].
inline Map2D load_map_pgm16(const std::string& path) {
    std::ifstream in = detail::open_binary(path);
    char m0 = 0, m1 = 0;
    in.get(m0).get(m1);
    if (m0 != 'P' || m1 != '5') throw DataError(path + ": not a binary P5 map");
    const int w = detail::pnm_token_int(in, path);
    const int h = detail::pnm_token_int(in, path);
    const int maxval = detail::pnm_token_int(in, path);
    if (w < 1 || h < 1) throw DataError(path + ": bad map extents");
    if (maxval != 65535)
        throw DataError(path + ": unsupported max value " + std::to_string(maxval) +
                        " (expected 65535)");
    const auto data = detail::pnm_payload(in, path, static_cast<size_t>(w) * h * 2);
    Map2D m(h, w);
    for (size_t i = 0; i < m.v.size(); ++i) {
        const unsigned hi = data[2 * i], lo = data[2 * i + 1];
        m.v[i] = static_cast<real>((hi << 8) | lo) / 65535;
    }
    return m;
}

inline void save_map_pgm16(const std::string& path, const Map2D& m) {
    if (m.v.empty()) throw ShapeError("save_map_pgm16: empty map");
    std::ofstream out = detail::create_binary(path);
    out << "P5\n" << m.width << " " << m.height << "\n65535\n";
    std::vector<unsigned char> data(m.v.size() * 2);
    for (size_t i = 0; i < m.v.size(); ++i) {
        const real c = m.v[i] < 0 ? 0 : (m.v[i] > 1 ? 1 : m.v[i]);
        const unsigned q = static_cast<unsigned>(std::lround(c * 65535));
        data[2 * i] = static_cast<unsigned char>(q >> 8);
        data[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
    }
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError(path + ": write failed");
}

/// Write an 8-bit preview of a map, clamped to [0,1].
inline void save_heatmap_pgm8(const std::string& path, const Map2D& m) {
    if (m.v.empty()) throw ShapeError("save_heatmap_pgm8: empty map");
    std::ofstream out = detail::create_binary(path);
    out << "P5\n" << m.width << " " << m.height << "\n255\n";
    std::vector<unsigned char> data(m.v.size());
    for (size_t i = 0; i < m.v.size(); ++i) data[i] = detail::quantize8(m.v[i]);
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!out) throw DataError(path + ": write failed");
}

/// Read "x,y" lines; '#' starts a comment, blank lines are skipped. Every
/// point is checked against the given extents and reported with its line.
inline FixationSet load_fixations(const std::string& path, int height, int width) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open for reading");
    FixationSet fix;
    fix.height = height;
    fix.width = width;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        size_t a = line.find_first_not_of(" \t\r");
        if (a == std::string::npos) continue;
        int x = 0, y = 0;
        char comma = 0;
        std::istringstream ls(line);
        if (!(ls >> x >> comma >> y) || comma != ',')
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 'x,y'");
        std::string trailing;
        if (ls >> trailing)
            throw DataError(path + ":" + std::to_string(lineno) + ": trailing content '" +
                            trailing + "'");
        if (x < 0 || x >= width || y < 0 || y >= height)
            throw DataError(path + ":" + std::to_string(lineno) + ": fixation (" +
                            std::to_string(x) + "," + std::to_string(y) + ") outside " +
                            std::to_string(width) + "x" + std::to_string(height));
        fix.points.push_back({x, y});
    }
    return fix;
}

inline void save_fixations(const std::string& path, const FixationSet& fix) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError(path + ": cannot open for writing");
    for (const Fixation& f : fix.points) out << f.x << "," << f.y << "\n";
    if (!out) throw DataError(path + ": write failed");
}

/// Centered crop geometry that trims both extents down to multiples of the
/// given unit.
struct CropGeom {
    int off_y = 0, off_x = 0;
    int out_h = 0, out_w = 0;
};

inline CropGeom center_crop_geom(int height, int width, int multiple) {
    if (multiple < 1) throw std::invalid_argument("center_crop_geom: multiple must be >= 1");
    CropGeom g;
    g.out_h = (height / multiple) * multiple;
    g.out_w = (width / multiple) * multiple;
    if (g.out_h < multiple || g.out_w < multiple)
        throw DataError("image " + std::to_string(width) + "x" + std::to_string(height) +
                        " smaller than one " + std::to_string(multiple) + "-pixel unit");
    g.off_y = (height - g.out_h) / 2;
    g.off_x = (width - g.out_w) / 2;
    return g;
}

inline Tensor crop_tensor(const Tensor& t, const CropGeom& g) {
    Tensor out(t.n, t.c, g.out_h, g.out_w);
    for (int b = 0; b < t.n; ++b)
        for (int ch = 0; ch < t.c; ++ch)
            for (int y = 0; y < g.out_h; ++y)
                for (int x = 0; x < g.out_w; ++x)
                    out.at(b, ch, y, x) = t.at(b, ch, y + g.off_y, x + g.off_x);
    return out;
}

inline Map2D crop_map(const Map2D& m, const CropGeom& g) {
    Map2D out(g.out_h, g.out_w);
    for (int y = 0; y < g.out_h; ++y)
        for (int x = 0; x < g.out_w; ++x) out.at(y, x) = m.at(y + g.off_y, x + g.off_x);
    return out;
}

/// Shift fixations into the cropped frame, dropping any that fall outside.
inline FixationSet crop_fixations(const FixationSet& fix, const CropGeom& g) {
    FixationSet out;
    out.height = g.out_h;
    out.width = g.out_w;
    for (const Fixation& f : fix.points) {
        const int x = f.x - g.off_x, y = f.y - g.off_y;
        if (x >= 0 && x < g.out_w && y >= 0 && y < g.out_h) out.points.push_back({x, y});
    }
    return out;
}

}  // namespace deepfix
