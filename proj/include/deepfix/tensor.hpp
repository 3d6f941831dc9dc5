#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace deepfix {

using real = double;

/// Raised on mismatched tensor geometry. The message names the offending axis.
class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& msg) : std::runtime_error("shape error: " + msg) {}
};

/// Raised when a computation produces or receives non-finite values.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& msg) : std::runtime_error("numerical error: " + msg) {}
};

/// Raised on malformed or inconsistent external data (files, manifests, configs).
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

/// Dense 4-axis array in (batch, channel, height, width) order with an
/// optional gradient buffer of identical length.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<real> v;
    std::vector<real> g;  // empty unless gradients are tracked

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
        if (n_ < 0 || c_ < 0 || h_ < 0 || w_ < 0)
            throw ShapeError("negative tensor extent (" + shape_str_of(n_, c_, h_, w_) + ")");
        v.assign(static_cast<size_t>(n_) * c_ * h_ * w_, real(0));
    }

    size_t size() const { return v.size(); }
    bool empty() const { return v.empty(); }

    size_t index(int b, int ch, int y, int x) const {
        return ((static_cast<size_t>(b) * c + ch) * h + y) * w + x;
    }
    real& at(int b, int ch, int y, int x) { return v[index(b, ch, y, x)]; }
    real at(int b, int ch, int y, int x) const { return v[index(b, ch, y, x)]; }

    real* plane(int b, int ch) { return v.data() + index(b, ch, 0, 0); }
    const real* plane(int b, int ch) const { return v.data() + index(b, ch, 0, 0); }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    bool has_grad() const { return !g.empty(); }
    void alloc_grad() { g.assign(v.size(), real(0)); }
    void zero_grad() {
        if (!g.empty()) std::fill(g.begin(), g.end(), real(0));
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.n, t.c, t.h, t.w); }

    void fill(real value) { std::fill(v.begin(), v.end(), value); }

    static std::string shape_str_of(int n, int c, int h, int w) {
        return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
               std::to_string(w) + ")";
    }
    std::string shape_str() const { return shape_str_of(n, c, h, w); }

    void check_finite(const char* what) const {
        for (real x : v)
            if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite value");
    }
};

/// Plain 2-D real grid; carrier for saliency maps and the location bank planes.
struct Map2D {
    int height = 0, width = 0;
    std::vector<real> v;

    Map2D() = default;
    Map2D(int h, int w) : height(h), width(w) {
        if (h < 0 || w < 0) throw ShapeError("negative map extent");
        v.assign(static_cast<size_t>(h) * w, real(0));
    }

    size_t size() const { return v.size(); }
    real& at(int y, int x) { return v[static_cast<size_t>(y) * width + x]; }
    real at(int y, int x) const { return v[static_cast<size_t>(y) * width + x]; }
    bool same_shape(const Map2D& o) const { return height == o.height && width == o.width; }
};

inline Map2D map_from_plane(const Tensor& t, int b, int ch) {
    Map2D m(t.h, t.w);
    const real* p = t.plane(b, ch);
    std::copy(p, p + m.size(), m.v.begin());
    return m;
}

inline void plane_from_map(Tensor& t, int b, int ch, const Map2D& m) {
    if (t.h != m.height || t.w != m.width)
        throw ShapeError("plane_from_map: map " + std::to_string(m.height) + "x" +
                         std::to_string(m.width) + " vs tensor plane " + std::to_string(t.h) + "x" +
                         std::to_string(t.w));
    std::copy(m.v.begin(), m.v.end(), t.plane(b, ch));
}

}  // namespace deepfix
