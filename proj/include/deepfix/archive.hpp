#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "deepfix/network.hpp"
#include "deepfix/tensor.hpp"

namespace deepfix {

namespace detail {

constexpr uint64_t kFnvOffset = 14695981039346656037ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a(const unsigned char* data, size_t len, uint64_t h = kFnvOffset) {
    for (size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= kFnvPrime;
    }
    return h;
}

inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

inline void put_u64(std::vector<unsigned char>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class ByteReader {
public:
    ByteReader(const std::vector<unsigned char>& buf, std::string path)
        : buf_(buf), path_(std::move(path)) {}

    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    uint64_t u64() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf_[pos_++]) << (8 * i);
        return v;
    }
    uint8_t u8() {
        need(1);
        return buf_[pos_++];
    }
    std::vector<unsigned char> bytes(size_t n) {
        need(n);
        std::vector<unsigned char> out(buf_.begin() + pos_, buf_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    std::string str(size_t n) {
        need(n);
        std::string out(buf_.begin() + pos_, buf_.begin() + pos_ + n);
        pos_ += n;
        return out;
    }
    size_t pos() const { return pos_; }
    size_t left() const { return buf_.size() - pos_; }

private:
    void need(size_t n) {
        if (pos_ + n > buf_.size()) throw DataError(path_ + ": archive truncated");
    }
    const std::vector<unsigned char>& buf_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace detail

/// One named block in a weight archive: a dtype tag, dims and a little-endian
/// payload. dtype 1 is bytes, 4 is 32-bit floats, 8 is 64-bit floats.
struct ArchiveEntry {
    std::string name;
    uint8_t dtype = 8;
    std::vector<uint32_t> dims;
    std::vector<unsigned char> bytes;

    size_t element_count() const {
        size_t n = 1;
        for (uint32_t d : dims) n *= d;
        return n;
    }

    std::vector<real> as_f64() const {
        if (dtype != 8) throw DataError("archive entry " + name + ": not 64-bit float data");
        const size_t n = element_count();
        if (bytes.size() != n * 8)
            throw DataError("archive entry " + name + ": payload length mismatch");
        std::vector<real> out(n);
        for (size_t i = 0; i < n; ++i) {
            uint64_t u = 0;
            for (int b = 0; b < 8; ++b) u |= static_cast<uint64_t>(bytes[8 * i + b]) << (8 * b);
            double d;
            std::memcpy(&d, &u, 8);
            out[i] = d;
        }
        return out;
    }

    std::string as_text() const {
        if (dtype != 1) throw DataError("archive entry " + name + ": not text data");
        return std::string(bytes.begin(), bytes.end());
    }
};

/// Container format "DFX1": magic, version, entry table, trailing 64-bit
/// FNV-1a checksum of everything before it.
class WeightArchive {
public:
    std::vector<ArchiveEntry> entries;

    void add_f64(const std::string& name, std::vector<uint32_t> dims, const real* data) {
        ArchiveEntry e;
        e.name = name;
        e.dtype = 8;
        e.dims = std::move(dims);
        const size_t n = e.element_count();
        e.bytes.resize(n * 8);
        for (size_t i = 0; i < n; ++i) {
            uint64_t u;
            double d = data[i];
            std::memcpy(&u, &d, 8);
            for (int b = 0; b < 8; ++b) e.bytes[8 * i + b] = static_cast<unsigned char>(u >> (8 * b));
        }
        entries.push_back(std::move(e));
    }

    void add_text(const std::string& name, const std::string& text) {
        ArchiveEntry e;
        e.name = name;
        e.dtype = 1;
        e.dims = {static_cast<uint32_t>(text.size())};
        e.bytes.assign(text.begin(), text.end());
        entries.push_back(std::move(e));
    }

    const ArchiveEntry* find(const std::string& name) const {
        for (const ArchiveEntry& e : entries)
            if (e.name == name) return &e;
        return nullptr;
    }

    const ArchiveEntry& require(const std::string& name) const {
        const ArchiveEntry* e = find(name);
        if (!e) throw DataError("archive: missing entry '" + name + "'");
        return *e;
    }

    void save(const std::string& path) const {
        std::vector<unsigned char> buf;
        buf.insert(buf.end(), {'D', 'F', 'X', '1'});
        detail::put_u32(buf, 1);  // version
        detail::put_u32(buf, static_cast<uint32_t>(entries.size()));
        for (const ArchiveEntry& e : entries) {
            detail::put_u32(buf, static_cast<uint32_t>(e.name.size()));
            buf.insert(buf.end(), e.name.begin(), e.name.end());
            buf.push_back(e.dtype);
            detail::put_u32(buf, static_cast<uint32_t>(e.dims.size()));
            for (uint32_t d : e.dims) detail::put_u32(buf, d);
            buf.insert(buf.end(), e.bytes.begin(), e.bytes.end());
        }
        detail::put_u64(buf, detail::fnv1a(buf.data(), buf.size()));

        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(path + ": cannot open for writing");
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!out) throw DataError(path + ": write failed");
    }

    static WeightArchive load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DataError(path + ": cannot open for reading");
        std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
        if (buf.size() < 20) throw DataError(path + ": too small to be a weight archive");
        const uint64_t stored = [&] {
            uint64_t v = 0;
            for (int i = 0; i < 8; ++i)
                v |= static_cast<uint64_t>(buf[buf.size() - 8 + i]) << (8 * i);
            return v;
        }();
        if (detail::fnv1a(buf.data(), buf.size() - 8) != stored)
            throw DataError(path + ": checksum mismatch, archive corrupt");
        buf.resize(buf.size() - 8);

        detail::ByteReader r(buf, path);
        if (r.str(4) != "DFX1") throw DataError(path + ": bad magic, not a weight archive");
        const uint32_t version = r.u32();
        if (version != 1) throw DataError(path + ": unsupported version " + std::to_string(version));
        const uint32_t count = r.u32();
        WeightArchive ar;
        for (uint32_t i = 0; i < count; ++i) {
            ArchiveEntry e;
            e.name = r.str(r.u32());
            e.dtype = r.u8();
            if (e.dtype != 1 && e.dtype != 4 && e.dtype != 8)
                throw DataError(path + ": entry " + e.name + " has unknown dtype " +
                                std::to_string(e.dtype));
            const uint32_t ndim = r.u32();
            e.dims.resize(ndim);
            for (uint32_t d = 0; d < ndim; ++d) e.dims[d] = r.u32();
            e.bytes = r.bytes(e.element_count() * e.dtype);
            ar.entries.push_back(std::move(e));
        }
        if (r.left() != 0) throw DataError(path + ": trailing bytes after last entry");
        return ar;
    }
};

// ---------------------------------------------------------------------------
// network serialization
// ---------------------------------------------------------------------------

inline std::string meta_text(const Network& net) {
    return "config=" + net.config.name + "\nvariant=" + variant_name(net.variant) +
           "\ninput=" + std::to_string(net.config.input_width) + "x" +
           std::to_string(net.config.input_height) + "\n";
}

struct ArchiveMeta {
    std::string config_name;
    std::string variant;
    int input_w = 0, input_h = 0;
};

inline ArchiveMeta parse_meta(const std::string& text) {
    ArchiveMeta meta;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const size_t eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "config") meta.config_name = val;
        else if (key == "variant") meta.variant = val;
        else if (key == "input") {
            const size_t x = val.find('x');
            if (x == std::string::npos) throw DataError("archive meta: bad input extents");
            meta.input_w = std::stoi(val.substr(0, x));
            meta.input_h = std::stoi(val.substr(x + 1));
        }
    }
    if (meta.config_name.empty() || meta.variant.empty())
        throw DataError("archive meta: config or variant missing");
    return meta;
}

inline void save_weights(const std::string& path, Network& net, const Map2D* mean_map = nullptr) {
    WeightArchive ar;
    for (const ParamRef& p : net.params())
        ar.add_f64(p.name, {static_cast<uint32_t>(p.value->size())}, p.value->data());
    ar.add_text("_meta", meta_text(net));
    if (mean_map)
        ar.add_f64("_mean_map",
                   {static_cast<uint32_t>(mean_map->height), static_cast<uint32_t>(mean_map->width)},
                   mean_map->v.data());
    ar.save(path);
}

/// Copy parameters from an archive into a matching network. Returns the mean
/// map when the archive carries one.
inline Map2D load_weights_into(const WeightArchive& ar, Network& net) {
    const ArchiveMeta meta = parse_meta(ar.require("_meta").as_text());
    if (meta.config_name != net.config.name)
        throw DataError("archive holds config '" + meta.config_name + "', network is '" +
                        net.config.name + "'");
    if (meta.variant != variant_name(net.variant))
        throw DataError("archive holds variant '" + meta.variant + "', network is '" +
                        variant_name(net.variant) + "'");
    for (const ParamRef& p : net.params()) {
        std::vector<real> data = ar.require(p.name).as_f64();
        if (data.size() != p.value->size())
            throw DataError("archive entry " + p.name + " has " + std::to_string(data.size()) +
                            " values, network expects " + std::to_string(p.value->size()));
        *p.value = std::move(data);
    }
    Map2D mean;
    if (const ArchiveEntry* e = ar.find("_mean_map")) {
        if (e->dims.size() != 2) throw DataError("archive entry _mean_map: expected 2 dims");
        mean = Map2D(static_cast<int>(e->dims[0]), static_cast<int>(e->dims[1]));
        mean.v = e->as_f64();
    }
    return mean;
}

struct LoadedNetwork {
    std::unique_ptr<Network> net;
    Map2D mean_map;  // empty unless the archive carries one
};

/// Rebuild the network a weight file describes and fill in its parameters.
inline LoadedNetwork network_from_archive(const std::string& path) {
    const WeightArchive ar = WeightArchive::load(path);
    const ArchiveMeta meta = parse_meta(ar.require("_meta").as_text());
    LoadedNetwork out;
    out.net = std::make_unique<Network>(parse_config(meta.config_name), parse_variant(meta.variant));
    out.mean_map = load_weights_into(ar, *out.net);
    return out;
}

}  // namespace deepfix
