#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "error.hpp"
#include "image.hpp"

namespace slda {

/// Single-channel grey raster, intensities nominally in [0, 255].
struct Raster {
    std::size_t height = 0, width = 0;
    std::vector<double> pixels;  // row-major

    Raster() = default;
    Raster(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

    double& at(std::size_t u, std::size_t v) { return pixels[u * width + v]; }
    double at(std::size_t u, std::size_t v) const { return pixels[u * width + v]; }
    bool empty() const noexcept { return pixels.empty(); }
};

/// Binary 8-bit PGM (P5).
inline Raster read_pgm(std::istream& is, const std::string& name = "<stream>") {
    auto token = [&]() {
        std::string t;
        int c;
        while ((c = is.get()) != EOF) {
            if (c == '#') {
                while ((c = is.get()) != EOF && c != '\n') {}
                continue;
            }
            if (std::isspace(c)) {
                if (!t.empty()) break;
                continue;
            }
            t.push_back(char(c));
        }
        return t;
    };
    if (token() != "P5") throw FormatError(name + ": not a binary PGM (P5)");
    long w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(token());
        h = std::stol(token());
        maxval = std::stol(token());
    } catch (const std::exception&) {
        throw FormatError(name + ": malformed PGM header");
    }
    if (w <= 0 || h <= 0) throw FormatError(name + ": empty PGM raster");
    if (maxval <= 0 || maxval > 255) throw FormatError(name + ": only 8-bit PGM is supported");
    Raster r{std::size_t(h), std::size_t(w)};
    std::vector<unsigned char> buf(r.pixels.size());
    if (!is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(buf.size())))
        throw FormatError(name + ": truncated PGM data");
    const double scale = 255.0 / double(maxval);
    for (std::size_t i = 0; i < buf.size(); ++i) r.pixels[i] = double(buf[i]) * scale;
    return r;
}

inline Raster load_pgm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    return read_pgm(is, path);
}

/// Writes intensities rounded and clamped to [0, 255].
inline void write_pgm(std::ostream& os, const Raster& r) {
    os << "P5\n" << r.width << ' ' << r.height << "\n255\n";
    for (double x : r.pixels) os.put(char(static_cast<unsigned char>(std::clamp(std::lround(x), 0L, 255L))));
    if (!os) throw FormatError("write_pgm: write failed");
}

inline void save_pgm(const std::string& path, const Raster& r) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write_pgm(os, r);
}

/// One channel of intensities scaled to [0, 1]; one cell per pixel.
inline FeatureImage identity_transform(const Raster& r) {
    if (r.empty()) throw ShapeError("identity_transform: empty raster");
    FeatureImage f(1, r.height, r.width);
    for (std::size_t i = 0; i < r.pixels.size(); ++i) f.values()[i] = r.pixels[i] / 255.0;
    return f;
}

inline constexpr double kHogEpsilon = 1e-6;

/// Simplified HOG: per cell, a histogram of unsigned gradient orientation.
///
/// Gradients are central differences (edge pixels replicate their neighbour).
/// Bin b is centred on orientation b*pi/bins, so a purely horizontal gradient
/// votes into bin 0. Each pixel splits its magnitude linearly between the two
/// nearest bins; each cell is divided by sqrt(||h||^2 + eps^2).
inline FeatureImage hoglite_transform(const Raster& r, std::size_t cell = 4, std::size_t bins = 8) {
    if (cell == 0 || bins == 0) throw ShapeError("hoglite_transform: cell and bins must be positive");
    if (r.height < cell || r.width < cell)
        throw ShapeError("hoglite_transform: raster " + std::to_string(r.height) + "x" + std::to_string(r.width) +
                         " is smaller than one " + std::to_string(cell) + "-pixel cell");
    const std::size_t H = r.height, W = r.width, ch = H / cell, cw = W / cell;
    FeatureImage f(bins, ch, cw);
    const double bin_width = std::numbers::pi / double(bins);
    for (std::size_t u = 0; u < ch * cell; ++u)
        for (std::size_t v = 0; v < cw * cell; ++v) {
            const double gx = r.at(u, std::min(v + 1, W - 1)) - r.at(u, v == 0 ? 0 : v - 1);
            const double gy = r.at(std::min(u + 1, H - 1), v) - r.at(u == 0 ? 0 : u - 1, v);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double theta = std::atan2(gy, gx);
            if (theta < 0) theta += std::numbers::pi;
            if (theta >= std::numbers::pi) theta -= std::numbers::pi;
            const double pos = theta / bin_width;
            const double lo = std::floor(pos);
            const double frac = pos - lo;
            const std::size_t b0 = std::size_t(lo) % bins, b1 = (b0 + 1) % bins;
            f.at(b0, u / cell, v / cell) += (1.0 - frac) * mag;
            f.at(b1, u / cell, v / cell) += frac * mag;
        }
    for (std::size_t a = 0; a < ch; ++a)
        for (std::size_t b = 0; b < cw; ++b) {
            double e = 0.0;
            for (std::size_t p = 0; p < bins; ++p) e += f.at(p, a, b) * f.at(p, a, b);
            const double inv = 1.0 / std::sqrt(e + kHogEpsilon * kHogEpsilon);
            for (std::size_t p = 0; p < bins; ++p) f.at(p, a, b) *= inv;
        }
    return f;
}

/// A named, deterministic raster-to-features map.
struct FeatureTransform {
    std::string name;
    std::size_t channels = 1;
    std::size_t cell = 1;
    std::function<FeatureImage(const Raster&)> apply;

    FeatureImage operator()(const Raster& r) const { return apply(r); }
};

inline FeatureTransform make_transform(const std::string& name, std::size_t cell = 4, std::size_t bins = 8) {
    if (name == "identity") return {"identity", 1, 1, [](const Raster& r) { return identity_transform(r); }};
    if (name == "hoglite")
        return {"hoglite", bins, cell, [cell, bins](const Raster& r) { return hoglite_transform(r, cell, bins); }};
    throw Error("unknown feature transform '" + name + "' (expected identity or hoglite)");
}

}  // namespace slda
