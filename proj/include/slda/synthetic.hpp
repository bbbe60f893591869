#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "features.hpp"
#include "image.hpp"
#include "stats.hpp"

// Synthetic data: stationary textures, a planted pattern, and analytic
// stationary statistics. Everything is driven by an explicit seed.

namespace slda::synthetic {

using Rng = std::mt19937_64;

namespace detail {

inline std::vector<double> gaussian_kernel(double sigma) {
    const long r = std::max(1L, long(std::ceil(3.0 * sigma)));
    std::vector<double> k(std::size_t(2 * r + 1));
    double s = 0.0;
    for (long i = -r; i <= r; ++i) s += k[std::size_t(i + r)] = std::exp(-0.5 * double(i * i) / (sigma * sigma));
    for (double& x : k) x /= s;
    return k;
}

// Separable blur with periodic wrap, so the output stays stationary.
inline void blur(std::vector<double>& img, std::size_t h, std::size_t w, double sigma) {
    if (sigma <= 0) return;
    const auto k = gaussian_kernel(sigma);
    const long r = long(k.size() / 2);
    std::vector<double> tmp(img.size());
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[std::size_t(i + r)] * img[u * w + std::size_t((long(v) + i + long(w) * 8) % long(w))];
            tmp[u * w + v] = s;
        }
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) {
            double s = 0.0;
            for (long i = -r; i <= r; ++i) s += k[std::size_t(i + r)] * tmp[std::size_t((long(u) + i + long(h) * 8) % long(h)) * w + v];
            img[u * w + v] = s;
        }
}

inline void standardize(std::vector<double>& x) {
    double mean = 0.0, var = 0.0;
    for (double v : x) mean += v;
    mean /= double(x.size());
    for (double v : x) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(x.size()));
    for (double& v : x) v = sd > 0 ? (v - mean) / sd : 0.0;
}

}  // namespace detail

/// Filtered-noise grey texture: blurred Gaussian noise, mean 128, sd ~`contrast`.
inline Raster texture(std::size_t h, std::size_t w, Rng& rng, double sigma = 1.5, double contrast = 40.0) {
    std::normal_distribution<double> n01;
    std::vector<double> px(h * w);
    for (double& x : px) x = n01(rng);
    detail::blur(px, h, w, sigma);
    detail::standardize(px);
    Raster r(h, w);
    for (std::size_t i = 0; i < px.size(); ++i) r.pixels[i] = std::clamp(128.0 + contrast * px[i], 0.0, 255.0);
    return r;
}

/// k-channel stationary feature texture: smoothed noise mixed across channels,
/// plus a per-pixel white component so sample covariances stay well conditioned.
inline FeatureImage feature_texture(std::size_t k, std::size_t h, std::size_t w, Rng& rng, double sigma = 1.0) {
    std::normal_distribution<double> n01;
    std::vector<std::vector<double>> latent(k, std::vector<double>(h * w));
    for (std::size_t c = 0; c < k; ++c) {
        for (double& x : latent[c]) x = n01(rng);
        detail::blur(latent[c], h, w, sigma * (1.0 + 0.5 * double(c)));
    }
    std::vector<double> mix(k * k);
    for (double& x : mix) x = n01(rng);
    FeatureImage f(k, h, w);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t i = 0; i < h * w; ++i) {
            double s = 0.5 + 0.3 * n01(rng);
            for (std::size_t c = 0; c < k; ++c) s += mix[p * k + c] * latent[c][i];
            f.plane(p)[i] = s;
        }
    return f;
}

/// Fixed test pattern for a template of ph x pw pixels: a bright ring with a
/// dark vertical bar. `mask` marks the pixels the pattern owns.
struct Pattern {
    Raster values;
    std::vector<bool> mask;
};

inline Pattern pattern(std::size_t ph, std::size_t pw) {
    Pattern pat{Raster(ph, pw, 0.0), std::vector<bool>(ph * pw, false)};
    const double cu = 0.5 * double(ph - 1), cv = 0.5 * double(pw - 1);
    const double ru = 0.42 * double(ph), rv = 0.42 * double(pw);
    for (std::size_t u = 0; u < ph; ++u)
        for (std::size_t v = 0; v < pw; ++v) {
            const double du = (double(u) - cu) / ru, dv = (double(v) - cv) / rv;
            const double rho = std::sqrt(du * du + dv * dv);
            const bool ring = rho > 0.75 && rho < 1.0;
            const bool bar = std::abs(double(v) - cv) < 0.08 * double(pw) + 0.5 && std::abs(du) < 0.6;
            if (ring) {
                pat.values.at(u, v) = 250.0;
                pat.mask[u * pw + v] = true;
            } else if (bar) {
                pat.values.at(u, v) = 5.0;
                pat.mask[u * pw + v] = true;
            }
        }
    return pat;
}

/// Overwrites the masked pattern pixels into `r` with its top-left at (u0, v0).
inline void plant(Raster& r, const Pattern& pat, std::size_t u0, std::size_t v0) {
    for (std::size_t u = 0; u < pat.values.height; ++u)
        for (std::size_t v = 0; v < pat.values.width; ++v)
            if (pat.mask[u * pat.values.width + v] && u0 + u < r.height && v0 + v < r.width)
                r.at(u0 + u, v0 + v) = pat.values.at(u, v);
}

inline void add_noise(Raster& r, Rng& rng, double sd) {
    std::normal_distribution<double> n(0.0, sd);
    for (double& x : r.pixels) x = std::clamp(x + n(rng), 0.0, 255.0);
}

/// Template-sized positive: texture background, planted pattern, pixel noise.
inline Raster positive_example(const Pattern& pat, Rng& rng, double noise_sd = 12.0) {
    Raster r = texture(pat.values.height, pat.values.width, rng);
    plant(r, pat, 0, 0);
    add_noise(r, rng, noise_sd);
    return r;
}

/// Analytic stationary statistics that are positive semidefinite for every
/// template size: g_pq[du,dv] = sum_r A_pr A_qr a_r^|du| b_r^|dv|.
inline StationaryStats analytic_stats(std::size_t k, std::size_t dmax_u, std::size_t dmax_v, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> corr(0.3, 0.9);
    std::vector<double> A(k * k), ra(k), rb(k);
    for (double& x : A) x = n01(rng) / std::sqrt(double(k));
    for (std::size_t r = 0; r < k; ++r) {
        ra[r] = corr(rng);
        rb[r] = corr(rng);
    }
    StationaryStats s(k, dmax_u, dmax_v, true);
    const long U = long(dmax_u), V = long(dmax_v);
    for (std::size_t p = 0; p < k; ++p) {
        s.mu(p) = 0.1 * n01(rng);
        for (std::size_t q = 0; q < k; ++q)
            for (long du = -U; du <= U; ++du)
                for (long dv = -V; dv <= V; ++dv) {
                    double g = 0.0;
                    for (std::size_t r = 0; r < k; ++r)
                        g += A[p * k + r] * A[q * k + r] * std::pow(ra[r], double(std::labs(du))) *
                             std::pow(rb[r], double(std::labs(dv)));
                    s.g(p, q, du, dv) = g;
                }
    }
    s.image_count = 0;
    s.pixel_count = 0;
    return s;
}

}  // namespace slda::synthetic
