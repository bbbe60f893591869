#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "fft.hpp"
#include "image.hpp"

namespace slda {

/// Raw, unreduced second-order sums over a corpus of feature images.
///
/// Numerators (pair_sums) and denominators (pair_counts) are kept separately
/// so that accumulators built over disjoint parts of a corpus can be merged.
/// Displacement (du, dv) is stored at offset (du + dmax_u, dv + dmax_v).
class StationaryAccumulator {
public:
    StationaryAccumulator() = default;

    StationaryAccumulator(std::size_t channels, std::size_t dmax_u, std::size_t dmax_v)
        : k_(channels), dmax_u_(dmax_u), dmax_v_(dmax_v),
          pair_sums_(channels * channels * span_u() * span_v(), 0.0),
          pair_counts_(span_u() * span_v(), 0),
          channel_sums_(channels, 0.0) {
        if (channels == 0) throw ShapeError("StationaryAccumulator: zero channels");
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t dmax_u() const noexcept { return dmax_u_; }
    std::size_t dmax_v() const noexcept { return dmax_v_; }
    std::size_t span_u() const noexcept { return 2 * dmax_u_ + 1; }
    std::size_t span_v() const noexcept { return 2 * dmax_v_ + 1; }
    std::uint64_t pixel_count() const noexcept { return pixel_count_; }
    std::uint64_t image_count() const noexcept { return image_count_; }

    std::size_t sum_index(std::size_t p, std::size_t q, long du, long dv) const {
        return ((p * k_ + q) * span_u() + std::size_t(du + long(dmax_u_))) * span_v() +
               std::size_t(dv + long(dmax_v_));
    }
    std::size_t count_index(long du, long dv) const {
        return std::size_t(du + long(dmax_u_)) * span_v() + std::size_t(dv + long(dmax_v_));
    }

    double pair_sum(std::size_t p, std::size_t q, long du, long dv) const {
        return pair_sums_[sum_index(p, q, du, dv)];
    }
    std::uint64_t pair_count(long du, long dv) const { return pair_counts_[count_index(du, dv)]; }
    double channel_sum(std::size_t p) const { return channel_sums_[p]; }

    std::span<const double> pair_sums() const noexcept { return pair_sums_; }
    std::span<const std::uint64_t> pair_counts() const noexcept { return pair_counts_; }
    std::span<const double> channel_sums() const noexcept { return channel_sums_; }

    bool same_shape(const StationaryAccumulator& o) const noexcept {
        return k_ == o.k_ && dmax_u_ == o.dmax_u_ && dmax_v_ == o.dmax_v_;
    }

private:
    friend StationaryAccumulator& accumulate_image_fft(StationaryAccumulator&, const FeatureImage&,
                                                       std::string_view);
    friend StationaryAccumulator& accumulate_image_naive(StationaryAccumulator&, const FeatureImage&,
                                                         std::string_view);
    friend StationaryAccumulator merge(const StationaryAccumulator&, const StationaryAccumulator&);

    void add_counts_and_means(const FeatureImage& f) {
        const long H = long(f.height()), W = long(f.width());
        const long eu = std::min(long(dmax_u_), H - 1), ev = std::min(long(dmax_v_), W - 1);
        for (long du = -eu; du <= eu; ++du)
            for (long dv = -ev; dv <= ev; ++dv)
                pair_counts_[count_index(du, dv)] += std::uint64_t((H - std::labs(du)) * (W - std::labs(dv)));
        for (std::size_t p = 0; p < k_; ++p)
            for (double x : f.plane(p)) channel_sums_[p] += x;
        pixel_count_ += std::uint64_t(H * W);
        ++image_count_;
    }

    // Adds the (p, q) sums for p <= q and mirrors them into (q, p, -d), so
    // that pair_sums[p][q][d] == pair_sums[q][p][-d] holds exactly. For
    // p == q only the half with d >= 0 (lexicographically) is read.
    void mirror_from(std::size_t p, std::size_t q, long eu, long ev, std::span<const double> add) {
        for (long du = -eu; du <= eu; ++du)
            for (long dv = -ev; dv <= ev; ++dv) {
                if (p == q && (du < 0 || (du == 0 && dv < 0))) continue;
                const double s = add[std::size_t(du + eu) * std::size_t(2 * ev + 1) + std::size_t(dv + ev)];
                pair_sums_[sum_index(p, q, du, dv)] += s;
                if (p != q || du != 0 || dv != 0) pair_sums_[sum_index(q, p, -du, -dv)] += s;
            }
    }

    std::size_t k_ = 0, dmax_u_ = 0, dmax_v_ = 0;
    std::vector<double> pair_sums_;
    std::vector<std::uint64_t> pair_counts_;
    std::vector<double> channel_sums_;
    std::uint64_t pixel_count_ = 0;
    std::uint64_t image_count_ = 0;
};

namespace detail {
inline void check_image_for_accumulation(const StationaryAccumulator& acc, const FeatureImage& f,
                                         std::string_view id) {
    const std::string name = id.empty() ? std::string("<unnamed>") : std::string(id);
    if (f.channels() != acc.channels())
        throw ShapeError("image " + name + ": has " + std::to_string(f.channels()) +
                         " channels, accumulator expects " + std::to_string(acc.channels()));
    if (!f.all_finite()) throw NumericalError("image " + name + ": contains non-finite values");
}
}  // namespace detail

/// Adds one image's statistics using zero-padded FFT cross-correlation of
/// every channel pair. Displacements beyond the image extent get nothing.
inline StationaryAccumulator& accumulate_image_fft(StationaryAccumulator& acc, const FeatureImage& f,
                                                   std::string_view id = {}) {
    detail::check_image_for_accumulation(acc, f, id);
    const std::size_t H = f.height(), W = f.width(), k = f.channels();
    const long eu = std::min(long(acc.dmax_u_), long(H) - 1);
    const long ev = std::min(long(acc.dmax_v_), long(W) - 1);

    const RealFft2 fft(efficient_fft_size(H + std::size_t(eu)), efficient_fft_size(W + std::size_t(ev)));
    const std::size_t P = fft.rows(), Q = fft.cols(), S = fft.spectrum_size();

    std::vector<cplx> spectra(k * S);
    std::vector<double> padded(fft.size(), 0.0);
    for (std::size_t p = 0; p < k; ++p) {
        const auto plane = f.plane(p);
        for (std::size_t u = 0; u < H; ++u)
            for (std::size_t v = 0; v < W; ++v) padded[u * Q + v] = plane[u * W + v];
        fft.forward(padded, {spectra.data() + p * S, S});
    }

    std::vector<cplx> prod(S);
    std::vector<double> corr(fft.size());
    std::vector<double> window(std::size_t(2 * eu + 1) * std::size_t(2 * ev + 1));
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = p; q < k; ++q) {
            const cplx* fp = spectra.data() + p * S;
            const cplx* fq = spectra.data() + q * S;
            for (std::size_t i = 0; i < S; ++i) prod[i] = std::conj(fp[i]) * fq[i];
            fft.inverse(prod, corr);
            for (long du = -eu; du <= eu; ++du)
                for (long dv = -ev; dv <= ev; ++dv) {
                    const std::size_t r = std::size_t((du + long(P)) % long(P));
                    const std::size_t c = std::size_t((dv + long(Q)) % long(Q));
                    window[std::size_t(du + eu) * std::size_t(2 * ev + 1) + std::size_t(dv + ev)] =
                        corr[r * Q + c];
                }
            acc.mirror_from(p, q, eu, ev, window);
        }
    acc.add_counts_and_means(f);
    return acc;
}

/// Direct double-sum accumulation; the reference path for the FFT route.
inline StationaryAccumulator& accumulate_image_naive(StationaryAccumulator& acc, const FeatureImage& f,
                                                     std::string_view id = {}) {
    detail::check_image_for_accumulation(acc, f, id);
    const long H = long(f.height()), W = long(f.width());
    const std::size_t k = f.channels();
    const long eu = std::min(long(acc.dmax_u_), H - 1);
    const long ev = std::min(long(acc.dmax_v_), W - 1);
    std::vector<double> window(std::size_t(2 * eu + 1) * std::size_t(2 * ev + 1));
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = p; q < k; ++q) {
            for (long du = -eu; du <= eu; ++du)
                for (long dv = -ev; dv <= ev; ++dv) {
                    double s = 0.0;
                    for (long u = std::max(0L, -du); u < std::min(H, H - du); ++u)
                        for (long v = std::max(0L, -dv); v < std::min(W, W - dv); ++v)
                            s += f.at(p, std::size_t(u), std::size_t(v)) *
                                 f.at(q, std::size_t(u + du), std::size_t(v + dv));
                    window[std::size_t(du + eu) * std::size_t(2 * ev + 1) + std::size_t(dv + ev)] = s;
                }
            acc.mirror_from(p, q, eu, ev, window);
        }
    acc.add_counts_and_means(f);
    return acc;
}

/// Element-wise sum of two accumulators of identical shape.
inline StationaryAccumulator merge(const StationaryAccumulator& a, const StationaryAccumulator& b) {
    if (!a.same_shape(b)) throw ShapeError("merge: accumulator shapes differ");
    StationaryAccumulator out = a;
    for (std::size_t i = 0; i < out.pair_sums_.size(); ++i) out.pair_sums_[i] += b.pair_sums_[i];
    for (std::size_t i = 0; i < out.pair_counts_.size(); ++i) out.pair_counts_[i] += b.pair_counts_[i];
    for (std::size_t i = 0; i < out.channel_sums_.size(); ++i) out.channel_sums_[i] += b.channel_sums_[i];
    out.pixel_count_ += b.pixel_count_;
    out.image_count_ += b.image_count_;
    return out;
}

/// Stationary covariance g_pq[du, dv] and per-channel mean of a corpus.
class StationaryStats {
public:
    StationaryStats() = default;

    StationaryStats(std::size_t channels, std::size_t dmax_u, std::size_t dmax_v, bool centered = true)
        : k_(channels), dmax_u_(dmax_u), dmax_v_(dmax_v), centered_(centered),
          g_(channels * channels * (2 * dmax_u + 1) * (2 * dmax_v + 1), 0.0), mu_(channels, 0.0) {
        if (channels == 0) throw ShapeError("StationaryStats: zero channels");
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t dmax_u() const noexcept { return dmax_u_; }
    std::size_t dmax_v() const noexcept { return dmax_v_; }
    std::size_t span_u() const noexcept { return 2 * dmax_u_ + 1; }
    std::size_t span_v() const noexcept { return 2 * dmax_v_ + 1; }
    bool centered() const noexcept { return centered_; }

    std::size_t index(std::size_t p, std::size_t q, long du, long dv) const {
        return ((p * k_ + q) * span_u() + std::size_t(du + long(dmax_u_))) * span_v() +
               std::size_t(dv + long(dmax_v_));
    }

    double& g(std::size_t p, std::size_t q, long du, long dv) { return g_[index(p, q, du, dv)]; }
    double g(std::size_t p, std::size_t q, long du, long dv) const { return g_[index(p, q, du, dv)]; }
    double& mu(std::size_t p) { return mu_[p]; }
    double mu(std::size_t p) const { return mu_[p]; }

    std::span<double> g_values() noexcept { return g_; }
    std::span<const double> g_values() const noexcept { return g_; }
    std::span<double> mu_values() noexcept { return mu_; }
    std::span<const double> mu_values() const noexcept { return mu_; }

    std::uint64_t image_count = 0;
    std::uint64_t pixel_count = 0;

    /// True when templates of m x n can be built from these statistics.
    bool covers(std::size_t m, std::size_t n) const noexcept {
        return m >= 1 && n >= 1 && m - 1 <= dmax_u_ && n - 1 <= dmax_v_;
    }

    void require_cover(std::size_t m, std::size_t n, const char* what) const {
        if (!covers(m, n))
            throw ExtentError(std::string(what) + ": statistics support templates up to " +
                              std::to_string(dmax_u_ + 1) + "x" + std::to_string(dmax_v_ + 1) +
                              ", requested " + std::to_string(m) + "x" + std::to_string(n));
    }

private:
    std::size_t k_ = 0, dmax_u_ = 0, dmax_v_ = 0;
    bool centered_ = true;
    std::vector<double> g_;
    std::vector<double> mu_;
};

/// Normalizes the accumulated sums. With `centered`, subtracts mu_p * mu_q
/// at every displacement (the stationary mean is constant per channel).
inline StationaryStats finalize(const StationaryAccumulator& acc, bool centered = true) {
    if (acc.pixel_count() == 0) throw NumericalError("finalize: accumulator has seen no pixels");
    const long U = long(acc.dmax_u()), V = long(acc.dmax_v());
    for (long du = -U; du <= U; ++du)
        for (long dv = -V; dv <= V; ++dv)
            if (acc.pair_count(du, dv) == 0)
                throw ExtentError("finalize: no pixel pairs observed at displacement (" + std::to_string(du) +
                                  ", " + std::to_string(dv) + "); corpus images are too small");

    StationaryStats s(acc.channels(), acc.dmax_u(), acc.dmax_v(), centered);
    const double N = double(acc.pixel_count());
    for (std::size_t p = 0; p < acc.channels(); ++p) s.mu(p) = acc.channel_sum(p) / N;
    for (std::size_t p = 0; p < acc.channels(); ++p)
        for (std::size_t q = 0; q < acc.channels(); ++q) {
            const double shift = centered ? s.mu(p) * s.mu(q) : 0.0;
            for (long du = -U; du <= U; ++du)
                for (long dv = -V; dv <= V; ++dv)
                    s.g(p, q, du, dv) = acc.pair_sum(p, q, du, dv) / double(acc.pair_count(du, dv)) - shift;
        }
    s.image_count = acc.image_count();
    s.pixel_count = acc.pixel_count();
    return s;
}

/// Restricts statistics to the displacements an m x n template uses.
inline StationaryStats crop_stats(const StationaryStats& s, std::size_t m, std::size_t n) {
    s.require_cover(m, n, "crop_stats");
    const long U = long(m) - 1, V = long(n) - 1;
    StationaryStats out(s.channels(), std::size_t(U), std::size_t(V), s.centered());
    for (std::size_t p = 0; p < s.channels(); ++p) {
        out.mu(p) = s.mu(p);
        for (std::size_t q = 0; q < s.channels(); ++q)
            for (long du = -U; du <= U; ++du)
                for (long dv = -V; dv <= V; ++dv) out.g(p, q, du, dv) = s.g(p, q, du, dv);
    }
    out.image_count = s.image_count;
    out.pixel_count = s.pixel_count;
    return out;
}

/// Element-wise mean of equally sized positive examples.
inline Template positive_mean(std::span<const FeatureImage> examples, std::size_t m, std::size_t n) {
    if (examples.empty()) throw ShapeError("positive_mean: no examples");
    const std::size_t k = examples.front().channels();
    Template mean(k, m, n);
    for (const auto& x : examples) {
        if (x.channels() != k || x.height() != m || x.width() != n)
            throw ShapeError("positive_mean: example of extent " + std::to_string(x.channels()) + "x" +
                             std::to_string(x.height()) + "x" + std::to_string(x.width()) + ", expected " +
                             std::to_string(k) + "x" + std::to_string(m) + "x" + std::to_string(n));
        for (std::size_t p = 0; p < k; ++p)
            for (std::size_t u = 0; u < m; ++u)
                for (std::size_t v = 0; v < n; ++v) mean.at(p, u, v) += x.at(p, u, v);
    }
    const double inv = 1.0 / double(examples.size());
    for (double& x : mean.values()) x *= inv;
    return mean;
}

}  // namespace slda
