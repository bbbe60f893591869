#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "fft.hpp"
#include "image.hpp"
#include "trainer.hpp"

namespace slda {

/// Scores of every placement of an m x n template wholly inside an image.
struct ScoreMap {
    std::size_t rows = 0, cols = 0;
    std::vector<double> values;  // row-major

    double at(std::size_t u, std::size_t v) const { return values[u * cols + v]; }
    double& at(std::size_t u, std::size_t v) { return values[u * cols + v]; }
};

namespace detail {
inline void check_scoring_shapes(const Template& w, const FeatureImage& f) {
    if (f.channels() != w.channels())
        throw ShapeError("score_image: detector has " + std::to_string(w.channels()) + " channels, image has " +
                         std::to_string(f.channels()));
    if (f.height() < w.rows() || f.width() < w.cols())
        throw ShapeError("score_image: image " + std::to_string(f.height()) + "x" + std::to_string(f.width()) +
                         " is smaller than template " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
}
}  // namespace detail

/// score[u,v] = sum_p sum_ij w_p[i,j] f_p[u+i, v+j], through the FFT.
inline ScoreMap score_image(const Template& w, const FeatureImage& f) {
    detail::check_scoring_shapes(w, f);
    const std::size_t H = f.height(), W = f.width(), m = w.rows(), n = w.cols();
    const RealFft2 fft(efficient_fft_size(H), efficient_fft_size(W));
    const std::size_t Q = fft.cols(), S = fft.spectrum_size();
    std::vector<double> padded(fft.size());
    std::vector<cplx> ws(S), fs(S), acc(S);
    for (std::size_t p = 0; p < f.channels(); ++p) {
        std::fill(padded.begin(), padded.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) padded[i * Q + j] = w.at(p, i, j);
        fft.forward(padded, ws);
        std::fill(padded.begin(), padded.end(), 0.0);
        const auto plane = f.plane(p);
        for (std::size_t u = 0; u < H; ++u)
            for (std::size_t v = 0; v < W; ++v) padded[u * Q + v] = plane[u * W + v];
        fft.forward(padded, fs);
        for (std::size_t i = 0; i < S; ++i) acc[i] += std::conj(ws[i]) * fs[i];
    }
    fft.inverse(acc, padded);
    ScoreMap out{H - m + 1, W - n + 1, {}};
    out.values.resize(out.rows * out.cols);
    for (std::size_t u = 0; u < out.rows; ++u)
        for (std::size_t v = 0; v < out.cols; ++v) out.at(u, v) = padded[u * Q + v];
    return out;
}

inline ScoreMap score_image(const DetectorTemplate& det, const FeatureImage& f) { return score_image(det.weights, f); }

/// Triple-loop evaluation of the same score map.
inline ScoreMap score_image_direct(const Template& w, const FeatureImage& f) {
    detail::check_scoring_shapes(w, f);
    ScoreMap out{f.height() - w.rows() + 1, f.width() - w.cols() + 1, {}};
    out.values.assign(out.rows * out.cols, 0.0);
    for (std::size_t u = 0; u < out.rows; ++u)
        for (std::size_t v = 0; v < out.cols; ++v) {
            double s = 0.0;
            for (std::size_t p = 0; p < w.channels(); ++p)
                for (std::size_t i = 0; i < w.rows(); ++i)
                    for (std::size_t j = 0; j < w.cols(); ++j) s += w.at(p, i, j) * f.at(p, u + i, v + j);
            out.at(u, v) = s;
        }
    return out;
}

/// Axis-aligned box on the feature grid: top-left (u, v), extent m x n.
struct Rect {
    long u = 0, v = 0, m = 0, n = 0;

    long area() const noexcept { return m * n; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

inline long intersection_area(const Rect& a, const Rect& b) noexcept {
    const long h = std::min(a.u + a.m, b.u + b.m) - std::max(a.u, b.u);
    const long w = std::min(a.v + a.n, b.v + b.n) - std::max(a.v, b.v);
    return h > 0 && w > 0 ? h * w : 0;
}

inline double iou(const Rect& a, const Rect& b) noexcept {
    const long i = intersection_area(a, b);
    const long uni = a.area() + b.area() - i;
    return uni > 0 ? double(i) / double(uni) : 0.0;
}

/// Fraction of `candidate` covered by `by`.
inline double coverage(const Rect& by, const Rect& candidate) noexcept {
    return candidate.area() > 0 ? double(intersection_area(by, candidate)) / double(candidate.area()) : 0.0;
}

struct Detection {
    Rect rect;
    double score = 0.0;
    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Descending score, ties by u then v ascending.
inline bool detection_order(const Detection& a, const Detection& b) noexcept {
    if (a.score != b.score) return a.score > b.score;
    if (a.rect.u != b.rect.u) return a.rect.u < b.rect.u;
    return a.rect.v < b.rect.v;
}

struct NmsOptions {
    double iou = 0.3;    // suppress when IoU exceeds this
    double cover = 0.6;  // or when the kept box covers more than this fraction of the candidate
};

/// Placements scoring above `threshold` that are maxima of their
/// four-connected neighbourhood in the score map.
inline std::vector<Detection> local_maxima(const ScoreMap& map, std::size_t m, std::size_t n, double threshold) {
    std::vector<Detection> out;
    for (std::size_t u = 0; u < map.rows; ++u)
        for (std::size_t v = 0; v < map.cols; ++v) {
            const double s = map.at(u, v);
            if (!(s > threshold)) continue;
            if (u > 0 && map.at(u - 1, v) > s) continue;
            if (u + 1 < map.rows && map.at(u + 1, v) > s) continue;
            if (v > 0 && map.at(u, v - 1) > s) continue;
            if (v + 1 < map.cols && map.at(u, v + 1) > s) continue;
            out.push_back({{long(u), long(v), long(m), long(n)}, s});
        }
    return out;
}

/// Greedy suppression in detection_order.
inline std::vector<Detection> nms_greedy(std::vector<Detection> dets, const NmsOptions& opts = {}) {
    std::sort(dets.begin(), dets.end(), detection_order);
    std::vector<Detection> kept;
    std::vector<bool> gone(dets.size(), false);
    for (std::size_t a = 0; a < dets.size(); ++a) {
        if (gone[a]) continue;
        kept.push_back(dets[a]);
        for (std::size_t b = a + 1; b < dets.size(); ++b) {
            if (gone[b]) continue;
            if (coverage(dets[a].rect, dets[b].rect) > opts.cover || iou(dets[a].rect, dets[b].rect) > opts.iou)
                gone[b] = true;
        }
    }
    return kept;
}

struct MatchResult {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (detection, truth) indices into the inputs
    std::vector<std::size_t> unmatched_detections;
    std::vector<std::size_t> unmatched_truths;
};

/// Greedy ground-truth matching: detections in detection_order each take the
/// still-unmatched truth of highest IoU, provided it exceeds `min_iou`.
inline MatchResult match_detections(std::span<const Detection> dets, std::span<const Rect> truths,
                                    double min_iou = 0.5) {
    std::vector<std::size_t> order(dets.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return detection_order(dets[a], dets[b]); });
    std::vector<bool> taken(truths.size(), false);
    MatchResult res;
    for (std::size_t d : order) {
        std::optional<std::size_t> best;
        double best_iou = min_iou;
        for (std::size_t t = 0; t < truths.size(); ++t) {
            if (taken[t]) continue;
            const double o = iou(dets[d].rect, truths[t]);
            if (o > best_iou) {
                best_iou = o;
                best = t;
            }
        }
        if (best) {
            taken[*best] = true;
            res.pairs.emplace_back(d, *best);
        } else {
            res.unmatched_detections.push_back(d);
        }
    }
    for (std::size_t t = 0; t < truths.size(); ++t)
        if (!taken[t]) res.unmatched_truths.push_back(t);
    return res;
}

struct DetectOptions {
    std::optional<double> threshold;  // defaults to the detector's stored threshold
    NmsOptions nms;
};

/// Scores, keeps local maxima above threshold, and applies greedy NMS.
inline std::vector<Detection> detect(const DetectorTemplate& det, const FeatureImage& f, const DetectOptions& opts = {}) {
    const ScoreMap map = score_image(det, f);
    const double thr = opts.threshold.value_or(det.threshold);
    return nms_greedy(local_maxima(map, det.rows(), det.cols(), thr), opts.nms);
}

inline void write_detection_csv_header(std::ostream& os) { os << "image,u,v,m,n,score,matched\n"; }

inline void write_detection_csv_row(std::ostream& os, const std::string& image, const Detection& d, bool matched) {
    const auto old = os.precision(17);
    os << image << ',' << d.rect.u << ',' << d.rect.v << ',' << d.rect.m << ',' << d.rect.n << ',' << d.score << ','
       << (matched ? 1 : 0) << '\n';
    os.precision(old);
}

}  // namespace slda
