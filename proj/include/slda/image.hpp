#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace slda {

/// Multi-channel feature image: k planes of height x width, each row-major.
/// Channels are indexed from 0 in code.
class FeatureImage {
public:
    FeatureImage() = default;

    FeatureImage(std::size_t channels, std::size_t height, std::size_t width)
        : k_(channels), h_(height), w_(width), data_(channels * height * width, 0.0) {
        if (channels == 0 || height == 0 || width == 0)
            throw ShapeError("FeatureImage: extents must be positive");
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t height() const noexcept { return h_; }
    std::size_t width() const noexcept { return w_; }
    std::size_t plane_size() const noexcept { return h_ * w_; }

    double& at(std::size_t p, std::size_t u, std::size_t v) { return data_[(p * h_ + u) * w_ + v]; }
    double at(std::size_t p, std::size_t u, std::size_t v) const { return data_[(p * h_ + u) * w_ + v]; }

    std::span<double> plane(std::size_t p) { return {data_.data() + p * plane_size(), plane_size()}; }
    std::span<const double> plane(std::size_t p) const {
        return {data_.data() + p * plane_size(), plane_size()};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool all_finite() const noexcept {
        for (double x : data_)
            if (!std::isfinite(x)) return false;
        return true;
    }

    /// Copy of the m x n window whose top-left corner is (u0, v0).
    FeatureImage crop(std::size_t u0, std::size_t v0, std::size_t m, std::size_t n) const {
        if (u0 + m > h_ || v0 + n > w_) throw ShapeError("FeatureImage::crop: window outside image");
        FeatureImage out(k_, m, n);
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t u = 0; u < m; ++u)
                for (std::size_t v = 0; v < n; ++v) out.at(p, u, v) = at(p, u0 + u, v0 + v);
        return out;
    }

private:
    std::size_t k_ = 0, h_ = 0, w_ = 0;
    std::vector<double> data_;
};

/// Template-shaped vector of k channels over an m x n window.
///
/// Storage follows the dense matrix convention used throughout: pixel-major
/// with the channel fastest, pixels ordered with u fastest, i.e. element
/// (p, u, v) lives at index (v*m + u)*k + p.
class Template {
public:
    Template() = default;

    Template(std::size_t channels, std::size_t rows, std::size_t cols)
        : k_(channels), m_(rows), n_(cols), data_(channels * rows * cols, 0.0) {
        if (channels == 0 || rows == 0 || cols == 0)
            throw ShapeError("Template: extents must be positive");
    }

    Template(std::size_t channels, std::size_t rows, std::size_t cols, std::vector<double> values)
        : k_(channels), m_(rows), n_(cols), data_(std::move(values)) {
        if (channels == 0 || rows == 0 || cols == 0)
            throw ShapeError("Template: extents must be positive");
        if (data_.size() != k_ * m_ * n_) throw ShapeError("Template: value count does not match extent");
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t pixels() const noexcept { return m_ * n_; }
    std::size_t size() const noexcept { return data_.size(); }

    static std::size_t index(std::size_t k, std::size_t m, std::size_t p, std::size_t u, std::size_t v) {
        return (v * m + u) * k + p;
    }

    double& at(std::size_t p, std::size_t u, std::size_t v) { return data_[index(k_, m_, p, u, v)]; }
    double at(std::size_t p, std::size_t u, std::size_t v) const { return data_[index(k_, m_, p, u, v)]; }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    bool same_shape(const Template& o) const noexcept { return k_ == o.k_ && m_ == o.m_ && n_ == o.n_; }

    /// Row-major m x n copy of channel p.
    void gather_plane(std::size_t p, std::span<double> out) const {
        for (std::size_t u = 0; u < m_; ++u)
            for (std::size_t v = 0; v < n_; ++v) out[u * n_ + v] = at(p, u, v);
    }

    void scatter_plane(std::size_t p, std::span<const double> in) {
        for (std::size_t u = 0; u < m_; ++u)
            for (std::size_t v = 0; v < n_; ++v) at(p, u, v) = in[u * n_ + v];
    }

    static Template from_image(const FeatureImage& f) {
        Template t(f.channels(), f.height(), f.width());
        for (std::size_t p = 0; p < t.k_; ++p) t.scatter_plane(p, f.plane(p));
        return t;
    }

    FeatureImage to_image() const {
        FeatureImage f(k_, m_, n_);
        for (std::size_t p = 0; p < k_; ++p) gather_plane(p, f.plane(p));
        return f;
    }

private:
    std::size_t k_ = 0, m_ = 0, n_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline void require_same_shape(const Template& a, const Template& b, const char* what) {
    if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": template shape mismatch");
}
}  // namespace detail

}  // namespace slda
