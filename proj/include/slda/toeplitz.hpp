#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "fft.hpp"
#include "image.hpp"
#include "stats.hpp"

namespace slda {

inline constexpr double kDefaultLambda = 1e-4;
inline constexpr std::size_t kDenseGuard = 20000;

/// Implicit block two-level Toeplitz covariance plus lambda*I.
///
/// Element ((u,v,p), (i,j,q)) equals g_pq[i-u, j-v] + lambda*[same index].
/// Applying it costs k forward and k inverse transforms on a grid padded to
/// (2m-1) x (2n-1), plus k^2 spectral products. Only the k(k+1)/2 channel
/// pairs with p <= q keep a spectrum; the rest are conjugates.
class ToeplitzOperator {
public:
    ToeplitzOperator(const StationaryStats& s, std::size_t m, std::size_t n, double lambda = kDefaultLambda)
        : k_(s.channels()), m_(m), n_(n), lambda_(lambda), stats_(crop_stats(s, m, n)),
          fft_(efficient_fft_size(2 * m - 1), efficient_fft_size(2 * n - 1)) {
        if (!(lambda >= 0.0)) throw NumericalError("ToeplitzOperator: lambda must be >= 0");
        const std::size_t P = fft_.rows(), Q = fft_.cols(), S = fft_.spectrum_size();
        const long U = long(m) - 1, V = long(n) - 1;
        spectra_.resize(pair_count() * S);
        std::vector<double> kernel(fft_.size());
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = p; q < k_; ++q) {
                std::fill(kernel.begin(), kernel.end(), 0.0);
                // kernel[s] = g_pq[-s], so that z_p = sum_q kernel_pq (*) x_q.
                for (long du = -U; du <= U; ++du)
                    for (long dv = -V; dv <= V; ++dv) {
                        const std::size_t r = std::size_t((-du + long(P)) % long(P));
                        const std::size_t c = std::size_t((-dv + long(Q)) % long(Q));
                        kernel[r * Q + c] = stats_.g(p, q, du, dv);
                    }
                fft_.forward(kernel, {spectra_.data() + pair_slot(p, q) * S, S});
            }
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t dim() const noexcept { return k_ * m_ * n_; }
    double lambda() const noexcept { return lambda_; }
    const StationaryStats& stats() const noexcept { return stats_; }
    std::size_t grid_rows() const noexcept { return fft_.rows(); }
    std::size_t grid_cols() const noexcept { return fft_.cols(); }

    /// Bytes held by the cached slice spectra.
    std::size_t slice_spectrum_bytes() const noexcept { return spectra_.size() * sizeof(cplx); }

    /// out = (S + lambda*I) in, both in the dense template order.
    void apply(std::span<const double> in, std::span<double> out) const {
        if (in.size() != dim() || out.size() != dim()) throw ShapeError("ToeplitzOperator::apply: size mismatch");
        const std::size_t Q = fft_.cols(), S = fft_.spectrum_size();
        std::vector<double> padded(fft_.size(), 0.0);
        std::vector<cplx> xs(k_ * S);
        for (std::size_t q = 0; q < k_; ++q) {
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) padded[u * Q + v] = in[Template::index(k_, m_, q, u, v)];
            fft_.forward(padded, {xs.data() + q * S, S});
        }
        std::vector<cplx> acc(S);
        for (std::size_t p = 0; p < k_; ++p) {
            std::fill(acc.begin(), acc.end(), cplx{});
            for (std::size_t q = 0; q < k_; ++q) {
                const cplx* kq = spectra_.data() + pair_slot(std::min(p, q), std::max(p, q)) * S;
                const cplx* xq = xs.data() + q * S;
                if (p <= q)
                    for (std::size_t i = 0; i < S; ++i) acc[i] += kq[i] * xq[i];
                else
                    for (std::size_t i = 0; i < S; ++i) acc[i] += std::conj(kq[i]) * xq[i];
            }
            fft_.inverse(acc, padded);
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) {
                    const std::size_t idx = Template::index(k_, m_, p, u, v);
                    out[idx] = padded[u * Q + v] + lambda_ * in[idx];
                }
        }
    }

    Template matvec(const Template& x) const {
        if (x.channels() != k_ || x.rows() != m_ || x.cols() != n_)
            throw ShapeError("ToeplitzOperator::matvec: template shape mismatch");
        Template z(k_, m_, n_);
        apply(x.values(), z.values());
        return z;
    }

    /// Dense (kd x kd) materialization in the template index order.
    Eigen::MatrixXd densify(std::size_t guard = kDenseGuard) const {
        const std::size_t D = dim();
        if (D > guard)
            throw ShapeError("densify: dimension " + std::to_string(D) + " exceeds dense guard " +
                             std::to_string(guard));
        Eigen::MatrixXd M(D, D);
        for (std::size_t v = 0; v < n_; ++v)
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t p = 0; p < k_; ++p) {
                    const std::size_t r = Template::index(k_, m_, p, u, v);
                    for (std::size_t j = 0; j < n_; ++j)
                        for (std::size_t i = 0; i < m_; ++i)
                            for (std::size_t q = 0; q < k_; ++q) {
                                const std::size_t c = Template::index(k_, m_, q, i, j);
                                if (c < r) continue;
                                double e = stats_.g(p, q, long(i) - long(u), long(j) - long(v));
                                if (c == r) e += lambda_;
                                M(Eigen::Index(r), Eigen::Index(c)) = e;
                                M(Eigen::Index(c), Eigen::Index(r)) = e;
                            }
                }
        return M;
    }

private:
    std::size_t pair_count() const noexcept { return k_ * (k_ + 1) / 2; }
    // Row-major packed upper triangle.
    std::size_t pair_slot(std::size_t p, std::size_t q) const noexcept {
        return p * k_ - p * (p - 1) / 2 + (q - p);
    }

    std::size_t k_, m_, n_;
    double lambda_;
    StationaryStats stats_;
    RealFft2 fft_;
    std::vector<cplx> spectra_;
};

}  // namespace slda
