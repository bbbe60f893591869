#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"
#include "fft.hpp"
#include "image.hpp"
#include "stats.hpp"
#include "toeplitz.hpp"

namespace slda {

/// Block two-level circulant covariance plus lambda*I, defined in the
/// spatial domain by h_pq[du, dv] with du in [0, m), dv in [0, n).
/// Element ((u,v,p), (i,j,q)) equals h_pq[(i-u) mod m, (j-v) mod n].
class CirculantCovariance {
public:
    CirculantCovariance() = default;

    CirculantCovariance(std::size_t channels, std::size_t m, std::size_t n, double lambda = 0.0)
        : k_(channels), m_(m), n_(n), lambda_(lambda), h_(channels * channels * m * n, 0.0) {
        if (channels == 0 || m == 0 || n == 0) throw ShapeError("CirculantCovariance: extents must be positive");
        if (!(lambda >= 0.0)) throw NumericalError("CirculantCovariance: lambda must be >= 0");
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t dim() const noexcept { return k_ * m_ * n_; }
    double lambda() const noexcept { return lambda_; }
    void set_lambda(double lambda) {
        if (!(lambda >= 0.0)) throw NumericalError("CirculantCovariance: lambda must be >= 0");
        lambda_ = lambda;
    }

    std::size_t index(std::size_t p, std::size_t q, std::size_t du, std::size_t dv) const {
        return ((p * k_ + q) * m_ + du) * n_ + dv;
    }
    double& h(std::size_t p, std::size_t q, std::size_t du, std::size_t dv) { return h_[index(p, q, du, dv)]; }
    double h(std::size_t p, std::size_t q, std::size_t du, std::size_t dv) const { return h_[index(p, q, du, dv)]; }
    std::span<const double> h_values() const noexcept { return h_; }

    /// Row-major m x n plane of the (p, q) slice.
    std::span<const double> slice(std::size_t p, std::size_t q) const {
        return {h_.data() + index(p, q, 0, 0), m_ * n_};
    }

    /// Largest |h_pq[du,dv] - h_qp[-du mod m, -dv mod n]|.
    double hermitian_defect() const {
        double worst = 0.0;
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = 0; q < k_; ++q)
                for (std::size_t du = 0; du < m_; ++du)
                    for (std::size_t dv = 0; dv < n_; ++dv)
                        worst = std::max(worst, std::abs(h(p, q, du, dv) - h(q, p, (m_ - du) % m_, (n_ - dv) % n_)));
        return worst;
    }

    /// Periodic multiply: z_p[u,v] = sum_q sum_ij h_pq[(i-u) mod m, (j-v) mod n] x_q[i,j] + lambda x_p[u,v].
    void apply(std::span<const double> in, std::span<double> out) const {
        if (in.size() != dim() || out.size() != dim()) throw ShapeError("CirculantCovariance::apply: size mismatch");
        const RealFft2 fft(m_, n_);
        const std::size_t S = fft.spectrum_size();
        std::vector<double> plane(m_ * n_);
        std::vector<cplx> hs(k_ * k_ * S), xs(k_ * S), acc(S);
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = 0; q < k_; ++q) fft.forward(slice(p, q), {hs.data() + (p * k_ + q) * S, S});
        for (std::size_t q = 0; q < k_; ++q) {
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) plane[u * n_ + v] = in[Template::index(k_, m_, q, u, v)];
            fft.forward(plane, {xs.data() + q * S, S});
        }
        for (std::size_t p = 0; p < k_; ++p) {
            std::fill(acc.begin(), acc.end(), cplx{});
            for (std::size_t q = 0; q < k_; ++q) {
                const cplx* hq = hs.data() + (p * k_ + q) * S;
                const cplx* xq = xs.data() + q * S;
                for (std::size_t i = 0; i < S; ++i) acc[i] += std::conj(hq[i]) * xq[i];
            }
            fft.inverse(acc, plane);
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) {
                    const std::size_t idx = Template::index(k_, m_, p, u, v);
                    out[idx] = plane[u * n_ + v] + lambda_ * in[idx];
                }
        }
    }

    Template matvec(const Template& x) const {
        if (x.channels() != k_ || x.rows() != m_ || x.cols() != n_)
            throw ShapeError("CirculantCovariance::matvec: template shape mismatch");
        Template z(k_, m_, n_);
        apply(x.values(), z.values());
        return z;
    }

    Eigen::MatrixXd densify(std::size_t guard = kDenseGuard) const {
        const std::size_t D = dim();
        if (D > guard)
            throw ShapeError("densify: dimension " + std::to_string(D) + " exceeds dense guard " +
                             std::to_string(guard));
        Eigen::MatrixXd M(D, D);
        for (std::size_t v = 0; v < n_; ++v)
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t p = 0; p < k_; ++p)
                    for (std::size_t j = 0; j < n_; ++j)
                        for (std::size_t i = 0; i < m_; ++i)
                            for (std::size_t q = 0; q < k_; ++q) {
                                double e = h(p, q, (i + m_ - u) % m_, (j + n_ - v) % n_);
                                const std::size_t r = Template::index(k_, m_, p, u, v);
                                const std::size_t c = Template::index(k_, m_, q, i, j);
                                if (r == c) e += lambda_;
                                M(Eigen::Index(r), Eigen::Index(c)) = e;
                            }
        return M;
    }

private:
    std::size_t k_ = 0, m_ = 0, n_ = 0;
    double lambda_ = 0.0;
    std::vector<double> h_;
};

/// Frobenius-nearest block two-level circulant to the Toeplitz matrix of `s`
/// for m x n templates. Each wrapped displacement is a convex combination of
/// the (up to) four Toeplitz displacements that alias onto it, weighted by
/// how often each is observed under periodic extension.
inline CirculantCovariance project_from_toeplitz(const StationaryStats& s, std::size_t m, std::size_t n,
                                                 double lambda = 0.0) {
    s.require_cover(m, n, "project_from_toeplitz");
    CirculantCovariance c(s.channels(), m, n, lambda);
    for (std::size_t du = 0; du < m; ++du)
        for (std::size_t dv = 0; dv < n; ++dv) {
            const double a = double(du) / double(m), b = double(dv) / double(n);
            const long fu = long(du), bu = du == 0 ? 0 : long(du) - long(m);
            const long fv = long(dv), bv = dv == 0 ? 0 : long(dv) - long(n);
            for (std::size_t p = 0; p < s.channels(); ++p)
                for (std::size_t q = 0; q < s.channels(); ++q)
                    c.h(p, q, du, dv) = (1 - a) * (1 - b) * s.g(p, q, fu, fv) + (1 - a) * b * s.g(p, q, fu, bv) +
                                        a * (1 - b) * s.g(p, q, bu, fv) + a * b * s.g(p, q, bu, bv);
        }
    return c;
}

/// Per-bin k x k spectral sums of sample windows, the multi-channel
/// correlation filter route to a circulant covariance. Bins cover the real
/// half spectrum: m rows by n/2 + 1 columns.
class SpectralBlocks {
public:
    SpectralBlocks(std::size_t channels, std::size_t m, std::size_t n)
        : k_(channels), m_(m), n_(n), fft_(m, n), blocks_(fft_.spectrum_size() * channels * channels) {}

    std::size_t channels() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t bins() const noexcept { return fft_.spectrum_size(); }
    std::size_t half_cols() const noexcept { return fft_.half_cols(); }
    std::size_t window_count() const noexcept { return count_; }

    /// Unnormalized sum over windows of xhat[u,v] xhat[u,v]^H at a half-spectrum bin.
    Eigen::MatrixXcd block(std::size_t u, std::size_t v) const {
        Eigen::MatrixXcd B(k_, k_);
        const std::size_t b = u * half_cols() + v;
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = 0; q < k_; ++q) B(Eigen::Index(p), Eigen::Index(q)) = blocks_[(b * k_ + p) * k_ + q];
        return B;
    }

    void add_window(const FeatureImage& x) {
        if (x.channels() != k_ || x.height() != m_ || x.width() != n_)
            throw ShapeError("SpectralBlocks::add_window: window shape mismatch");
        if (!x.all_finite()) throw NumericalError("SpectralBlocks::add_window: non-finite window");
        const std::size_t S = bins();
        std::vector<cplx> xs(k_ * S);
        for (std::size_t p = 0; p < k_; ++p) fft_.forward(x.plane(p), {xs.data() + p * S, S});
        for (std::size_t b = 0; b < S; ++b)
            for (std::size_t p = 0; p < k_; ++p)
                for (std::size_t q = 0; q < k_; ++q) blocks_[(b * k_ + p) * k_ + q] += xs[p * S + b] * std::conj(xs[q * S + b]);
        ++count_;
    }

    /// Spatial-domain covariance averaged over windows and their m*n circular shifts.
    CirculantCovariance to_covariance(double lambda = 0.0) const {
        if (count_ == 0) throw ShapeError("SpectralBlocks::to_covariance: no windows");
        CirculantCovariance c(k_, m_, n_, lambda);
        const std::size_t S = bins();
        const double norm = 1.0 / (double(count_) * double(m_ * n_));
        std::vector<cplx> spec(S);
        std::vector<double> plane(m_ * n_);
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = 0; q < k_; ++q) {
                // The block entry (p, q) is conj(hhat_pq).
                for (std::size_t b = 0; b < S; ++b) spec[b] = std::conj(blocks_[(b * k_ + p) * k_ + q]) * norm;
                fft_.inverse(spec, plane);
                for (std::size_t du = 0; du < m_; ++du)
                    for (std::size_t dv = 0; dv < n_; ++dv) c.h(p, q, du, dv) = plane[du * n_ + dv];
            }
        return c;
    }

private:
    std::size_t k_, m_, n_;
    RealFft2 fft_;
    std::vector<cplx> blocks_;
    std::size_t count_ = 0;
};

inline SpectralBlocks accumulate_window_spectra(std::span<const FeatureImage> windows) {
    if (windows.empty()) throw ShapeError("accumulate_from_windows: empty window list");
    const auto& w0 = windows.front();
    SpectralBlocks blocks(w0.channels(), w0.height(), w0.width());
    for (const auto& w : windows) blocks.add_window(w);
    return blocks;
}

inline CirculantCovariance accumulate_from_windows(std::span<const FeatureImage> windows, double lambda = 0.0) {
    return accumulate_window_spectra(windows).to_covariance(lambda);
}

/// Per-bin Cholesky factors of the block-diagonalized circulant system.
/// Bin (u, v) holds Shat_uv = (conj(hhat_pq[u, v]))_pq + lambda*I.
class CirculantFactorization {
public:
    explicit CirculantFactorization(const CirculantCovariance& c)
        : k_(c.channels()), m_(c.rows()), n_(c.cols()), fft_(m_, n_) {
        const double scale = std::max(1.0, *std::max_element(c.h_values().begin(), c.h_values().end(),
                                                             [](double a, double b) { return std::abs(a) < std::abs(b); }));
        if (c.hermitian_defect() > 1e-9 * std::abs(scale))
            throw NumericalError("CirculantFactorization: h violates h_pq[d] = h_qp[-d]");
        const std::size_t S = fft_.spectrum_size();
        std::vector<cplx> hs(k_ * k_ * S);
        for (std::size_t p = 0; p < k_; ++p)
            for (std::size_t q = p; q < k_; ++q) fft_.forward(c.slice(p, q), {hs.data() + (p * k_ + q) * S, S});
        factors_.reserve(S);
        Eigen::MatrixXcd B(k_, k_);
        for (std::size_t b = 0; b < S; ++b) {
            for (std::size_t p = 0; p < k_; ++p)
                for (std::size_t q = p; q < k_; ++q) {
                    const cplx e = std::conj(hs[(p * k_ + q) * S + b]);
                    B(Eigen::Index(p), Eigen::Index(q)) = e;
                    B(Eigen::Index(q), Eigen::Index(p)) = std::conj(e);
                }
            for (std::size_t p = 0; p < k_; ++p)
                B(Eigen::Index(p), Eigen::Index(p)) = cplx(B(Eigen::Index(p), Eigen::Index(p)).real() + c.lambda(), 0.0);
            factors_.emplace_back(B);
            if (factors_.back().info() != Eigen::Success)
                throw NumericalError("circulant factorization: block at Fourier bin (" + std::to_string(b / fft_.half_cols()) +
                                     ", " + std::to_string(b % fft_.half_cols()) +
                                     ") is not positive definite; increase lambda or check the statistics");
        }
    }

    std::size_t channels() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    std::size_t dim() const noexcept { return k_ * m_ * n_; }
    std::size_t bins() const noexcept { return factors_.size(); }

    /// Bytes of factor storage (one dense k x k complex matrix per half-spectrum bin).
    std::size_t factor_bytes() const noexcept { return factors_.size() * k_ * k_ * sizeof(cplx); }

    /// Reassembled block for any bin of the full m x n spectrum.
    Eigen::MatrixXcd block(std::size_t u, std::size_t v) const {
        if (v < fft_.half_cols()) return factors_[u * fft_.half_cols() + v].reconstructedMatrix();
        // Real data: Shat at (-u, -v) is the conjugate.
        return factors_[((m_ - u) % m_) * fft_.half_cols() + (n_ - v)].reconstructedMatrix().conjugate();
    }

    /// out = (C + lambda*I)^{-1} in.
    void apply(std::span<const double> in, std::span<double> out) const {
        if (in.size() != dim() || out.size() != dim()) throw ShapeError("CirculantFactorization::solve: size mismatch");
        const std::size_t S = fft_.spectrum_size();
        std::vector<double> plane(m_ * n_);
        std::vector<cplx> bs(k_ * S);
        for (std::size_t p = 0; p < k_; ++p) {
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) plane[u * n_ + v] = in[Template::index(k_, m_, p, u, v)];
            fft_.forward(plane, {bs.data() + p * S, S});
        }
        Eigen::VectorXcd rhs(k_);
        for (std::size_t b = 0; b < S; ++b) {
            for (std::size_t p = 0; p < k_; ++p) rhs(Eigen::Index(p)) = bs[p * S + b];
            factors_[b].solveInPlace(rhs);
            for (std::size_t p = 0; p < k_; ++p) bs[p * S + b] = rhs(Eigen::Index(p));
        }
        for (std::size_t p = 0; p < k_; ++p) {
            fft_.inverse({bs.data() + p * S, S}, plane);
            for (std::size_t u = 0; u < m_; ++u)
                for (std::size_t v = 0; v < n_; ++v) out[Template::index(k_, m_, p, u, v)] = plane[u * n_ + v];
        }
    }

    Template solve(const Template& b) const {
        if (b.channels() != k_ || b.rows() != m_ || b.cols() != n_)
            throw ShapeError("CirculantFactorization::solve: template shape mismatch");
        Template w(k_, m_, n_);
        apply(b.values(), w.values());
        return w;
    }

private:
    std::size_t k_, m_, n_;
    RealFft2 fft_;
    std::vector<Eigen::LLT<Eigen::MatrixXcd>> factors_;
};

inline CirculantFactorization factorize(const CirculantCovariance& c) { return CirculantFactorization(c); }

}  // namespace slda
