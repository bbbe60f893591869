#pragma once

// Test-only reference constructions. These build everything densely from
// the defining formulas and share no code path with the FFT routines.

#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include <slda/image.hpp>
#include <slda/stats.hpp>

namespace oracle {

using Rng = std::mt19937_64;

inline std::size_t idx(std::size_t k, std::size_t m, std::size_t p, std::size_t u, std::size_t v) {
    return (v * m + u) * k + p;
}

/// Random g with the exact symmetry g_pq[d] = g_qp[-d].
inline slda::StationaryStats random_stats(std::size_t k, std::size_t du, std::size_t dv, Rng& rng) {
    std::uniform_real_distribution<double> U(-1.0, 1.0);
    slda::StationaryStats raw(k, du, dv), s(k, du, dv);
    for (double& x : raw.g_values()) x = U(rng);
    const long DU = long(du), DV = long(dv);
    for (std::size_t p = 0; p < k; ++p) {
        s.mu(p) = U(rng);
        for (std::size_t q = 0; q < k; ++q)
            for (long a = -DU; a <= DU; ++a)
                for (long b = -DV; b <= DV; ++b) s.g(p, q, a, b) = 0.5 * (raw.g(p, q, a, b) + raw.g(q, p, -a, -b));
    }
    return s;
}

/// Dense Toeplitz matrix S_(u,v,p),(i,j,q) = g_pq[i-u, j-v] + lambda*delta.
inline Eigen::MatrixXd dense_toeplitz(const slda::StationaryStats& s, std::size_t m, std::size_t n, double lambda) {
    const std::size_t k = s.channels(), D = k * m * n;
    Eigen::MatrixXd M(D, D);
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t q = 0; q < k; ++q)
                            M(idx(k, m, p, u, v), idx(k, m, q, i, j)) =
                                s.g(p, q, long(i) - long(u), long(j) - long(v)) +
                                ((p == q && u == i && v == j) ? lambda : 0.0);
    return M;
}

/// Dense circulant matrix from h[p][q][du][dv] (du in [0,m), dv in [0,n)).
inline Eigen::MatrixXd dense_circulant(const std::vector<double>& h, std::size_t k, std::size_t m, std::size_t n,
                                       double lambda) {
    const std::size_t D = k * m * n;
    Eigen::MatrixXd M(D, D);
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t q = 0; q < k; ++q)
                            M(idx(k, m, p, u, v), idx(k, m, q, i, j)) =
                                h[((p * k + q) * m + (i + m - u) % m) * n + (j + n - v) % n] +
                                ((p == q && u == i && v == j) ? lambda : 0.0);
    return M;
}

/// Frobenius-nearest circulant: mean of dense entries over each wrapped
/// displacement class. Returned as h[p][q][du][dv].
inline std::vector<double> diagonal_average(const Eigen::MatrixXd& T, std::size_t k, std::size_t m, std::size_t n) {
    std::vector<double> h(k * k * m * n, 0.0);
    for (std::size_t u = 0; u < m; ++u)
        for (std::size_t v = 0; v < n; ++v)
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j)
                        for (std::size_t q = 0; q < k; ++q)
                            h[((p * k + q) * m + (i + m - u) % m) * n + (j + n - v) % n] +=
                                T(idx(k, m, p, u, v), idx(k, m, q, i, j));
    for (double& x : h) x /= double(m * n);
    return h;
}

/// (1 / (N m n)) sum over windows and all m*n circular shifts of s s^T.
inline Eigen::MatrixXd shift_covariance(const std::vector<slda::FeatureImage>& windows) {
    const auto& w0 = windows.front();
    const std::size_t k = w0.channels(), m = w0.height(), n = w0.width(), D = k * m * n;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(D, D);
    Eigen::VectorXd x(D);
    for (const auto& w : windows)
        for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < n; ++b) {
                for (std::size_t p = 0; p < k; ++p)
                    for (std::size_t u = 0; u < m; ++u)
                        for (std::size_t v = 0; v < n; ++v) x(idx(k, m, p, u, v)) = w.at(p, (u + a) % m, (v + b) % n);
                S += x * x.transpose();
            }
    return S / double(windows.size() * m * n);
}

/// Per-channel unnormalized 2-D DFT as a dense matrix acting on the template order.
inline Eigen::MatrixXcd dft_matrix(std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t D = k * m * n;
    Eigen::MatrixXcd F = Eigen::MatrixXcd::Zero(D, D);
    for (std::size_t fu = 0; fu < m; ++fu)
        for (std::size_t fv = 0; fv < n; ++fv)
            for (std::size_t u = 0; u < m; ++u)
                for (std::size_t v = 0; v < n; ++v) {
                    const double ang = -2.0 * std::numbers::pi * (double(fu * u) / double(m) + double(fv * v) / double(n));
                    for (std::size_t p = 0; p < k; ++p) F(idx(k, m, p, fu, fv), idx(k, m, p, u, v)) = std::polar(1.0, ang);
                }
    return F;
}

/// Direct sum over in-bounds pairs of f_p[u,v] f_q[u+du, v+dv].
inline double pair_sum(const slda::FeatureImage& f, std::size_t p, std::size_t q, long du, long dv) {
    double s = 0.0;
    for (long u = 0; u < long(f.height()); ++u)
        for (long v = 0; v < long(f.width()); ++v) {
            const long i = u + du, j = v + dv;
            if (i < 0 || j < 0 || i >= long(f.height()) || j >= long(f.width())) continue;
            s += f.at(p, std::size_t(u), std::size_t(v)) * f.at(q, std::size_t(i), std::size_t(j));
        }
    return s;
}

inline slda::FeatureImage random_image(std::size_t k, std::size_t h, std::size_t w, Rng& rng, double lo = 0.0,
                                       double hi = 1.0) {
    std::uniform_real_distribution<double> U(lo, hi);
    slda::FeatureImage f(k, h, w);
    for (double& x : f.values()) x = U(rng);
    return f;
}

inline Eigen::MatrixXd random_spd(std::size_t n, Rng& rng, double shift = 0.5) {
    std::normal_distribution<double> N;
    Eigen::MatrixXd B(n, n);
    for (Eigen::Index i = 0; i < B.size(); ++i) B.data()[i] = N(rng);
    return B * B.transpose() / double(n) + shift * Eigen::MatrixXd::Identity(n, n);
}

inline double rel(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (a - b).norm() / b.norm(); }

inline Eigen::VectorXd vec(std::span<const double> x) {
    return Eigen::Map<const Eigen::VectorXd>(x.data(), Eigen::Index(x.size()));
}

}  // namespace oracle
