#pragma once

#include <cstddef>
#include <ostream>
#include <string>

#include "fft.hpp"
#include "trainer.hpp"

namespace slda {

// Auxiliary memory of each training method, computed from the data layout
// the implementation uses (not sampled from the allocator).

/// Cached Toeplitz slice spectra: k(k+1)/2 real-input half spectra on the padded grid.
inline std::size_t toeplitz_slice_bytes(std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t P = efficient_fft_size(2 * m - 1), Q = efficient_fft_size(2 * n - 1);
    return k * (k + 1) / 2 * P * (Q / 2 + 1) * sizeof(cplx);
}

/// One dense k x k complex factor per half-spectrum bin.
inline std::size_t circulant_factor_bytes(std::size_t k, std::size_t m, std::size_t n) {
    return m * (n / 2 + 1) * k * k * sizeof(cplx);
}

/// Dense kd x kd Cholesky factor.
inline std::size_t dense_factor_bytes(std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t d = k * m * n;
    return d * d * sizeof(double);
}

inline std::size_t method_memory_bytes(Method method, std::size_t k, std::size_t m, std::size_t n) {
    const std::size_t vec = k * m * n * sizeof(double);
    switch (method) {
        case Method::cholesky: return dense_factor_bytes(k, m, n);
        case Method::cg: return toeplitz_slice_bytes(k, m, n) + 4 * vec;
        case Method::pcg: return toeplitz_slice_bytes(k, m, n) + circulant_factor_bytes(k, m, n) + 5 * vec;
        case Method::circulant: return circulant_factor_bytes(k, m, n) + vec;
    }
    return 0;
}

struct BenchRow {
    Method method = Method::pcg;
    std::size_t k = 0, m = 0, n = 0;
    double lambda = 0.0;
    double tolerance = 0.0;
    std::size_t repeat = 0;
    std::size_t iterations = 0;
    double cold_seconds = 0.0;
    double warm_seconds = 0.0;
    std::size_t memory_bytes = 0;
    double final_residual = 0.0;
};

inline void write_bench_header(std::ostream& os) {
    os << "method,k,m,n,lambda,tolerance,repeat,iterations,cold_s,warm_s,memory_bytes,final_residual\n";
}

inline void write_bench_row(std::ostream& os, const BenchRow& r) {
    const auto old = os.precision(10);
    os << to_string(r.method) << ',' << r.k << ',' << r.m << ',' << r.n << ',' << r.lambda << ',' << r.tolerance << ','
       << r.repeat << ',' << r.iterations << ',' << r.cold_seconds << ',' << r.warm_seconds << ',' << r.memory_bytes
       << ',' << r.final_residual << '\n';
    os.precision(old);
}

}  // namespace slda
