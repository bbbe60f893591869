#pragma once

#include <complex>
#include <cstddef>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace slda {

using cplx = std::complex<double>;

/// Smallest integer >= n whose only prime factors are 2, 3, 5 and 7.
inline std::size_t efficient_fft_size(std::size_t n) {
    if (n <= 1) return 1;
    for (std::size_t c = n;; ++c) {
        std::size_t r = c;
        for (std::size_t f : {2u, 3u, 5u, 7u})
            while (r % f == 0) r /= f;
        if (r == 1) return c;
    }
}

namespace detail {
// FFTW's planner is not reentrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace detail

/// Two-dimensional real-to-complex transform of a rows x cols row-major grid.
///
/// The half spectrum holds rows x (cols/2 + 1) bins, row-major. `inverse`
/// includes the 1/(rows*cols) normalization, so inverse(forward(x)) == x.
/// Executing the same instance from several threads is safe.
class RealFft2 {
public:
    RealFft2(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {
        if (rows == 0 || cols == 0) throw ShapeError("RealFft2: empty grid");
        std::vector<double> real(size());
        std::vector<cplx> spec(spectrum_size());
        auto* sp = reinterpret_cast<fftw_complex*>(spec.data());
        std::lock_guard lock(detail::fftw_planner_mutex());
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        fwd_ = fftw_plan_dft_r2c_2d(int(rows), int(cols), real.data(), sp, flags);
        inv_ = fftw_plan_dft_c2r_2d(int(rows), int(cols), sp, real.data(), flags);
        if (!fwd_ || !inv_) throw Error("RealFft2: FFTW planning failed");
    }

    RealFft2(const RealFft2&) = delete;
    RealFft2& operator=(const RealFft2&) = delete;

    RealFft2(RealFft2&& o) noexcept
        : rows_(o.rows_), cols_(o.cols_), fwd_(o.fwd_), inv_(o.inv_) {
        o.fwd_ = nullptr;
        o.inv_ = nullptr;
    }

    RealFft2& operator=(RealFft2&& o) noexcept {
        if (this != &o) {
            release();
            rows_ = o.rows_;
            cols_ = o.cols_;
            fwd_ = o.fwd_;
            inv_ = o.inv_;
            o.fwd_ = nullptr;
            o.inv_ = nullptr;
        }
        return *this;
    }

    ~RealFft2() { release(); }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return rows_ * cols_; }
    std::size_t half_cols() const noexcept { return cols_ / 2 + 1; }
    std::size_t spectrum_size() const noexcept { return rows_ * half_cols(); }

    void forward(std::span<const double> in, std::span<cplx> out) const {
        if (in.size() != size() || out.size() != spectrum_size())
            throw ShapeError("RealFft2::forward: buffer size mismatch");
        // r2c never writes its input.
        fftw_execute_dft_r2c(fwd_, const_cast<double*>(in.data()),
                             reinterpret_cast<fftw_complex*>(out.data()));
    }

    /// Overwrites `in` (multi-dimensional c2r cannot preserve its input).
    void inverse(std::span<cplx> in, std::span<double> out) const {
        if (in.size() != spectrum_size() || out.size() != size())
            throw ShapeError("RealFft2::inverse: buffer size mismatch");
        fftw_execute_dft_c2r(inv_, reinterpret_cast<fftw_complex*>(in.data()),
                             out.data());
        const double scale = 1.0 / double(size());
        for (double& v : out) v *= scale;
    }

private:
    void release() noexcept {
        if (!fwd_ && !inv_) return;
        std::lock_guard lock(detail::fftw_planner_mutex());
        if (fwd_) fftw_destroy_plan(fwd_);
        if (inv_) fftw_destroy_plan(inv_);
        fwd_ = nullptr;
        inv_ = nullptr;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    fftw_plan fwd_ = nullptr;
    fftw_plan inv_ = nullptr;
};

}  // namespace slda
