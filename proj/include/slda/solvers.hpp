#pragma once

#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "error.hpp"

namespace slda {

/// Anything that maps a vector of dim() doubles to another.
template <class Op>
concept LinearOperator = requires(const Op& op, std::span<const double> in, std::span<double> out) {
    { op.dim() } -> std::convertible_to<std::size_t>;
    op.apply(in, out);
};

struct IdentityOperator {
    std::size_t n;
    std::size_t dim() const noexcept { return n; }
    void apply(std::span<const double> in, std::span<double> out) const {
        std::copy(in.begin(), in.end(), out.begin());
    }
};

/// Non-owning view of a dense matrix as an operator.
struct DenseOperator {
    const Eigen::MatrixXd* matrix;
    std::size_t dim() const noexcept { return std::size_t(matrix->rows()); }
    void apply(std::span<const double> in, std::span<double> out) const {
        Eigen::Map<const Eigen::VectorXd> x(in.data(), Eigen::Index(in.size()));
        Eigen::Map<Eigen::VectorXd> y(out.data(), Eigen::Index(out.size()));
        y.noalias() = (*matrix) * x;
    }
};

struct SolveOptions {
    double tolerance = 1e-6;     // on ||A w - b|| / ||b||
    std::size_t max_iterations = 500;
    bool record_history = true;
    std::size_t refresh_interval = 50;  // explicit residual recomputation period

    void validate() const {
        if (!(tolerance > 0.0)) throw Error("SolveOptions: tolerance must be > 0");
        if (max_iterations < 1) throw Error("SolveOptions: max_iterations must be >= 1");
    }
};

struct SolveReport {
    std::vector<double> solution;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history;  // iterations + 1 entries when recorded
    std::vector<double> warm_time_history; // cumulative warm seconds at each history entry
    double cold_seconds = 0.0;             // setup, factorization, pre-computable transforms
    double warm_seconds = 0.0;             // the per-solve part
};

namespace detail {

using clock = std::chrono::steady_clock;

inline double seconds_since(clock::time_point t0) {
    return std::chrono::duration<double>(clock::now() - t0).count();
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void require_finite(double x, const char* what) {
    if (!std::isfinite(x)) throw NumericalError(std::string(what) + ": non-finite value encountered");
}

}  // namespace detail

/// Preconditioned conjugate gradient from w0 = 0.
///
/// `precond.apply` must apply a symmetric positive definite approximation of
/// A^{-1}. The residual that is tested and recorded is the unpreconditioned
/// ||A w - b|| / ||b||; the recurrence residual is replaced by an explicit
/// b - A w every `refresh_interval` iterations and before declaring
/// convergence.
template <LinearOperator Op, LinearOperator Precond>
SolveReport pcg(const Op& A, const Precond& precond, std::span<const double> b, const SolveOptions& opts = {}) {
    opts.validate();
    const std::size_t n = A.dim();
    if (b.size() != n || precond.dim() != n) throw ShapeError("pcg: dimension mismatch");
    for (double x : b) detail::require_finite(x, "pcg right-hand side");

    const auto t0 = detail::clock::now();
    SolveReport rep;
    rep.solution.assign(n, 0.0);
    const double bnorm = detail::norm(b);
    if (bnorm == 0.0) {
        rep.converged = true;
        if (opts.record_history) {
            rep.residual_history.push_back(0.0);
            rep.warm_time_history.push_back(0.0);
        }
        return rep;
    }

    std::vector<double> r(b.begin(), b.end()), z(n), p(n), Ap(n);
    auto& w = rep.solution;
    auto record = [&](double res) {
        if (!opts.record_history) return;
        rep.residual_history.push_back(res);
        rep.warm_time_history.push_back(detail::seconds_since(t0));
    };
    auto refresh = [&] {
        A.apply(w, Ap);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - Ap[i];
    };

    double res = 1.0;
    record(res);
    precond.apply(r, z);
    p = z;
    double rz = detail::dot(r, z);
    detail::require_finite(rz, "pcg");

    std::size_t it = 0;
    while (it < opts.max_iterations) {
        A.apply(p, Ap);
        const double curvature = detail::dot(p, Ap);
        detail::require_finite(curvature, "pcg");
        if (curvature <= 0.0)
            throw NumericalError("pcg: non-positive curvature <p, Ap> = " + std::to_string(curvature) +
                                 " at iteration " + std::to_string(it) + "; operator is not positive definite");
        const double alpha = rz / curvature;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] += alpha * p[i];
            r[i] -= alpha * Ap[i];
        }
        ++it;
        if (opts.refresh_interval && it % opts.refresh_interval == 0) refresh();
        res = detail::norm(r) / bnorm;
        detail::require_finite(res, "pcg");
        if (res <= opts.tolerance) {
            refresh();
            res = detail::norm(r) / bnorm;
            if (res <= opts.tolerance) {
                record(res);
                rep.converged = true;
                break;
            }
        }
        record(res);
        if (it == opts.max_iterations) break;

        precond.apply(r, z);
        const double rz_next = detail::dot(r, z);
        detail::require_finite(rz_next, "pcg");
        const double beta = rz_next / rz;
        rz = rz_next;
        for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    rep.iterations = it;
    rep.final_residual = res;
    rep.warm_seconds = detail::seconds_since(t0);
    return rep;
}

/// Plain conjugate gradient; the same iteration as pcg with M = I.
template <LinearOperator Op>
SolveReport cg(const Op& A, std::span<const double> b, const SolveOptions& opts = {}) {
    return pcg(A, IdentityOperator{A.dim()}, b, opts);
}

/// Dense Cholesky factor with the timing of its construction.
class DenseCholesky {
public:
    explicit DenseCholesky(const Eigen::MatrixXd& A) {
        if (A.rows() != A.cols()) throw ShapeError("dense_cholesky: matrix is not square");
        const auto t0 = detail::clock::now();
        llt_.compute(A);
        if (llt_.info() != Eigen::Success) {
            throw NumericalError("dense_cholesky: matrix is not positive definite (pivot " +
                                 std::to_string(failing_pivot(A)) + ")");
        }
        factor_seconds_ = detail::seconds_since(t0);
    }

    std::size_t dim() const noexcept { return std::size_t(llt_.rows()); }
    double factor_seconds() const noexcept { return factor_seconds_; }

    void apply(std::span<const double> in, std::span<double> out) const {
        Eigen::Map<const Eigen::VectorXd> x(in.data(), Eigen::Index(in.size()));
        Eigen::Map<Eigen::VectorXd> y(out.data(), Eigen::Index(out.size()));
        y = llt_.solve(x);
    }

    /// Index of the first pivot an unblocked Cholesky finds non-positive.
    static std::size_t failing_pivot(const Eigen::MatrixXd& A) {
        const Eigen::Index n = A.rows();
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = A(j, j) - L.row(j).head(j).squaredNorm();
            if (!(d > 0.0)) return std::size_t(j);
            L(j, j) = std::sqrt(d);
            for (Eigen::Index i = j + 1; i < n; ++i) L(i, j) = (A(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
        }
        return std::size_t(n);
    }

private:
    Eigen::LLT<Eigen::MatrixXd> llt_;
    double factor_seconds_ = 0.0;
};

/// Direct solve; cold time is the factorization, warm time the triangular solves.
inline SolveReport dense_cholesky_solve(const Eigen::MatrixXd& A, std::span<const double> b) {
    if (std::size_t(A.rows()) != b.size()) throw ShapeError("dense_cholesky_solve: dimension mismatch");
    const DenseCholesky chol(A);
    const auto t0 = detail::clock::now();
    SolveReport rep;
    rep.solution.resize(b.size());
    chol.apply(b, rep.solution);
    rep.warm_seconds = detail::seconds_since(t0);
    rep.cold_seconds = chol.factor_seconds();
    std::vector<double> Aw(b.size());
    DenseOperator{&A}.apply(rep.solution, Aw);
    double rn = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) rn += (Aw[i] - b[i]) * (Aw[i] - b[i]);
    const double bn = detail::norm(b);
    rep.final_residual = bn > 0 ? std::sqrt(rn) / bn : 0.0;
    rep.converged = true;
    return rep;
}

/// CSV rows: iteration, residual, cumulative warm time in seconds.
inline void write_residual_csv(std::ostream& os, const SolveReport& rep) {
    os << "iteration,residual,warm_seconds\n";
    os.precision(17);
    for (std::size_t i = 0; i < rep.residual_history.size(); ++i)
        os << i << ',' << rep.residual_history[i] << ',' << rep.warm_time_history[i] << '\n';
}

}  // namespace slda
