#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "circulant.hpp"
#include "error.hpp"
#include "image.hpp"
#include "io.hpp"
#include "solvers.hpp"
#include "stats.hpp"
#include "toeplitz.hpp"

namespace slda {

enum class Method { cholesky, cg, pcg, circulant };

inline std::string_view to_string(Method m) {
    switch (m) {
        case Method::cholesky: return "chol";
        case Method::cg: return "cg";
        case Method::pcg: return "pcg";
        case Method::circulant: return "circ";
    }
    return "?";
}

inline Method parse_method(std::string_view s) {
    if (s == "chol" || s == "cholesky") return Method::cholesky;
    if (s == "cg") return Method::cg;
    if (s == "pcg") return Method::pcg;
    if (s == "circ" || s == "circulant") return Method::circulant;
    throw Error("unknown method '" + std::string(s) + "' (expected chol, cg, pcg or circ)");
}

/// Linear detector: a window x fires when w^T x exceeds `threshold`.
struct DetectorTemplate {
    Template weights;
    double threshold = 0.0;
    std::map<std::string, std::string> metadata;

    std::size_t channels() const noexcept { return weights.channels(); }
    std::size_t rows() const noexcept { return weights.rows(); }
    std::size_t cols() const noexcept { return weights.cols(); }
};

struct TrainRequest {
    Template positive_mean;
    Method method = Method::pcg;
    double lambda = kDefaultLambda;
    SolveOptions options;
    bool toeplitz_diagnostic = true;  // circulant method only
};

struct TrainResult {
    DetectorTemplate detector;
    SolveReport report;
    /// ||S w - b|| / ||b|| against the Toeplitz system, for the circulant method.
    std::optional<double> toeplitz_residual;
};

/// b_p[u,v] = pos_mean_p[u,v] - mu_p.
inline Template build_rhs(const Template& pos_mean, const StationaryStats& stats) {
    if (pos_mean.channels() != stats.channels())
        throw ShapeError("build_rhs: positive mean has " + std::to_string(pos_mean.channels()) +
                         " channels, statistics have " + std::to_string(stats.channels()));
    Template b = pos_mean;
    for (std::size_t v = 0; v < b.cols(); ++v)
        for (std::size_t u = 0; u < b.rows(); ++u)
            for (std::size_t p = 0; p < b.channels(); ++p) b.at(p, u, v) -= stats.mu(p);
    return b;
}

/// Midpoint of the class score means; stored on the detector.
inline double calibrate_threshold(DetectorTemplate& det, std::span<const double> pos_scores,
                                  std::span<const double> neg_scores) {
    if (pos_scores.empty() || neg_scores.empty()) throw Error("calibrate_threshold: empty score list");
    auto mean = [](std::span<const double> s) {
        double acc = 0.0;
        for (double x : s) acc += x;
        return acc / double(s.size());
    };
    det.threshold = 0.5 * (mean(pos_scores) + mean(neg_scores));
    std::ostringstream os;
    os.precision(17);
    os << det.threshold;
    det.metadata["threshold"] = os.str();
    det.metadata["threshold_rule"] = "class-mean-midpoint";
    return det.threshold;
}

/// Trains detectors of any size against one set of negative statistics.
///
/// Operators, circulant factors and dense Cholesky factors are cached per
/// (m, n, lambda), so only the first request of a geometry pays the cold
/// cost. Cached structures are immutable; `train` may be called concurrently.
class Trainer {
public:
    explicit Trainer(StationaryStats stats)
        : stats_(std::make_shared<const StationaryStats>(std::move(stats))), fingerprint_(fingerprint(*stats_)) {}

    const StationaryStats& stats() const noexcept { return *stats_; }
    const std::string& stats_fingerprint() const noexcept { return fingerprint_; }

    TrainResult train(const TrainRequest& req) const {
        const Template& pm = req.positive_mean;
        const std::size_t m = pm.rows(), n = pm.cols();
        stats_->require_cover(m, n, "train");
        const Template b = build_rhs(pm, *stats_);
        if (std::all_of(b.values().begin(), b.values().end(), [](double x) { return x == 0.0; }))
            throw NumericalError("train: right-hand side is zero (positive mean equals the negative mean)");

        const auto t0 = detail::clock::now();
        TrainResult out;
        SolveReport& rep = out.report;
        const std::string ctx = "train[" + std::string(to_string(req.method)) + "]: ";
        try {
            switch (req.method) {
                case Method::cholesky: {
                    auto chol = cholesky_for(m, n, req.lambda);
                    const double cold = detail::seconds_since(t0);
                    const auto t1 = detail::clock::now();
                    rep.solution.resize(b.size());
                    chol->apply(b.values(), rep.solution);
                    rep.warm_seconds = detail::seconds_since(t1);
                    rep.cold_seconds = cold;
                    rep.converged = true;
                    rep.final_residual =
                        relative_residual(ToeplitzOperator(*stats_, m, n, req.lambda), rep.solution, b.values());
                    if (req.options.record_history) {
                        rep.residual_history = {rep.final_residual};
                        rep.warm_time_history = {rep.warm_seconds};
                    }
                    break;
                }
                case Method::cg: {
                    auto op = toeplitz_for(m, n, req.lambda);
                    const double cold = detail::seconds_since(t0);
                    rep = cg(*op, b.values(), req.options);
                    rep.cold_seconds = cold;
                    break;
                }
                case Method::pcg: {
                    auto op = toeplitz_for(m, n, req.lambda);
                    auto pre = circulant_for(m, n, req.lambda);
                    const double cold = detail::seconds_since(t0);
                    rep = pcg(*op, *pre, b.values(), req.options);
                    rep.cold_seconds = cold;
                    break;
                }
                case Method::circulant: {
                    auto fac = circulant_for(m, n, req.lambda);
                    const double cold = detail::seconds_since(t0);
                    const auto t1 = detail::clock::now();
                    rep.solution.resize(b.size());
                    fac->apply(b.values(), rep.solution);
                    rep.warm_seconds = detail::seconds_since(t1);
                    rep.cold_seconds = cold;
                    rep.converged = true;
                    // Residual of the circulant system itself; exact up to rounding.
                    const auto circ = project_from_toeplitz(*stats_, m, n, req.lambda);
                    rep.final_residual = relative_residual(circ, rep.solution, b.values());
                    if (req.options.record_history) {
                        rep.residual_history = {rep.final_residual};
                        rep.warm_time_history = {rep.warm_seconds};
                    }
                    if (req.toeplitz_diagnostic) {
                        const ToeplitzOperator op(*stats_, m, n, req.lambda);
                        out.toeplitz_residual = relative_residual(op, rep.solution, b.values());
                    }
                    break;
                }
            }
        } catch (const NumericalError& e) {
            throw NumericalError(ctx + e.what());
        } catch (const ShapeError& e) {
            throw ShapeError(ctx + e.what());
        }

        for (double x : rep.solution)
            if (!std::isfinite(x)) throw NumericalError(ctx + "solution has non-finite weights");

        DetectorTemplate& det = out.detector;
        det.weights = Template(pm.channels(), m, n, rep.solution);
        auto fmt = [](double x) {
            std::ostringstream os;
            os.precision(17);
            os << x;
            return os.str();
        };
        det.metadata["method"] = std::string(to_string(req.method));
        det.metadata["lambda"] = fmt(req.lambda);
        det.metadata["tol"] = fmt(req.options.tolerance);
        det.metadata["iterations"] = std::to_string(rep.iterations);
        det.metadata["stats"] = fingerprint_;
        det.metadata["residual"] = fmt(rep.final_residual);
        return out;
    }

    /// Drops every cached operator and factorization.
    void clear_cache() const {
        std::lock_guard lock(mutex_);
        toeplitz_.clear();
        circulant_.clear();
        cholesky_.clear();
    }

private:
    using Key = std::tuple<std::size_t, std::size_t, double>;

    template <LinearOperator Op>
    static double relative_residual(const Op& op, std::span<const double> w, std::span<const double> b) {
        std::vector<double> r(b.size());
        op.apply(w, r);
        double rn = 0.0, bn = 0.0;
        for (std::size_t i = 0; i < b.size(); ++i) {
            rn += (r[i] - b[i]) * (r[i] - b[i]);
            bn += b[i] * b[i];
        }
        return std::sqrt(rn / bn);
    }

    template <class T, class Make>
    std::shared_ptr<const T> cached(std::map<Key, std::shared_ptr<const T>>& cache, const Key& key, Make make) const {
        {
            std::lock_guard lock(mutex_);
            if (auto it = cache.find(key); it != cache.end()) return it->second;
        }
        auto built = std::make_shared<const T>(make());
        std::lock_guard lock(mutex_);
        return cache.emplace(key, std::move(built)).first->second;
    }

    std::shared_ptr<const ToeplitzOperator> toeplitz_for(std::size_t m, std::size_t n, double lambda) const {
        return cached(toeplitz_, {m, n, lambda}, [&] { return ToeplitzOperator(*stats_, m, n, lambda); });
    }

    std::shared_ptr<const CirculantFactorization> circulant_for(std::size_t m, std::size_t n, double lambda) const {
        return cached(circulant_, {m, n, lambda},
                      [&] { return CirculantFactorization(project_from_toeplitz(*stats_, m, n, lambda)); });
    }

    std::shared_ptr<const DenseCholesky> cholesky_for(std::size_t m, std::size_t n, double lambda) const {
        return cached(cholesky_, {m, n, lambda}, [&] {
            return DenseCholesky(ToeplitzOperator(*stats_, m, n, lambda).densify(kDenseGuard));
        });
    }

    std::shared_ptr<const StationaryStats> stats_;
    std::string fingerprint_;
    mutable std::mutex mutex_;
    mutable std::map<Key, std::shared_ptr<const ToeplitzOperator>> toeplitz_;
    mutable std::map<Key, std::shared_ptr<const CirculantFactorization>> circulant_;
    mutable std::map<Key, std::shared_ptr<const DenseCholesky>> cholesky_;
};

inline constexpr std::uint32_t kDetectorVersion = 1;

/// DTEC layout: magic, u32 version, u32 k, u32 m, u32 n, f64 threshold,
/// f64 w in template order, u32 metadata_length, UTF-8 "key=value" lines.
inline void write_detector(std::ostream& os, const DetectorTemplate& d) {
    os.write("DTEC", 4);
    detail::put<std::uint32_t>(os, kDetectorVersion);
    detail::put<std::uint32_t>(os, std::uint32_t(d.channels()));
    detail::put<std::uint32_t>(os, std::uint32_t(d.rows()));
    detail::put<std::uint32_t>(os, std::uint32_t(d.cols()));
    detail::put<double>(os, d.threshold);
    for (double w : d.weights.values()) detail::put(os, w);
    std::string meta;
    for (const auto& [key, value] : d.metadata) meta += key + "=" + value + "\n";
    detail::put<std::uint32_t>(os, std::uint32_t(meta.size()));
    os.write(meta.data(), std::streamsize(meta.size()));
    if (!os) throw FormatError("write_detector: write failed");
}

inline DetectorTemplate read_detector(std::istream& is) {
    constexpr const char* what = "read_detector";
    detail::expect_magic(is, "DTEC", what);
    const auto version = detail::get<std::uint32_t>(is, what);
    if (version != kDetectorVersion) throw FormatError("read_detector: unsupported version " + std::to_string(version));
    const auto k = detail::get<std::uint32_t>(is, what);
    const auto m = detail::get<std::uint32_t>(is, what);
    const auto n = detail::get<std::uint32_t>(is, what);
    if (k == 0 || m == 0 || n == 0) throw FormatError("read_detector: empty template");
    DetectorTemplate d;
    d.threshold = detail::get<double>(is, what);
    std::vector<double> w(std::size_t(k) * m * n);
    for (double& x : w) x = detail::get<double>(is, what);
    d.weights = Template(k, m, n, std::move(w));
    const auto len = detail::get<std::uint32_t>(is, what);
    std::string meta(len, '\0');
    if (!is.read(meta.data(), std::streamsize(len))) throw FormatError("read_detector: truncated metadata");
    std::istringstream lines(meta);
    for (std::string line; std::getline(lines, line);) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw FormatError("read_detector: malformed metadata line '" + line + "'");
        d.metadata[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return d;
}

inline void save_detector(const std::string& path, const DetectorTemplate& d) {
    auto os = detail::open_out(path);
    write_detector(os, d);
}

inline DetectorTemplate load_detector(const std::string& path) {
    auto is = detail::open_in(path);
    return read_detector(is);
}

}  // namespace slda
