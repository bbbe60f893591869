#include <gtest/gtest.h>

#include <random>

#include <slda/circulant.hpp>
#include <slda/synthetic.hpp>

#include "oracles.hpp"

using namespace slda;

namespace {

Template random_template(std::size_t k, std::size_t m, std::size_t n, oracle::Rng& rng) {
    std::normal_distribution<double> N;
    Template t(k, m, n);
    for (double& x : t.values()) x = N(rng);
    return t;
}

std::vector<double> h_of(const CirculantCovariance& c) { return {c.h_values().begin(), c.h_values().end()}; }

// Random h satisfying h_pq[d] = h_qp[-d].
CirculantCovariance random_circulant(std::size_t k, std::size_t m, std::size_t n, double lambda, oracle::Rng& rng) {
    std::uniform_real_distribution<double> U(-1, 1);
    CirculantCovariance raw(k, m, n), c(k, m, n, lambda);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q)
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < n; ++b) raw.h(p, q, a, b) = U(rng);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q)
            for (std::size_t a = 0; a < m; ++a)
                for (std::size_t b = 0; b < n; ++b)
                    c.h(p, q, a, b) = 0.5 * (raw.h(p, q, a, b) + raw.h(q, p, (m - a) % m, (n - b) % n));
    return c;
}

// Random positive definite circulant: the shift covariance of random windows.
CirculantCovariance random_pd_circulant(std::size_t k, std::size_t m, std::size_t n, double lambda, oracle::Rng& rng) {
    std::vector<FeatureImage> windows;
    for (int i = 0; i < 3; ++i) windows.push_back(oracle::random_image(k, m, n, rng, -1, 1));
    return accumulate_from_windows(windows, lambda);
}

}  // namespace

TEST(Projection, ZeroDisplacementIsUnchanged) {
    oracle::Rng rng(1);
    const auto s = oracle::random_stats(2, 3, 3, rng);
    const auto c = project_from_toeplitz(s, 4, 4);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q) EXPECT_EQ(c.h(p, q, 0, 0), s.g(p, q, 0, 0));
}

TEST(Projection, OneDimensionalHandExample) {
    StationaryStats s(1, 2, 0);
    s.g(0, 0, 0, 0) = 2.0;
    s.g(0, 0, 1, 0) = s.g(0, 0, -1, 0) = 1.0;
    s.g(0, 0, 2, 0) = s.g(0, 0, -2, 0) = 0.5;
    const auto c = project_from_toeplitz(s, 3, 1);
    EXPECT_NEAR(c.h(0, 0, 1, 0), 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(c.h(0, 0, 2, 0), 5.0 / 6.0, 1e-15);
    EXPECT_NEAR(c.h(0, 0, 0, 0), 2.0, 1e-15);
}

TEST(Projection, CirculantIsAFixedPoint) {
    oracle::Rng rng(2);
    const std::size_t k = 2, m = 4, n = 3;
    const auto circ = random_circulant(k, m, n, 0.0, rng);
    // The Toeplitz description of a circulant matrix: g[d] = h[d mod m].
    StationaryStats s(k, m - 1, n - 1);
    for (std::size_t p = 0; p < k; ++p)
        for (std::size_t q = 0; q < k; ++q)
            for (long a = -long(m - 1); a < long(m); ++a)
                for (long b = -long(n - 1); b < long(n); ++b)
                    s.g(p, q, a, b) = circ.h(p, q, std::size_t((a + long(m)) % long(m)), std::size_t((b + long(n)) % long(n)));
    const auto back = project_from_toeplitz(s, m, n);
    for (std::size_t i = 0; i < back.h_values().size(); ++i) EXPECT_NEAR(back.h_values()[i], circ.h_values()[i], 1e-15);
}

TEST(Projection, EqualsDiagonalAveraging) {
    oracle::Rng rng(3);
    std::uniform_int_distribution<std::size_t> K(1, 2), S(1, 5);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t k = K(rng), m = S(rng), n = S(rng);
        const auto s = oracle::random_stats(k, m - 1, n - 1, rng);
        const auto c = project_from_toeplitz(s, m, n);
        const auto avg = oracle::diagonal_average(oracle::dense_toeplitz(s, m, n, 0.0), k, m, n);
        for (std::size_t i = 0; i < avg.size(); ++i) ASSERT_NEAR(c.h_values()[i], avg[i], 1e-12);
        EXPECT_LE(c.hermitian_defect(), 1e-12);
    }
}

TEST(Mccf, SingleWindowHandExample) {
    FeatureImage w(1, 2, 1);
    w.at(0, 0, 0) = 1.0;
    const auto c = accumulate_from_windows(std::vector{w});
    const Eigen::MatrixXd M = c.densify();
    EXPECT_NEAR(M(0, 0), 0.5, 1e-15);
    EXPECT_NEAR(M(1, 1), 0.5, 1e-15);
    EXPECT_NEAR(M(0, 1), 0.0, 1e-15);
    EXPECT_TRUE(oracle::shift_covariance({w}).isApprox(M, 1e-14));
}

TEST(Mccf, ConstantWindowHasOnlyDcEnergy) {
    FeatureImage w(2, 3, 4);
    for (std::size_t i = 0; i < w.plane_size(); ++i) {
        w.plane(0)[i] = 2.0;
        w.plane(1)[i] = -1.0;
    }
    const auto blocks = accumulate_window_spectra(std::vector{w});
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < blocks.half_cols(); ++v) {
            const double e = blocks.block(u, v).norm();
            if (u == 0 && v == 0)
                EXPECT_GT(e, 1.0);
            else
                EXPECT_LT(e, 1e-12);
        }
}

TEST(Mccf, DoublingWindowsDoublesBlocks) {
    oracle::Rng rng(4);
    std::vector<FeatureImage> ws{oracle::random_image(2, 3, 3, rng), oracle::random_image(2, 3, 3, rng)};
    const auto once = accumulate_window_spectra(ws);
    auto twice_list = ws;
    twice_list.insert(twice_list.end(), ws.begin(), ws.end());
    const auto twice = accumulate_window_spectra(twice_list);
    for (std::size_t u = 0; u < 3; ++u)
        for (std::size_t v = 0; v < once.half_cols(); ++v)
            EXPECT_TRUE(twice.block(u, v).isApprox(2.0 * once.block(u, v), 1e-14));
    // The normalized covariance is unchanged.
    const auto a = once.to_covariance(), b = twice.to_covariance();
    for (std::size_t i = 0; i < a.h_values().size(); ++i) EXPECT_NEAR(a.h_values()[i], b.h_values()[i], 1e-14);
}

TEST(Mccf, MatchesBruteForceShifts) {
    oracle::Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + trial % 3, m = 1 + trial % 4, n = 1 + (trial / 4) % 4;
        std::vector<FeatureImage> ws;
        for (int i = 0; i < 1 + trial % 3; ++i) ws.push_back(oracle::random_image(k, m, n, rng, -1, 1));
        const Eigen::MatrixXd fourier = accumulate_from_windows(ws).densify();
        EXPECT_LE((fourier - oracle::shift_covariance(ws)).cwiseAbs().maxCoeff(), 1e-10);
    }
    EXPECT_THROW(accumulate_from_windows(std::vector<FeatureImage>{}), ShapeError);
    EXPECT_THROW(accumulate_from_windows(std::vector{FeatureImage(1, 2, 2), FeatureImage(1, 2, 3)}), ShapeError);
}

TEST(Factorize, DeltaGivesIdentityBlocks) {
    CirculantCovariance c(3, 4, 5);
    for (std::size_t p = 0; p < 3; ++p) c.h(p, p, 0, 0) = 1.0;
    const auto f = factorize(c);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t v = 0; v < 5; ++v) EXPECT_TRUE(f.block(u, v).isApprox(Eigen::MatrixXcd::Identity(3, 3), 1e-14));
}

TEST(Factorize, ScalarBlocksAreConjugatedSpectrum) {
    CirculantCovariance c(1, 2, 1, 0.5);
    c.h(0, 0, 0, 0) = 2.0;
    c.h(0, 0, 1, 0) = 1.0;
    const auto f = factorize(c);
    EXPECT_NEAR(f.block(0, 0)(0, 0).real(), 3.5, 1e-14);
    EXPECT_NEAR(f.block(1, 0)(0, 0).real(), 1.5, 1e-14);
}

TEST(Factorize, BlocksMatchDftConjugatedDenseMatrix) {
    oracle::Rng rng(6);
    for (int trial = 0; trial < 15; ++trial) {
        const std::size_t k = 1 + trial % 3, m = 1 + trial % 6, n = 1 + (trial * 7) % 6;
        const auto c = random_pd_circulant(k, m, n, 0.1, rng);
        const auto f = factorize(c);
        const Eigen::MatrixXcd F = oracle::dft_matrix(k, m, n);
        const Eigen::MatrixXcd B = F * c.densify().cast<std::complex<double>>() * F.inverse();
        for (std::size_t u = 0; u < m; ++u)
            for (std::size_t v = 0; v < n; ++v)
                for (std::size_t u2 = 0; u2 < m; ++u2)
                    for (std::size_t v2 = 0; v2 < n; ++v2) {
                        const Eigen::MatrixXcd blk =
                            B.block(oracle::idx(k, m, 0, u, v), oracle::idx(k, m, 0, u2, v2), k, k);
                        if (u == u2 && v == v2) {
                            EXPECT_LE((blk - f.block(u, v)).norm(), 1e-9 * std::max(1.0, blk.norm()));
                            EXPECT_LE((blk - blk.adjoint()).norm(), 1e-10 * std::max(1.0, blk.norm()));
                        } else {
                            EXPECT_LE(blk.norm(), 1e-9 * std::max(1.0, B.norm()));
                        }
                    }
    }
}

TEST(Factorize, IndefiniteBlockIsReported) {
    CirculantCovariance c(1, 3, 2);
    c.h(0, 0, 0, 0) = -1.0;
    try {
        factorize(c);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("Fourier bin (0, 0)"), std::string::npos) << e.what();
    }
    oracle::Rng rng(2);
    CirculantCovariance asym(1, 3, 1);
    asym.h(0, 0, 1, 0) = 1.0;
    EXPECT_THROW(factorize(asym), NumericalError);
}

TEST(CirculantSolve, IdentityAndHandExample) {
    oracle::Rng rng(8);
    CirculantCovariance id(2, 3, 4);
    for (std::size_t p = 0; p < 2; ++p) id.h(p, p, 0, 0) = 1.0;
    const auto b = random_template(2, 3, 4, rng);
    const auto w = factorize(id).solve(b);
    for (std::size_t i = 0; i < b.size(); ++i) EXPECT_NEAR(w.values()[i], b.values()[i], 1e-14);

    CirculantCovariance c(1, 2, 1);
    c.h(0, 0, 0, 0) = 2.0;
    c.h(0, 0, 1, 0) = 1.0;
    const auto x = factorize(c).solve(Template(1, 2, 1, {1.0, 0.0}));
    EXPECT_NEAR(x.values()[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(x.values()[1], -1.0 / 3.0, 1e-15);
}

TEST(CirculantSolve, RoundTrip) {
    oracle::Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + trial % 3, m = 1 + trial % 6, n = 2 + trial % 5;
        const auto c = random_pd_circulant(k, m, n, 0.05, rng);
        const auto b = random_template(k, m, n, rng);
        const auto w = factorize(c).solve(b);
        EXPECT_LE(oracle::rel(oracle::vec(c.matvec(w).values()), oracle::vec(b.values())), 1e-10);
    }
}

TEST(CirculantMatvec, MatchesDenseAndIsShiftEquivariant) {
    oracle::Rng rng(10);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = 1 + trial % 3, m = 1 + trial % 6, n = 1 + (trial * 5) % 6;
        const auto c = random_circulant(k, m, n, 0.2, rng);
        const auto x = random_template(k, m, n, rng);
        const Eigen::VectorXd dense = oracle::dense_circulant(h_of(c), k, m, n, 0.2) * oracle::vec(x.values());
        EXPECT_LE(oracle::rel(oracle::vec(c.matvec(x).values()), dense), 1e-10);

        const std::size_t a = trial % m, b = (trial / 2) % n;
        auto shift = [&](const Template& t) {
            Template s(k, m, n);
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t u = 0; u < m; ++u)
                    for (std::size_t v = 0; v < n; ++v) s.at(p, (u + a) % m, (v + b) % n) = t.at(p, u, v);
            return s;
        };
        const auto lhs = c.matvec(shift(x)), rhs = shift(c.matvec(x));
        for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs.values()[i], rhs.values()[i], 1e-12);
    }
    CirculantCovariance id(1, 3, 3);
    id.h(0, 0, 0, 0) = 1.0;
    const auto x = random_template(1, 3, 3, rng);
    const auto z = id.matvec(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(z.values()[i], x.values()[i], 1e-15);
    EXPECT_THROW(id.matvec(Template(2, 3, 3)), ShapeError);
}
