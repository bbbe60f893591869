#include <gtest/gtest.h>

#include <random>

#include <slda/stats.hpp>
#include <slda/synthetic.hpp>
#include <slda/toeplitz.hpp>

#include "oracles.hpp"

using namespace slda;

namespace {

StationaryStats delta_stats(std::size_t k, std::size_t du, std::size_t dv) {
    StationaryStats s(k, du, dv);
    for (std::size_t p = 0; p < k; ++p) s.g(p, p, 0, 0) = 1.0;
    return s;
}

Template random_template(std::size_t k, std::size_t m, std::size_t n, oracle::Rng& rng) {
    std::normal_distribution<double> N;
    Template t(k, m, n);
    for (double& x : t.values()) x = N(rng);
    return t;
}

}  // namespace

TEST(Toeplitz, DefaultLambda) { EXPECT_EQ(kDefaultLambda, 1e-4); }

TEST(Toeplitz, DeltaStatsGiveIdentity) {
    oracle::Rng rng(1);
    const ToeplitzOperator op(delta_stats(3, 4, 4), 4, 5, 0.0);
    const auto x = random_template(3, 4, 5, rng);
    const auto z = op.matvec(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(z.values()[i], x.values()[i], 1e-12);

    const auto M = ToeplitzOperator(delta_stats(2, 2, 2), 2, 3, 0.25).densify();
    EXPECT_TRUE(M.isApprox(1.25 * Eigen::MatrixXd::Identity(12, 12), 0.0));
}

TEST(Toeplitz, SinglePixelTemplateIsChannelMatrix) {
    oracle::Rng rng(2);
    const auto s = oracle::random_stats(3, 2, 2, rng);
    const ToeplitzOperator op(s, 1, 1, 0.5);
    const auto M = op.densify();
    for (std::size_t p = 0; p < 3; ++p)
        for (std::size_t q = 0; q < 3; ++q) EXPECT_EQ(M(p, q), s.g(p, q, 0, 0) + (p == q ? 0.5 : 0.0));
    Template x(3, 1, 1, {1.0, -2.0, 0.5});
    const auto z = op.matvec(x);
    const Eigen::VectorXd expect = M * oracle::vec(x.values());
    for (std::size_t p = 0; p < 3; ++p) EXPECT_NEAR(z.values()[p], expect(p), 1e-12);
}

TEST(Toeplitz, MatvecHandExample) {
    StationaryStats s(1, 0, 1);
    s.g(0, 0, 0, 0) = 2.0;
    s.g(0, 0, 0, 1) = s.g(0, 0, 0, -1) = 1.0;
    const ToeplitzOperator op(s, 1, 2, 0.0);
    const auto z = op.matvec(Template(1, 1, 2, {1.0, 0.0}));
    EXPECT_NEAR(z.values()[0], 2.0, 1e-14);
    EXPECT_NEAR(z.values()[1], 1.0, 1e-14);
}

TEST(Toeplitz, DensifyHandExample) {
    StationaryStats s(1, 0, 2);
    s.g(0, 0, 0, 0) = 2.0;
    s.g(0, 0, 0, 1) = s.g(0, 0, 0, -1) = 1.0;
    s.g(0, 0, 0, 2) = s.g(0, 0, 0, -2) = 0.5;
    Eigen::Matrix3d expect;
    expect << 2, 1, .5, 1, 2, 1, .5, 1, 2;
    EXPECT_TRUE(ToeplitzOperator(s, 1, 3, 0.0).densify().isApprox(Eigen::MatrixXd(expect), 0.0));
}

TEST(Toeplitz, MatchesDenseOracleOnRandomInstances) {
    oracle::Rng rng(7);
    std::uniform_int_distribution<std::size_t> K(1, 3), S(1, 6);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t k = K(rng), m = S(rng), n = S(rng);
        const auto s = oracle::random_stats(k, m - 1 + trial % 2, n - 1, rng);
        const double lambda = trial % 3 == 0 ? 0.0 : 0.1;
        const ToeplitzOperator op(s, m, n, lambda);
        const auto x = random_template(k, m, n, rng);
        const Eigen::VectorXd dense = oracle::dense_toeplitz(s, m, n, lambda) * oracle::vec(x.values());
        EXPECT_LE(oracle::rel(oracle::vec(op.matvec(x).values()), dense), 1e-10);
        const auto M = op.densify();
        EXPECT_TRUE(M == M.transpose());
        EXPECT_LE((M - oracle::dense_toeplitz(s, m, n, lambda)).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(Toeplitz, LinearAndSymmetric) {
    oracle::Rng rng(13);
    const auto s = oracle::random_stats(2, 4, 5, rng);
    const ToeplitzOperator op(s, 5, 6, 0.01);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_template(2, 5, 6, rng), y = random_template(2, 5, 6, rng);
        const double a = 1.7, b = -0.3;
        Template comb(2, 5, 6);
        for (std::size_t i = 0; i < comb.size(); ++i) comb.values()[i] = a * x.values()[i] + b * y.values()[i];
        const Eigen::VectorXd lhs = oracle::vec(op.matvec(comb).values());
        const Eigen::VectorXd rhs = a * oracle::vec(op.matvec(x).values()) + b * oracle::vec(op.matvec(y).values());
        EXPECT_LE(oracle::rel(lhs, rhs), 1e-12);
        const double xy = oracle::vec(op.matvec(x).values()).dot(oracle::vec(y.values()));
        const double yx = oracle::vec(x.values()).dot(oracle::vec(op.matvec(y).values()));
        EXPECT_LE(std::abs(xy - yx), 1e-10 * std::max(std::abs(xy), 1.0));
    }
}

TEST(Toeplitz, PositiveDefiniteOnImageStatistics) {
    synthetic::Rng rng(3);
    StationaryAccumulator acc(2, 5, 5);
    for (int i = 0; i < 6; ++i) accumulate_image_fft(acc, synthetic::feature_texture(2, 40, 40, rng));
    const double lambda = 1e-4;
    const ToeplitzOperator op(finalize(acc), 6, 6, lambda);
    oracle::Rng r2(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto x = random_template(2, 6, 6, r2);
        const double q = oracle::vec(op.matvec(x).values()).dot(oracle::vec(x.values()));
        EXPECT_GE(q, lambda * oracle::vec(x.values()).squaredNorm() - 1e-10);
    }
}

TEST(Toeplitz, Errors) {
    oracle::Rng rng(5);
    const auto s = oracle::random_stats(2, 2, 2, rng);
    EXPECT_THROW(ToeplitzOperator(s, 4, 2), ExtentError);
    EXPECT_THROW(ToeplitzOperator(s, 2, 2, -1.0), NumericalError);
    const ToeplitzOperator op(s, 3, 3);
    EXPECT_THROW(op.matvec(Template(2, 3, 2)), ShapeError);
    EXPECT_THROW(op.densify(10), ShapeError);
}
