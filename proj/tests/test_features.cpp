#include <gtest/gtest.h>

#include <sstream>

#include <slda/features.hpp>
#include <slda/synthetic.hpp>

using namespace slda;

namespace {

Raster ramp(std::size_t h, std::size_t w) {
    Raster r(h, w);
    for (std::size_t u = 0; u < h; ++u)
        for (std::size_t v = 0; v < w; ++v) r.at(u, v) = double((7 * u + 13 * v) % 256);
    return r;
}

// Quarter turn: r'(u, v) = r(v, H - 1 - u).
Raster rotate(const Raster& r) {
    Raster out(r.width, r.height);
    for (std::size_t u = 0; u < out.height; ++u)
        for (std::size_t v = 0; v < out.width; ++v) out.at(u, v) = r.at(v, r.height - 1 - u);
    return out;
}

}  // namespace

TEST(Identity, ScalesToUnitRange) {
    Raster r(1, 3);
    r.pixels = {0, 51, 255};
    const auto f = identity_transform(r);
    ASSERT_EQ(f.channels(), 1u);
    EXPECT_EQ(f.at(0, 0, 0), 0.0);
    EXPECT_DOUBLE_EQ(f.at(0, 0, 1), 0.2);
    EXPECT_EQ(f.at(0, 0, 2), 1.0);
}

TEST(Identity, DeterministicAndShapePreserving) {
    const auto r = ramp(9, 11);
    const auto a = identity_transform(r), b = identity_transform(r);
    EXPECT_EQ(a.height(), 9u);
    EXPECT_EQ(a.width(), 11u);
    EXPECT_TRUE(std::equal(a.values().begin(), a.values().end(), b.values().begin()));
}

TEST(Pgm, RoundTripAndHeaderParsing) {
    const auto r = ramp(5, 7);
    std::stringstream ss;
    write_pgm(ss, r);
    const auto back = read_pgm(ss);
    EXPECT_EQ(back.height, 5u);
    EXPECT_EQ(back.width, 7u);
    EXPECT_EQ(back.pixels, r.pixels);

    std::istringstream commented(std::string("P5\n# comment\n2 1\n255\n") + char(10) + char(200));
    const auto c = read_pgm(commented);
    EXPECT_EQ(c.pixels, (std::vector<double>{10, 200}));

    std::istringstream ascii("P2\n1 1\n255\n0\n");
    EXPECT_THROW(read_pgm(ascii), FormatError);
    std::istringstream deep("P5\n1 1\n65535\nxx");
    EXPECT_THROW(read_pgm(deep), FormatError);
    std::istringstream truncated("P5\n4 4\n255\nabc");
    EXPECT_THROW(read_pgm(truncated), FormatError);
    EXPECT_THROW(load_pgm("/nonexistent/file.pgm"), Error);
}

TEST(Hoglite, ShapeAndConstantInput) {
    const auto f = hoglite_transform(Raster(13, 17, 90.0), 4, 8);
    EXPECT_EQ(f.channels(), 8u);
    EXPECT_EQ(f.height(), 3u);
    EXPECT_EQ(f.width(), 4u);
    for (double x : f.values()) EXPECT_EQ(x, 0.0);
}

TEST(Hoglite, VerticalEdgeVotesForBinZero) {
    Raster r(8, 8, 0.0);
    for (std::size_t u = 0; u < 8; ++u)
        for (std::size_t v = 4; v < 8; ++v) r.at(u, v) = 255.0;
    const auto f = hoglite_transform(r, 4, 8);
    for (std::size_t a = 0; a < 2; ++a) {
        EXPECT_NEAR(f.at(0, a, 0), 1.0, 1e-9);
        EXPECT_NEAR(f.at(0, a, 1), 1.0, 1e-9);
        for (std::size_t p = 1; p < 8; ++p) EXPECT_EQ(f.at(p, a, 0), 0.0);
    }
}

TEST(Hoglite, QuarterTurnShiftsBins) {
    synthetic::Rng rng(3);
    const auto r = synthetic::texture(24, 24, rng);
    const std::size_t cell = 4, bins = 8, cells = 6;
    const auto f = hoglite_transform(r, cell, bins), g = hoglite_transform(rotate(r), cell, bins);
    // Interior cells avoid clamped border gradients.
    for (std::size_t a = 1; a + 1 < cells; ++a)
        for (std::size_t b = 1; b + 1 < cells; ++b)
            for (std::size_t p = 0; p < bins; ++p)
                EXPECT_NEAR(g.at((p + bins / 2) % bins, a, b), f.at(p, b, cells - 1 - a), 1e-9);
}

TEST(Hoglite, CellEnergyIsBounded) {
    synthetic::Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        const auto f = hoglite_transform(synthetic::texture(20, 28, rng), 4, 6);
        ASSERT_TRUE(f.all_finite());
        for (std::size_t a = 0; a < f.height(); ++a)
            for (std::size_t b = 0; b < f.width(); ++b) {
                double e = 0;
                for (std::size_t p = 0; p < f.channels(); ++p) {
                    EXPECT_GE(f.at(p, a, b), 0.0);
                    e += f.at(p, a, b) * f.at(p, a, b);
                }
                EXPECT_LE(e, 1.0 + 1e-9);
            }
    }
}

TEST(Hoglite, Errors) {
    EXPECT_THROW(hoglite_transform(Raster(3, 8), 4, 8), ShapeError);
    EXPECT_THROW(hoglite_transform(Raster(8, 8), 0, 8), ShapeError);
    EXPECT_THROW(hoglite_transform(Raster(8, 8), 4, 0), ShapeError);
    EXPECT_THROW(make_transform("sift"), Error);
    const auto t = make_transform("hoglite", 5, 9);
    EXPECT_EQ(t.channels, 9u);
    EXPECT_EQ(t.apply(Raster(10, 10, 1.0)).height(), 2u);
}
