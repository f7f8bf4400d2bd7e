#include "lens/error.hpp"
#include "lens/imagecore.hpp"

#include "../support/oracles.hpp"
#include "../support/testkit.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lens;

namespace {

Polygon rect(double x0, double y0, double x1, double y1) {
    return Polygon({{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
}

} // namespace

TEST(BBox, RejectsInvertedCorners) {
    EXPECT_THROW(BBox(2, 0, 1, 1), Error);
    EXPECT_THROW(BBox(0, 2, 1, 1), Error);
    EXPECT_DOUBLE_EQ(BBox(1, 2, 4, 6).area(), 12.0);
}

TEST(Polygon, DropsDuplicatesAndClosingVertex) {
    const Polygon p({{0, 0}, {0, 0}, {4, 0}, {4, 3}, {0, 3}, {0, 0}});
    EXPECT_EQ(p.size(), 4u);
    EXPECT_DOUBLE_EQ(p.signed_area(), 12.0);
}

TEST(Polygon, CanonicalWindingKeepsFirstVertex) {
    const Polygon cw({{0, 0}, {0, 3}, {4, 3}, {4, 0}});
    EXPECT_GT(cw.signed_area(), 0.0);
    EXPECT_EQ(cw.vertices().front(), (Point{0, 0}));
    EXPECT_EQ(cw, rect(0, 0, 4, 3));
}

TEST(Polygon, RejectsDegenerateRings) {
    EXPECT_THROW(Polygon({{0, 0}, {1, 1}}), Error);
    EXPECT_THROW(Polygon({{0, 0}, {0, 0}, {1, 1}, {1, 1}}), Error);
    try {
        Polygon({{0, 0}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_geometry);
    }
}

TEST(Rasterize, PixelCentersOfRectangle) {
    const BinaryMask m = rasterize_polygon(rect(1, 1, 4, 3), 6, 5);
    EXPECT_EQ(m.count(), 6u);
    EXPECT_TRUE(m.get(1, 1));
    EXPECT_TRUE(m.get(3, 2));
    EXPECT_FALSE(m.get(4, 2));
    EXPECT_FALSE(m.get(0, 0));
}

TEST(Rasterize, MatchesCrossingNumberOracleOnRandomStars) {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 40; ++i) {
        const auto star = testkit::random_star(32, 30, 5, 28, 7 + i % 9, rng);
        const Polygon p(star);
        EXPECT_EQ(rasterize_polygon(p, 64, 60), oracle::rasterize(p.vertices(), 64, 60)) << "star " << i;
    }
}

TEST(Rasterize, SelfIntersectingUsesEvenOdd) {
    // Bow-tie: the two lobes are inside, the crossing point region is not doubled.
    const Polygon bow({{0, 0}, {10, 10}, {10, 0}, {0, 10}});
    const BinaryMask m = rasterize_polygon(bow, 10, 10);
    EXPECT_EQ(m, oracle::rasterize(bow.vertices(), 10, 10));
    EXPECT_TRUE(contains(bow, {9.5, 5}));
    EXPECT_FALSE(contains(bow, {5, 1}));
}

TEST(Rasterize, ClipsToCanvas) {
    const BinaryMask m = rasterize_polygon(rect(-5, -5, 3, 2), 4, 4);
    EXPECT_EQ(m.count(), 6u);
}

TEST(BinaryMask, SetAlgebra) {
    std::mt19937_64 rng(3);
    const BinaryMask a = testkit::random_mask(9, 7, 0.4, rng);
    const BinaryMask b = testkit::random_mask(9, 7, 0.4, rng);
    EXPECT_TRUE((a & b).subset_of(a));
    EXPECT_TRUE(a.subset_of(a | b));
    EXPECT_EQ(a.complement().complement(), a);
    EXPECT_EQ((a | b).complement(), a.complement() & b.complement());
    EXPECT_EQ(a.count() + a.complement().count(), 63u);
}

TEST(BinaryMask, PixelBounds) {
    BinaryMask m(10, 10);
    EXPECT_EQ(m.pixel_bounds(), BBox());
    m.set(2, 3);
    m.set(6, 4);
    EXPECT_EQ(m.pixel_bounds(), BBox(2, 3, 7, 5));
    EXPECT_FALSE(m.get(-1, 0));
    EXPECT_FALSE(m.get(10, 0));
}

TEST(Components, OrderedBySizeThenRasterOrder) {
    BinaryMask m(8, 4);
    m.set(6, 0);
    m.set(0, 2);
    m.set(1, 2);
    m.set(4, 3);
    const auto comps = connected_components(m, Connectivity::four);
    ASSERT_EQ(comps.size(), 3u);
    EXPECT_EQ(comps[0].count(), 2u);
    EXPECT_TRUE(comps[1].get(6, 0));
    EXPECT_TRUE(comps[2].get(4, 3));
}

TEST(Components, DiagonalNeighboursJoinOnlyUnderEight) {
    BinaryMask m(3, 3);
    m.set(0, 0);
    m.set(1, 1);
    EXPECT_EQ(connected_components(m, Connectivity::four).size(), 2u);
    EXPECT_EQ(connected_components(m, Connectivity::eight).size(), 1u);
}

TEST(Components, SizesMatchUnionFind) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const BinaryMask m = testkit::random_mask(24, 20, 0.45, rng);
        for (auto conn : {Connectivity::four, Connectivity::eight}) {
            const auto comps = connected_components(m, conn);
            std::vector<std::size_t> sizes;
            BinaryMask u(24, 20);
            for (const auto& c : comps) {
                sizes.push_back(c.count());
                EXPECT_FALSE((u & c).any());
                u = u | c;
            }
            EXPECT_EQ(u, m);
            EXPECT_EQ(sizes, oracle::component_sizes(m, static_cast<int>(conn)));
        }
    }
}

TEST(FillHoles, MatchesBorderFloodOracle) {
    std::mt19937_64 rng(7);
    for (int i = 0; i < 100; ++i) {
        const BinaryMask m = testkit::random_mask(20, 17, 0.55, rng);
        EXPECT_EQ(fill_holes(m), oracle::fill_holes(m));
    }
}

TEST(FillHoles, RingBecomesDisc) {
    BinaryMask ring = rasterize_polygon(rect(2, 2, 8, 8), 10, 10);
    ring = ring & rasterize_polygon(rect(4, 4, 6, 6), 10, 10).complement();
    EXPECT_EQ(ring.count(), 32u);
    EXPECT_EQ(fill_holes(ring).count(), 36u);
}

TEST(Contour, RectangleGivesFourCorners) {
    const BinaryMask m = rasterize_polygon(rect(2, 3, 7, 5), 10, 10);
    const Polygon p = trace_contour(m);
    ASSERT_EQ(p.size(), 4u);
    EXPECT_EQ(p.vertices().front(), (Point{2, 3}));
    EXPECT_DOUBLE_EQ(p.signed_area(), 10.0);
}

TEST(Contour, IgnoresHolesAndRoundTrips) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 60; ++i) {
        const BinaryMask blob = testkit::random_blob(40, 40, 30 + i * 7, rng);
        const Polygon p = trace_contour(blob);
        EXPECT_EQ(rasterize_polygon(p, 40, 40), oracle::fill_holes(blob)) << "blob " << i;
        EXPECT_DOUBLE_EQ(p.signed_area(), static_cast<double>(oracle::fill_holes(blob).count()));
    }
}

TEST(Contour, SinglePixelAndDiagonalPair) {
    BinaryMask m(4, 4);
    m.set(1, 1);
    EXPECT_EQ(trace_contour(m).size(), 4u);
    m.set(2, 2);
    const Polygon p = trace_contour(m);
    EXPECT_DOUBLE_EQ(p.signed_area(), 2.0);
}

TEST(Contour, RejectsEmptyAndMultiComponentMasks) {
    BinaryMask m(5, 5);
    try {
        trace_contour(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::invalid_geometry);
    }
    m.set(0, 0);
    m.set(3, 3);
    try {
        trace_contour(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ambiguous_input);
    }
}

TEST(Flip, PixelMapping) {
    RasterImage im(3, 2, 3);
    im.pixel(0, 0)[0] = 9;
    EXPECT_EQ(flip(im, false, true).pixel(2, 0)[0], 9);
    EXPECT_EQ(flip(im, true, false).pixel(0, 1)[0], 9);
    EXPECT_EQ(flip(im, true, true).pixel(2, 1)[0], 9);
    BinaryMask m(3, 2);
    m.set(0, 0);
    EXPECT_TRUE(flip(m, true, true).get(2, 1));
}

TEST(Transpose, SwapsAxes) {
    std::mt19937_64 rng(1);
    const RasterImage im = testkit::random_image(5, 3, 4, rng);
    const RasterImage t = transpose(im);
    ASSERT_EQ(t.width(), 3);
    ASSERT_EQ(t.height(), 5);
    EXPECT_EQ(t.pixel(2, 4)[3], im.pixel(4, 2)[3]);
    EXPECT_EQ(transpose(t), im);
}

TEST(Crop, AlphaFollowsMask) {
    std::mt19937_64 rng(2);
    const RasterImage page = testkit::random_image(20, 10, 3, rng);
    BinaryMask m(20, 10);
    m.set(5, 4);
    m.set(6, 5);
    const RasterImage card = crop_with_alpha(page, m, 1);
    ASSERT_EQ(card.width(), 4);
    ASSERT_EQ(card.height(), 4);
    ASSERT_TRUE(card.has_alpha());
    EXPECT_EQ(card.pixel(1, 1)[3], 255);
    EXPECT_EQ(card.pixel(2, 1)[3], 0);
    EXPECT_EQ(card.pixel(1, 1)[0], page.pixel(5, 4)[0]);
    // Padding is clipped at the page edge.
    BinaryMask corner(20, 10);
    corner.set(0, 0);
    EXPECT_EQ(crop_with_alpha(page, corner, 3).width(), 4);
    EXPECT_THROW(crop_with_alpha(page, BinaryMask(20, 10), 0), Error);
    EXPECT_THROW(crop_with_alpha(page, BinaryMask(5, 5), 0), Error);
}

TEST(RasterImage, RejectsBadChannelsAndSizes) {
    EXPECT_THROW(RasterImage(2, 2, 2), Error);
    EXPECT_THROW(RasterImage(0, 2, 3), Error);
    EXPECT_THROW(RasterImage(2, 2, 3, std::vector<std::uint8_t>(5)), Error);
}
