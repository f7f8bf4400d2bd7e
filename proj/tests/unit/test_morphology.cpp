#include "lens/imagecore.hpp"

#include "../support/oracles.hpp"
#include "../support/testkit.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lens;

TEST(Dilate, RadiusZeroIsIdentity) {
    std::mt19937_64 rng(1);
    const BinaryMask m = testkit::random_mask(10, 10, 0.3, rng);
    EXPECT_EQ(dilate(m, 0), m);
    EXPECT_EQ(erode(m, 0), m);
}

TEST(Dilate, SquareStructuringElement) {
    BinaryMask m(7, 7);
    m.set(3, 3);
    EXPECT_EQ(dilate(m, 1).count(), 9u);
    EXPECT_EQ(dilate(m, 2).count(), 25u);
    EXPECT_TRUE(dilate(m, 2).get(1, 5));
    EXPECT_EQ(dilate(m, 5).count(), 49u);
}

TEST(Erode, OffCanvasCountsAsUnset) {
    BinaryMask full(5, 5);
    for (int y = 0; y < 5; ++y) {
        for (int x = 0; x < 5; ++x) full.set(x, y);
    }
    const BinaryMask e = erode(full, 1);
    EXPECT_EQ(e.count(), 9u);
    EXPECT_FALSE(e.get(0, 2));
    EXPECT_TRUE(erode(full, 2).get(2, 2));
    EXPECT_FALSE(erode(full, 3).any());
}

TEST(Morphology, MatchesBruteForceOnRandomMasks) {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 120; ++i) {
        const int r = i % 4;
        const BinaryMask m = testkit::random_mask(13 + i % 5, 11, 0.5, rng);
        EXPECT_EQ(dilate(m, r), oracle::dilate(m, r));
        EXPECT_EQ(erode(m, r), oracle::erode(m, r));
    }
}

TEST(Morphology, OpeningAndClosingAreOrdered) {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 60; ++i) {
        const int r = 1 + i % 2;
        const BinaryMask m = testkit::random_mask(16, 16, 0.5, rng);
        const BinaryMask opened = dilate(erode(m, r), r);
        EXPECT_TRUE(opened.subset_of(m));
        // Opening is idempotent.
        EXPECT_EQ(dilate(erode(opened, r), r), opened);
    }
}

TEST(Morphology, DilationComposesRadii) {
    std::mt19937_64 rng(4);
    const BinaryMask m = testkit::random_mask(20, 20, 0.05, rng);
    EXPECT_EQ(dilate(dilate(m, 1), 2), dilate(m, 3));
}
