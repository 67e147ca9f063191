#include <gtest/gtest.h>

#include <random>

#include <png.h>

#include "ddqa/mask_geometry.hpp"

namespace ddqa {
namespace {

using Pixels = std::vector<std::pair<std::uint32_t, std::uint32_t>>;

BinaryMask mask_of(std::uint32_t w, std::uint32_t h, const Pixels& px) { return BinaryMask::from_pixels(w, h, px); }

BinaryMask filled_rect(std::uint32_t w, std::uint32_t h, std::uint32_t x0, std::uint32_t y0, std::uint32_t x1,
                       std::uint32_t y1) {
    BinaryMask m(w, h);
    for (std::uint32_t y = y0; y <= y1; ++y)
        for (std::uint32_t x = x0; x <= x1; ++x) m.set(x, y);
    return m;
}

BinaryMask random_mask(std::mt19937_64& gen, std::uint32_t w, std::uint32_t h, double density) {
    std::bernoulli_distribution on(density);
    BinaryMask m(w, h);
    for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x)
            if (on(gen)) m.set(x, y);
    return m;
}

// Independent dominant-cell oracle: explicit boundary arithmetic per pixel.
int oracle_region(const BinaryMask& m) {
    std::array<long, 9> counts{};
    for (auto [x, y] : m.pixels()) {
        int col = 0, row = 0;
        for (int c = 0; c < 3; ++c) {
            if (x >= c * m.width() / 3 && x <= (c + 1) * m.width() / 3 - 1) col = c;
            if (y >= c * m.height() / 3 && y <= (c + 1) * m.height() / 3 - 1) row = c;
        }
        ++counts[static_cast<std::size_t>(row * 3 + col)];
    }
    int best = 0;
    for (int i = 1; i < 9; ++i)
        if (counts[static_cast<std::size_t>(i)] > counts[static_cast<std::size_t>(best)]) best = i;
    return best;
}

TEST(DecodeMask, AllOnAllOffAndSingleValue) {
    png::GrayImage full{10, 10, std::vector<std::uint8_t>(100, 255)};
    EXPECT_EQ(decode_mask(png::encode_gray8(full)).count(), 100u);

    png::GrayImage off{10, 10, std::vector<std::uint8_t>(100, 0)};
    EXPECT_TRUE(decode_mask(png::encode_gray8(off)).empty());

    png::GrayImage one{10, 10, std::vector<std::uint8_t>(100, 0)};
    one.pixels[4 * 10 + 3] = 1;
    const BinaryMask m = decode_mask(png::encode_gray8(one));
    EXPECT_EQ(m.pixels(), (Pixels{{3, 4}}));
}

TEST(DecodeMask, RejectsGarbageAndColour) {
    const std::vector<std::uint8_t> junk{1, 2, 3, 4, 5};
    EXPECT_THROW(decode_mask(junk), DecodeError);

    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = 4;
    image.height = 4;
    image.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> rgb(4 * 4 * 3, 200);
    png_alloc_size_t size = 0;
    ASSERT_NE(png_image_write_to_memory(&image, nullptr, &size, 0, rgb.data(), 0, nullptr), 0);
    std::vector<std::uint8_t> bytes(size);
    ASSERT_NE(png_image_write_to_memory(&image, bytes.data(), &size, 0, rgb.data(), 0, nullptr), 0);
    png_image_free(&image);
    EXPECT_THROW(decode_mask(bytes), DecodeError);
}

TEST(DecodeMask, RoundTripsThroughEncode) {
    std::mt19937_64 gen(11);
    for (int i = 0; i < 20; ++i) {
        const BinaryMask m = random_mask(gen, 1 + gen() % 40, 1 + gen() % 40, 0.3);
        EXPECT_EQ(decode_mask(encode_mask(m)), m);
    }
}

TEST(ConnectedComponents, DiagonalNeighboursJoinUnderEightConnectivity) {
    const BinaryMask m = mask_of(3, 3, {{0, 0}, {1, 1}});
    EXPECT_EQ(connected_components(m).size(), 1u);
    EXPECT_EQ(connected_components(m, Connectivity::Four).size(), 2u);
}

TEST(ConnectedComponents, GapSeparatesAndEmptyGivesNone) {
    EXPECT_EQ(connected_components(mask_of(3, 3, {{0, 0}, {2, 2}})).size(), 2u);
    EXPECT_TRUE(connected_components(BinaryMask(5, 5)).empty());
}

TEST(ConnectedComponents, OrderedByFirstRowMajorPixel) {
    // Blob B starts at row 0 to the right; blob A starts at row 1 on the left.
    const BinaryMask m = mask_of(8, 4, {{6, 0}, {6, 1}, {1, 1}, {1, 2}});
    const auto comps = connected_components(m);
    ASSERT_EQ(comps.size(), 2u);
    EXPECT_TRUE(comps[0].contains(6, 0));
    EXPECT_TRUE(comps[1].contains(1, 1));
}

TEST(ConnectedComponents, PartitionProperty) {
    std::mt19937_64 gen(3);
    for (int trial = 0; trial < 200; ++trial) {
        const BinaryMask m = random_mask(gen, 1 + gen() % 30, 1 + gen() % 30, 0.35);
        const auto comps = connected_components(m);
        BinaryMask uni(m.width(), m.height());
        std::size_t total = 0;
        for (const auto& c : comps) {
            total += c.count();
            for (auto [x, y] : c.pixels()) {
                EXPECT_FALSE(uni.contains(x, y)) << "pixel in two components";
                uni.set(x, y);
            }
        }
        EXPECT_EQ(total, m.count());
        EXPECT_EQ(uni, m);
    }
}

TEST(TightBbox, Examples) {
    EXPECT_EQ(tight_bbox(mask_of(20, 20, {{5, 7}, {9, 12}})), (BoundingBox{5, 7, 9, 12}));
    EXPECT_EQ(tight_bbox(filled_rect(13, 9, 0, 0, 12, 8)), (BoundingBox{0, 0, 12, 8}));
    EXPECT_EQ(tight_bbox(mask_of(10, 10, {{3, 4}})), (BoundingBox{3, 4, 3, 4}));
    EXPECT_THROW(tight_bbox(BinaryMask(4, 4)), EmptyMaskError);
}

TEST(TightBbox, TranslationShiftsBoxAndKeepsComponents) {
    std::mt19937_64 gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        const BinaryMask m = random_mask(gen, 20, 20, 0.1);
        if (m.empty()) continue;
        const std::uint32_t dx = gen() % 10, dy = gen() % 10;
        BinaryMask shifted(30, 30);
        BinaryMask base(30, 30);
        for (auto [x, y] : m.pixels()) {
            base.set(x, y);
            shifted.set(x + dx, y + dy);
        }
        const BoundingBox a = tight_bbox(base), b = tight_bbox(shifted);
        EXPECT_EQ(b, (BoundingBox{a.x_min + dx, a.y_min + dy, a.x_max + dx, a.y_max + dy}));
        EXPECT_EQ(connected_components(base).size(), connected_components(shifted).size());
    }
}

TEST(TightBbox, UnionOfComponentsMatchesPerAxisExtremes) {
    std::mt19937_64 gen(9);
    for (int trial = 0; trial < 100; ++trial) {
        const BinaryMask m = random_mask(gen, 25, 17, 0.08);
        const auto comps = connected_components(m);
        if (comps.empty()) continue;
        BoundingBox acc = tight_bbox(comps[0]);
        for (const auto& c : comps) {
            const BoundingBox b = tight_bbox(c);
            acc = {std::min(acc.x_min, b.x_min), std::min(acc.y_min, b.y_min), std::max(acc.x_max, b.x_max),
                   std::max(acc.y_max, b.y_max)};
        }
        EXPECT_EQ(tight_bbox(m), acc);
    }
}

TEST(Iou, InclusiveAreas) {
    EXPECT_DOUBLE_EQ(iou({0, 0, 9, 9}, {0, 0, 9, 9}), 1.0);
    EXPECT_DOUBLE_EQ(iou({0, 0, 4, 4}, {10, 10, 12, 12}), 0.0);
    // Brute force: intersection 5x5 = 25, union 100 + 100 - 25 = 175.
    long inter = 0, uni = 0;
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) {
            const bool a = x <= 9 && y <= 9;
            const bool b = x >= 5 && x <= 14 && y >= 5 && y <= 14;
            inter += a && b;
            uni += a || b;
        }
    EXPECT_DOUBLE_EQ(iou({0, 0, 9, 9}, {5, 5, 14, 14}), static_cast<double>(inter) / static_cast<double>(uni));
    EXPECT_NEAR(iou({0, 0, 9, 9}, {5, 5, 14, 14}), 25.0 / 175.0, 1e-15);
}

TEST(GridRegion, Examples) {
    EXPECT_EQ(grid_region(filled_rect(90, 90, 0, 0, 29, 29)).name(), "top left corner");
    EXPECT_EQ(grid_region(filled_rect(90, 90, 30, 30, 59, 59)).name(), "center");
    // rows 0-9 x cols 0-49: cell (0,0) holds 300 pixels, cell (0,1) holds 200.
    const BinaryMask strip = filled_rect(90, 90, 0, 0, 49, 9);
    EXPECT_EQ(oracle_region(strip), 0);
    EXPECT_EQ(grid_region(strip).name(), "top left corner");
    EXPECT_THROW(grid_region(BinaryMask(9, 9)), EmptyMaskError);
}

TEST(GridRegion, NamesAreRowMajor) {
    EXPECT_EQ((GridRegion{0, 2}).name(), "top right corner");
    EXPECT_EQ((GridRegion{1, 0}).name(), "left");
    EXPECT_EQ((GridRegion{2, 1}).name(), "bottom");
    EXPECT_EQ((GridRegion{2, 2}).name(), "bottom right corner");
}

TEST(GridRegion, TiesGoToSmallestRowMajorCell) {
    // One pixel in (0,1) and one in (1,0): tie, (0,1) has the smaller index.
    EXPECT_EQ(grid_region(mask_of(9, 9, {{4, 0}, {0, 4}})).name(), "top");
}

TEST(GridRegion, UnevenDivisionUsesFloorBoundaries) {
    // W = 10: columns [0,2], [3,5], [6,9].
    EXPECT_EQ(grid_region(mask_of(10, 10, {{2, 0}})).col, 0);
    EXPECT_EQ(grid_region(mask_of(10, 10, {{3, 0}})).col, 1);
    EXPECT_EQ(grid_region(mask_of(10, 10, {{6, 0}})).col, 2);
    EXPECT_EQ(grid_region(mask_of(10, 10, {{9, 9}})).name(), "bottom right corner");
}

TEST(GridRegion, MatchesOracleAndIsScaleInvariant) {
    std::mt19937_64 gen(21);
    for (int trial = 0; trial < 300; ++trial) {
        const std::uint32_t w = 3 * (1 + gen() % 8), h = 3 * (1 + gen() % 8);
        const BinaryMask m = random_mask(gen, w, h, 0.15);
        if (m.empty()) continue;
        EXPECT_EQ(grid_region(m).index(), oracle_region(m));
        const std::uint32_t k = 2 + gen() % 3;
        BinaryMask up(w * k, h * k);
        for (auto [x, y] : m.pixels())
            for (std::uint32_t dy = 0; dy < k; ++dy)
                for (std::uint32_t dx = 0; dx < k; ++dx) up.set(x * k + dx, y * k + dy);
        EXPECT_EQ(grid_region(up), grid_region(m));
    }
}

}  // namespace
}  // namespace ddqa
