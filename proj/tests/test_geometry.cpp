#include <gtest/gtest.h>

#include <random>

#include "geoseg/errors.hpp"
#include "geoseg/geometry.hpp"
#include "support/oracles.hpp"

using namespace geoseg;

TEST(Clamp, ClipsNegative) { EXPECT_EQ(clamp_box({-5, 10, 50, 60}, 100, 100), (BBox{0, 10, 50, 60})); }

TEST(Clamp, InsideUnchanged) { EXPECT_EQ(clamp_box({10, 10, 20, 20}, 100, 100), (BBox{10, 10, 20, 20})); }

TEST(Clamp, SwapsReversed) { EXPECT_EQ(clamp_box({50, 10, 20, 60}, 100, 100), (BBox{20, 10, 50, 60})); }

TEST(Clamp, ClipsFarEdge) { EXPECT_EQ(clamp_box({90, 90, 130, 140}, 100, 120), (BBox{90, 90, 100, 120})); }

TEST(Clamp, DegenerateThrows) {
  EXPECT_THROW(clamp_box({10, 10, 10, 50}, 100, 100), GroundingDegenerateError);
  EXPECT_THROW(clamp_box({120, 10, 150, 50}, 100, 100), GroundingDegenerateError);
}

TEST(Refine, PaperConstants) {
  const RefineParams p;
  EXPECT_DOUBLE_EQ(p.alpha, 0.2);
  EXPECT_DOUBLE_EQ(p.beta, 0.1);
  EXPECT_EQ(refine_box({100, 100, 200, 200}, 810, 810, p), (BBox{80, 80, 210, 210}));
}

TEST(Refine, ClipsLeftAndBottom) {
  EXPECT_EQ(refine_box({10, 700, 110, 800}, 810, 810, {}), (BBox{0, 680, 120, 810}));
}

TEST(Refine, ZeroMarginsIdentity) {
  EXPECT_EQ(refine_box({12.5, 3, 40, 77}, 100, 100, {0, 0}), (BBox{12.5, 3, 40, 77}));
}

TEST(Refine, Monotone) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> c(0, 200), m(0, 0.6);
  for (int i = 0; i < 2000; ++i) {
    BBox b{c(rng), c(rng), c(rng), c(rng)};
    if (b.x1 == b.x2 || b.y1 == b.y2) continue;
    b = clamp_box(b, 200, 200);
    const double a = m(rng), be = m(rng), d = m(rng);
    const BBox small = refine_box(b, 200, 200, {a, be});
    EXPECT_TRUE(refine_box(b, 200, 200, {a + d, be}).contains(small));
    EXPECT_TRUE(refine_box(b, 200, 200, {a, be + d}).contains(small));
  }
}

TEST(Grid, FloorMinsCeilMaxes) {
  EXPECT_EQ(grid_box({2.4, 2.4, 5.6, 5.6}), (PixelBox{2, 2, 6, 6}));
  EXPECT_EQ(grid_box({2, 2, 6, 6}), (PixelBox{2, 2, 6, 6}));
}

TEST(Crop, FullImageIdentity) {
  RgbImage img(5, 4);
  img.set(3, 2, {1, 2, 3});
  EXPECT_EQ(crop_region(img, BBox{0, 0, 5, 4}), img);
}

TEST(Crop, IndexArithmetic) {
  RgbImage img(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) img.set(x, y, {std::uint8_t(x), std::uint8_t(y), 0});
  const RgbImage crop = crop_region(img, BBox{2, 2, 6, 6});
  ASSERT_EQ(crop.width(), 4);
  ASSERT_EQ(crop.height(), 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(crop.at(x, y), (Rgb{std::uint8_t(x + 2), std::uint8_t(y + 2), 0}));
  EXPECT_EQ(crop_region(img, BBox{2.4, 2.4, 5.6, 5.6}), crop);
}

TEST(Crop, DegenerateThrows) {
  EXPECT_THROW(crop_region(RgbImage(8, 8), BBox{3, 3, 3, 6}), GroundingDegenerateError);
}

TEST(Paste, ResizeThenOffset) {
  const Mask out = paste_mask(Mask::from_rows({{1, 0}, {0, 0}}), {2, 2, 6, 6}, 8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) EXPECT_EQ(out.at(x, y), (x >= 2 && x < 4 && y >= 2 && y < 4) ? 1 : 0) << x << "," << y;
}

TEST(Paste, ZeroCropGivesZeroCanvas) { EXPECT_EQ(paste_mask(Mask(3, 3), {1, 1, 7, 5}, 8, 8), Mask(8, 8)); }

TEST(Paste, FullRoiIdentity) {
  std::mt19937_64 rng(9);
  const Mask m = geoseg::testing::random_mask(rng, 6, 5, 0.5);
  EXPECT_EQ(paste_mask(m, {0, 0, 6, 5}, 6, 5), m);
}

TEST(Paste, RoiOutsideCanvasThrows) {
  EXPECT_THROW(paste_mask(Mask(2, 2), {4, 4, 10, 10}, 8, 8), std::invalid_argument);
}

TEST(Paste, CropRoundTrip) {
  std::mt19937_64 rng(10);
  std::uniform_int_distribution<int> d(1, 12);
  for (int i = 0; i < 200; ++i) {
    const Mask crop = geoseg::testing::random_mask(rng, d(rng), d(rng), 0.4);
    const int x1 = d(rng) - 1, y1 = d(rng) - 1;
    const PixelBox roi{x1, y1, x1 + d(rng), y1 + d(rng)};
    const Mask canvas = paste_mask(crop, roi, 30, 30);
    EXPECT_EQ(crop_region(canvas, roi), resize_nearest(crop, roi.width(), roi.height()));
    EXPECT_EQ(mask_area(canvas), mask_area(crop_region(canvas, roi)));
  }
}

TEST(Json, BoxArrays) {
  EXPECT_EQ(nlohmann::json(BBox{1, 2, 3, 4}).dump(), "[1.0,2.0,3.0,4.0]");
  EXPECT_EQ(nlohmann::json::parse("[1,2,3,4]").get<PixelBox>(), (PixelBox{1, 2, 3, 4}));
}
