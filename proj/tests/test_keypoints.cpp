#include <gtest/gtest.h>

#include <random>

#include "geoseg/keypoints.hpp"
#include "support/oracles.hpp"

using namespace geoseg;

namespace {

SimilarityMap grid(int w, int h, std::vector<float> v) { return {w, h, std::move(v)}; }

}  // namespace

TEST(Keypoints, SinglePeak) {
  const auto map = grid(3, 3, {0.1f, 0.2f, 0.1f, 0.2f, 1.0f, 0.2f, 0.1f, 0.2f, 0.1f});
  const auto k = extract_keypoints(map, 30, 30, 5, 0.3, 1);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_DOUBLE_EQ(k[0].x, 15.0);
  EXPECT_DOUBLE_EQ(k[0].y, 15.0);
  EXPECT_DOUBLE_EQ(k[0].score, 1.0);
}

TEST(Keypoints, ConstantMapIsEmpty) {
  EXPECT_TRUE(extract_keypoints(grid(4, 4, std::vector<float>(16, 0.7f)), 16, 16, 5, 0.3, 1).empty());
}

TEST(Keypoints, GreedyWithSuppression) {
  const auto k = extract_keypoints(grid(5, 1, {1.0f, 0.2f, 0.0f, 0.2f, 0.9f}), 50, 10, 5, 0.3, 1);
  ASSERT_EQ(k.size(), 2u);
  EXPECT_DOUBLE_EQ(k[0].x, 5.0);
  EXPECT_DOUBLE_EQ(k[0].y, 5.0);
  EXPECT_DOUBLE_EQ(k[1].x, 45.0);
  EXPECT_DOUBLE_EQ(k[1].y, 5.0);
}

TEST(Keypoints, TiesGoToSmallerIndex) {
  const auto k = extract_keypoints(grid(4, 1, {0.0f, 1.0f, 1.0f, 0.0f}), 4, 1, 1, 0.3, 1);
  ASSERT_EQ(k.size(), 1u);
  EXPECT_EQ(k[0].cell_col, 1);
}

TEST(Keypoints, DefaultsAndRadius) {
  const KeypointParams p;
  EXPECT_EQ(p.k, 5);
  EXPECT_DOUBLE_EQ(p.tau, 0.3);
  EXPECT_EQ(default_nms_radius(3, 3), 1);
  EXPECT_EQ(default_nms_radius(16, 40), 2);
  EXPECT_EQ(default_nms_radius(100, 100), 10);
}

TEST(Keypoints, RejectsBadArguments) {
  const auto map = grid(2, 2, {0, 1, 0, 0});
  EXPECT_THROW(extract_keypoints(map, 4, 4, 0, 0.3, 1), std::invalid_argument);
  EXPECT_THROW(extract_keypoints(map, 4, 4, 1, 1.2, 1), std::invalid_argument);
  EXPECT_THROW(extract_keypoints(map, 4, 4, 1, 0.3, 0), std::invalid_argument);
  EXPECT_THROW(extract_keypoints(map, 0, 4, 1, 0.3, 1), std::invalid_argument);
  EXPECT_THROW(extract_keypoints(grid(2, 2, {0, 1, 0}), 4, 4, 1, 0.3, 1), std::invalid_argument);
  EXPECT_THROW(extract_keypoints(grid(1, 1, {NAN}), 4, 4, 1, 0.3, 1), std::invalid_argument);
}

TEST(Keypoints, OracleAndInvariants) {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<int> dim(1, 16), kk(1, 8), rad(1, 4), crop(1, 200);
  std::uniform_real_distribution<double> tau(0.0, 1.0);
  std::uniform_real_distribution<float> val(-2.0f, 5.0f);
  for (int trial = 0; trial < 300; ++trial) {
    SimilarityMap map{dim(rng), dim(rng), {}};
    map.values.resize(static_cast<std::size_t>(map.width) * map.height);
    for (auto& v : map.values) v = trial % 5 == 0 ? std::round(val(rng)) : val(rng);  // rounding forces ties
    const int k = kk(rng), r = rad(rng), cw = crop(rng), ch = crop(rng);
    const double t = tau(rng);
    const auto got = extract_keypoints(map, cw, ch, k, t, r);
    ASSERT_EQ(got, geoseg::testing::reference_keypoints(map, cw, ch, k, t, r));
    ASSERT_LE(static_cast<int>(got.size()), k);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_GE(got[i].score, t);
      if (i) {
        EXPECT_LE(got[i].score, got[i - 1].score);
      }
      for (std::size_t j = 0; j < i; ++j) {
        EXPECT_GT(std::max(std::abs(got[i].cell_col - got[j].cell_col), std::abs(got[i].cell_row - got[j].cell_row)), r);
      }
    }
  }
}

TEST(Keypoints, AffineRescaleKeepsSelection) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> val(0.0f, 1.0f);
  for (int trial = 0; trial < 100; ++trial) {
    SimilarityMap map{8, 6, std::vector<float>(48)};
    for (auto& v : map.values) v = val(rng);
    SimilarityMap scaled = map;
    for (auto& v : scaled.values) v = v * 4.0f + 3.0f;
    const auto a = extract_keypoints(map, 64, 48, 5, 0.3, 1);
    const auto b = extract_keypoints(scaled, 64, 48, 5, 0.3, 1);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].cell_col, b[i].cell_col);
      EXPECT_EQ(a[i].cell_row, b[i].cell_row);
    }
  }
}

TEST(Keypoints, JsonRoundTrip) {
  const Keypoint kp{1.5, 2.25, 0.75, 3, 4};
  EXPECT_EQ(nlohmann::json(kp).get<Keypoint>(), kp);
  KeypointParams p;
  p.radius = 3;
  EXPECT_EQ(nlohmann::json(p).get<KeypointParams>(), p);
}
