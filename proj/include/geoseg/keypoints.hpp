#pragma once

#include <optional>
#include <vector>

#include <json.hpp>

namespace geoseg {

// Row-major similarity grid produced by the matcher backend.
struct SimilarityMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;

  float at(int col, int row) const {
    return values[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(col)];
  }
  friend bool operator==(const SimilarityMap&, const SimilarityMap&) = default;
};

// Throws std::invalid_argument on size mismatch or non-finite values.
void validate(const SimilarityMap& map);

struct Keypoint {
  double x = 0;  // crop pixel coordinates
  double y = 0;
  double score = 0;  // min-max normalized similarity
  int cell_col = 0;
  int cell_row = 0;
  friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

using KeypointSet = std::vector<Keypoint>;

struct KeypointParams {
  int k = 5;
  double tau = 0.3;
  std::optional<int> radius;  // unset: scale with the map, see default_nms_radius
  friend bool operator==(const KeypointParams&, const KeypointParams&) = default;
};

// max(1, round(0.1 * min(map_width, map_height)))
int default_nms_radius(int map_width, int map_height);

// Thresholded greedy NMS over the min-max normalized map. Suppression is a
// Chebyshev neighbourhood of `radius` cells; ties go to the smaller
// row-major index. A constant map yields no points.
KeypointSet extract_keypoints(const SimilarityMap& map, int crop_width, int crop_height, int k,
                              double tau, int radius);

KeypointSet extract_keypoints(const SimilarityMap& map, int crop_width, int crop_height,
                              const KeypointParams& params);

void to_json(nlohmann::json& j, const Keypoint& kp);
void from_json(const nlohmann::json& j, Keypoint& kp);
void to_json(nlohmann::json& j, const KeypointParams& p);
void from_json(const nlohmann::json& j, KeypointParams& p);

}  // namespace geoseg
