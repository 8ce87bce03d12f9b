#include "geoseg/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geoseg {

void validate(const SimilarityMap& map) {
  if (map.width < 1 || map.height < 1) {
    throw std::invalid_argument("similarity map: dimensions must be >= 1");
  }
  if (map.values.size() != static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height)) {
    throw std::invalid_argument("similarity map: value count does not match width x height");
  }
  if (!std::all_of(map.values.begin(), map.values.end(), [](float v) { return std::isfinite(v); })) {
    throw std::invalid_argument("similarity map: non-finite value");
  }
}

int default_nms_radius(int map_width, int map_height) {
  const int shorter = std::min(map_width, map_height);
  return std::max(1, static_cast<int>(std::lround(0.1 * shorter)));
}

KeypointSet extract_keypoints(const SimilarityMap& map, int crop_width, int crop_height, int k,
                              double tau, int radius) {
  validate(map);
  if (crop_width < 1 || crop_height < 1) {
    throw std::invalid_argument("extract_keypoints: crop dimensions must be >= 1");
  }
  if (k < 1) throw std::invalid_argument("extract_keypoints: k must be >= 1");
  if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("extract_keypoints: tau outside [0,1]");
  if (radius < 1) throw std::invalid_argument("extract_keypoints: radius must be >= 1");

  const auto [lo_it, hi_it] = std::minmax_element(map.values.begin(), map.values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) return {};

  const std::size_t n = map.values.size();
  std::vector<double> norm(n);
  for (std::size_t i = 0; i < n; ++i) norm[i] = (static_cast<double>(map.values[i]) - lo) / (hi - lo);

  std::vector<bool> suppressed(n, false);
  KeypointSet out;
  while (static_cast<int>(out.size()) < k) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (suppressed[i]) continue;
      if (best == n || norm[i] > norm[best]) best = i;
    }
    if (best == n || norm[best] < tau) break;

    const int row = static_cast<int>(best / static_cast<std::size_t>(map.width));
    const int col = static_cast<int>(best % static_cast<std::size_t>(map.width));
    for (int r = std::max(0, row - radius); r <= std::min(map.height - 1, row + radius); ++r) {
      for (int c = std::max(0, col - radius); c <= std::min(map.width - 1, col + radius); ++c) {
        suppressed[static_cast<std::size_t>(r) * static_cast<std::size_t>(map.width) +
                   static_cast<std::size_t>(c)] = true;
      }
    }
    out.push_back({(col + 0.5) * crop_width / map.width, (row + 0.5) * crop_height / map.height,
                   norm[best], col, row});
  }
  return out;
}

KeypointSet extract_keypoints(const SimilarityMap& map, int crop_width, int crop_height,
                              const KeypointParams& params) {
  validate(map);
  const int radius = params.radius.value_or(default_nms_radius(map.width, map.height));
  return extract_keypoints(map, crop_width, crop_height, params.k, params.tau, radius);
}

void to_json(nlohmann::json& j, const Keypoint& kp) {
  j = {{"x", kp.x}, {"y", kp.y}, {"score", kp.score}, {"cell", {kp.cell_col, kp.cell_row}}};
}

void from_json(const nlohmann::json& j, Keypoint& kp) {
  kp.x = j.at("x").get<double>();
  kp.y = j.at("y").get<double>();
  kp.score = j.at("score").get<double>();
  kp.cell_col = j.at("cell").at(0).get<int>();
  kp.cell_row = j.at("cell").at(1).get<int>();
}

void to_json(nlohmann::json& j, const KeypointParams& p) {
  j = {{"k", p.k}, {"tau", p.tau}};
  j["radius"] = p.radius ? nlohmann::json(*p.radius) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, KeypointParams& p) {
  p.k = j.value("k", p.k);
  p.tau = j.value("tau", p.tau);
  if (j.contains("radius")) {
    p.radius = j["radius"].is_null() ? std::nullopt : std::optional<int>(j["radius"].get<int>());
  }
}

}  // namespace geoseg
