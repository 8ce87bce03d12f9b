#pragma once

#include <optional>
#include <string_view>

#include "geoseg/geometry.hpp"
#include "geoseg/raster.hpp"

namespace geoseg {

enum class Route { point, text };

// A route's mask mapped back to the full canvas.
struct RouteOutput {
  Mask mask;
  Route route = Route::text;
  std::optional<std::size_t> keypoint_count;  // point route only
};

struct FusionParams {
  double gamma = 0.01;  // minimum mask-area / RoI-area ratio
  friend bool operator==(const FusionParams&, const FusionParams&) = default;
};

enum class FusionBranch { intersection, fallback_a, fallback_b, empty, error };

std::string_view to_string(FusionBranch branch);
FusionBranch fusion_branch_from_string(std::string_view name);

struct FusedMask {
  Mask mask;
  FusionBranch branch = FusionBranch::empty;
};

// area(mask) / area(roi) >= gamma, and a point route needs at least one keypoint.
bool assess_validity(const RouteOutput& output, const PixelBox& roi, const FusionParams& params);

// Both valid: intersection. One valid: that route's mask. Neither: all zero.
FusedMask fuse(const RouteOutput& pt, const RouteOutput& txt, bool pt_valid, bool txt_valid);

void to_json(nlohmann::json& j, const FusionParams& p);
void from_json(const nlohmann::json& j, FusionParams& p);

}  // namespace geoseg
