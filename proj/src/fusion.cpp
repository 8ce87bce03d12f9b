#include "geoseg/fusion.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace geoseg {

std::string_view to_string(FusionBranch branch) {
  switch (branch) {
    case FusionBranch::intersection: return "intersection";
    case FusionBranch::fallback_a: return "fallback_A";
    case FusionBranch::fallback_b: return "fallback_B";
    case FusionBranch::empty: return "empty";
    case FusionBranch::error: return "error";
  }
  return "error";
}

FusionBranch fusion_branch_from_string(std::string_view name) {
  for (auto b : {FusionBranch::intersection, FusionBranch::fallback_a, FusionBranch::fallback_b,
                 FusionBranch::empty, FusionBranch::error}) {
    if (to_string(b) == name) return b;
  }
  throw std::invalid_argument("unknown fusion branch: " + std::string(name));
}

bool assess_validity(const RouteOutput& output, const PixelBox& roi, const FusionParams& params) {
  if (roi.area() <= 0) throw std::invalid_argument("assess_validity: degenerate RoI");
  if (output.route == Route::point && output.keypoint_count.value_or(0) == 0) return false;
  const double ratio = static_cast<double>(mask_area(output.mask)) / static_cast<double>(roi.area());
  return ratio >= params.gamma;
}

FusedMask fuse(const RouteOutput& pt, const RouteOutput& txt, bool pt_valid, bool txt_valid) {
  if (!pt.mask.same_shape(txt.mask)) {
    throw std::invalid_argument("fuse: route masks have different dimensions");
  }
  if (pt_valid && txt_valid) {
    const auto a = pt.mask.bits();
    const auto b = txt.mask.bits();
    std::vector<std::uint8_t> bits(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) bits[i] = a[i] & b[i];
    return {Mask(pt.mask.width(), pt.mask.height(), std::move(bits)), FusionBranch::intersection};
  }
  if (pt_valid) return {pt.mask, FusionBranch::fallback_a};
  if (txt_valid) return {txt.mask, FusionBranch::fallback_b};
  return {Mask(pt.mask.width(), pt.mask.height()), FusionBranch::empty};
}

void to_json(nlohmann::json& j, const FusionParams& p) { j = {{"gamma", p.gamma}}; }

void from_json(const nlohmann::json& j, FusionParams& p) { p.gamma = j.value("gamma", p.gamma); }

}  // namespace geoseg
