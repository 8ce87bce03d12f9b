#pragma once

#include "geoseg/raster.hpp"

namespace geoseg {

// Axis-aligned box in pixel coordinates; x2/y2 are exclusive edges, so a
// box may extend to x2 == W.
struct BBox {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  bool contains(const BBox& inner) const {
    return x1 <= inner.x1 && y1 <= inner.y1 && x2 >= inner.x2 && y2 >= inner.y2;
  }
  friend bool operator==(const BBox&, const BBox&) = default;
};

// Integer-gridded RoI: floor on mins, ceil on maxes.
struct PixelBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const { return x2 - x1; }
  int height() const { return y2 - y1; }
  long long area() const { return static_cast<long long>(width()) * height(); }
  BBox to_bbox() const { return {double(x1), double(y1), double(x2), double(y2)}; }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

struct RefineParams {
  double alpha = 0.2;  // top-left margin, fraction of box size
  double beta = 0.1;   // bottom-right margin
  friend bool operator==(const RefineParams&, const RefineParams&) = default;
};

// Swaps reversed pairs and clips to [0,W] x [0,H]. Throws
// GroundingDegenerateError if the result has zero width or height.
BBox clamp_box(const BBox& box, int width, int height);

// Asymmetric margin expansion of an already clamped box, clipped to the image.
BBox refine_box(const BBox& box, int width, int height, const RefineParams& params);

PixelBox grid_box(const BBox& box);

// Throws GroundingDegenerateError for an empty RoI, std::invalid_argument
// when the RoI leaves the image.
RgbImage crop_region(const RgbImage& image, const BBox& box);
RgbImage crop_region(const RgbImage& image, const PixelBox& roi);
Mask crop_region(const Mask& mask, const PixelBox& roi);

// Resizes crop_mask to the RoI and places it on an all-zero width x height canvas.
Mask paste_mask(const Mask& crop_mask, const PixelBox& roi, int width, int height);

void to_json(nlohmann::json& j, const BBox& box);
void from_json(const nlohmann::json& j, BBox& box);
void to_json(nlohmann::json& j, const PixelBox& box);
void from_json(const nlohmann::json& j, PixelBox& box);
void to_json(nlohmann::json& j, const RefineParams& p);
void from_json(const nlohmann::json& j, RefineParams& p);

}  // namespace geoseg
