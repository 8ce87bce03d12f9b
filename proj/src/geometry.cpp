#include "geoseg/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "geoseg/errors.hpp"

namespace geoseg {

namespace {

void require_canvas(int width, int height, const char* what) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument(std::string(what) + ": image dimensions must be >= 1");
  }
}

template <typename Raster>
void require_inside(const PixelBox& roi, const Raster& r, const char* what) {
  if (roi.width() <= 0 || roi.height() <= 0) {
    throw GroundingDegenerateError(std::string(what) + ": degenerate RoI");
  }
  if (roi.x1 < 0 || roi.y1 < 0 || roi.x2 > r.width() || roi.y2 > r.height()) {
    throw std::invalid_argument(std::string(what) + ": RoI outside the image");
  }
}

}  // namespace

BBox clamp_box(const BBox& box, int width, int height) {
  require_canvas(width, height, "clamp_box");
  if (!std::isfinite(box.x1) || !std::isfinite(box.y1) || !std::isfinite(box.x2) ||
      !std::isfinite(box.y2)) {
    throw GroundingDegenerateError("clamp_box: non-finite coordinate");
  }
  BBox out = box;
  if (out.x1 > out.x2) std::swap(out.x1, out.x2);
  if (out.y1 > out.y2) std::swap(out.y1, out.y2);
  const double w = width;
  const double h = height;
  out.x1 = std::clamp(out.x1, 0.0, w);
  out.x2 = std::clamp(out.x2, 0.0, w);
  out.y1 = std::clamp(out.y1, 0.0, h);
  out.y2 = std::clamp(out.y2, 0.0, h);
  if (out.width() <= 0 || out.height() <= 0) {
    throw GroundingDegenerateError("clamp_box: box has zero area inside the image");
  }
  return out;
}

BBox refine_box(const BBox& box, int width, int height, const RefineParams& params) {
  require_canvas(width, height, "refine_box");
  if (params.alpha < 0 || params.beta < 0) {
    throw std::invalid_argument("refine_box: margins must be non-negative");
  }
  const double w = box.width();
  const double h = box.height();
  const double cw = width;
  const double ch = height;
  return {std::clamp(box.x1 - params.alpha * w, 0.0, cw),
          std::clamp(box.y1 - params.alpha * h, 0.0, ch),
          std::clamp(box.x2 + params.beta * w, 0.0, cw),
          std::clamp(box.y2 + params.beta * h, 0.0, ch)};
}

PixelBox grid_box(const BBox& box) {
  return {static_cast<int>(std::floor(box.x1)), static_cast<int>(std::floor(box.y1)),
          static_cast<int>(std::ceil(box.x2)), static_cast<int>(std::ceil(box.y2))};
}

RgbImage crop_region(const RgbImage& image, const BBox& box) {
  return crop_region(image, grid_box(box));
}

RgbImage crop_region(const RgbImage& image, const PixelBox& roi) {
  require_inside(roi, image, "crop_region");
  RgbImage out(roi.width(), roi.height());
  for (int y = 0; y < roi.height(); ++y) {
    for (int x = 0; x < roi.width(); ++x) out.set(x, y, image.at(roi.x1 + x, roi.y1 + y));
  }
  return out;
}

Mask crop_region(const Mask& mask, const PixelBox& roi) {
  require_inside(roi, mask, "crop_region");
  Mask out(roi.width(), roi.height());
  for (int y = 0; y < roi.height(); ++y) {
    for (int x = 0; x < roi.width(); ++x) out.set(x, y, mask.at(roi.x1 + x, roi.y1 + y) != 0);
  }
  return out;
}

Mask paste_mask(const Mask& crop_mask, const PixelBox& roi, int width, int height) {
  require_canvas(width, height, "paste_mask");
  if (roi.width() <= 0 || roi.height() <= 0) {
    throw std::invalid_argument("paste_mask: degenerate RoI");
  }
  if (roi.x1 < 0 || roi.y1 < 0 || roi.x2 > width || roi.y2 > height) {
    throw std::invalid_argument("paste_mask: RoI outside the canvas");
  }
  Mask canvas(width, height);
  if (crop_mask.width() < 1 || crop_mask.height() < 1) return canvas;
  const Mask scaled = resize_nearest(crop_mask, roi.width(), roi.height());
  for (int y = 0; y < roi.height(); ++y) {
    for (int x = 0; x < roi.width(); ++x) {
      if (scaled.at(x, y)) canvas.set(roi.x1 + x, roi.y1 + y, true);
    }
  }
  return canvas;
}

void to_json(nlohmann::json& j, const BBox& box) { j = {box.x1, box.y1, box.x2, box.y2}; }

void from_json(const nlohmann::json& j, BBox& box) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1,y1,x2,y2]");
  box = {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

void to_json(nlohmann::json& j, const PixelBox& box) { j = {box.x1, box.y1, box.x2, box.y2}; }

void from_json(const nlohmann::json& j, PixelBox& box) {
  if (!j.is_array() || j.size() != 4) throw std::invalid_argument("box must be [x1,y1,x2,y2]");
  box = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

void to_json(nlohmann::json& j, const RefineParams& p) {
  j = {{"alpha", p.alpha}, {"beta", p.beta}};
}

void from_json(const nlohmann::json& j, RefineParams& p) {
  p.alpha = j.value("alpha", p.alpha);
  p.beta = j.value("beta", p.beta);
}

}  // namespace geoseg
