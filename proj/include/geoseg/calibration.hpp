#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "geoseg/geometry.hpp"

namespace geoseg {

// Signed drift of the ground-truth box relative to a predicted box,
// normalized by the predicted width/height. Positive: GT extends beyond the
// prediction on that side.
struct EdgeOffsets {
  double left = 0;
  double top = 0;
  double right = 0;
  double bottom = 0;
  friend bool operator==(const EdgeOffsets&, const EdgeOffsets&) = default;
};

struct BoxPair {
  BBox pred;
  BBox gt;
};

EdgeOffsets edge_offsets(const BBox& pred, const BBox& gt);

inline constexpr double kDefaultMarginQuantile = 0.8;
inline constexpr double kMarginGrid = 0.05;
inline constexpr double kMaxMargin = 0.5;

// Nearest-rank quantile, 1-based rank ceil(q*n).
double nearest_rank_quantile(std::vector<double> values, double quantile);

// alpha from pooled positive left/top offsets, beta from right/bottom; each
// is the nearest-rank quantile snapped to a 0.05 grid and clamped to [0, 0.5].
RefineParams derive_margins(const std::vector<EdgeOffsets>& offsets,
                            double quantile = kDefaultMarginQuantile);

struct HistogramRow {
  std::string edge;
  double bin_center = 0;
  std::size_t count = 0;
  friend bool operator==(const HistogramRow&, const HistogramRow&) = default;
};

// Per-edge bins keyed by floor(v / bin_width); rows sorted by edge order then bin.
std::vector<HistogramRow> offset_histogram(const std::vector<EdgeOffsets>& offsets, double bin_width);
std::string export_offset_histogram(const std::vector<EdgeOffsets>& offsets, double bin_width);

// JSON-lines {"pred":[x1,y1,x2,y2],"gt":[x1,y1,x2,y2]}.
std::vector<BoxPair> load_box_pairs(const std::filesystem::path& path);

}  // namespace geoseg
