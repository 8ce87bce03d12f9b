#include "geoseg/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "geoseg/errors.hpp"

namespace geoseg {

namespace {

double snap_margin(double v) {
  // n / steps is the correctly rounded double of the grid value
  const double steps = std::round(1.0 / kMarginGrid);
  const double snapped = std::round(v * steps) / steps;
  return std::clamp(snapped, 0.0, kMaxMargin);
}

}  // namespace

EdgeOffsets edge_offsets(const BBox& pred, const BBox& gt) {
  const double w = pred.width();
  const double h = pred.height();
  if (!(w > 0) || !(h > 0)) throw std::invalid_argument("edge_offsets: degenerate predicted box");
  return {(pred.x1 - gt.x1) / w, (pred.y1 - gt.y1) / h, (gt.x2 - pred.x2) / w, (gt.y2 - pred.y2) / h};
}

double nearest_rank_quantile(std::vector<double> values, double quantile) {
  if (values.empty()) throw std::invalid_argument("quantile of an empty sample");
  if (!(quantile > 0.0 && quantile < 1.0)) throw std::invalid_argument("quantile must lie in (0,1)");
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

RefineParams derive_margins(const std::vector<EdgeOffsets>& offsets, double quantile) {
  if (offsets.empty()) throw std::invalid_argument("derive_margins: no offsets");
  std::vector<double> leading;
  std::vector<double> trailing;
  leading.reserve(offsets.size() * 2);
  trailing.reserve(offsets.size() * 2);
  for (const auto& o : offsets) {
    leading.push_back(std::max(0.0, o.left));
    leading.push_back(std::max(0.0, o.top));
    trailing.push_back(std::max(0.0, o.right));
    trailing.push_back(std::max(0.0, o.bottom));
  }
  return {snap_margin(nearest_rank_quantile(std::move(leading), quantile)),
          snap_margin(nearest_rank_quantile(std::move(trailing), quantile))};
}

std::vector<HistogramRow> offset_histogram(const std::vector<EdgeOffsets>& offsets, double bin_width) {
  if (offsets.empty()) throw std::invalid_argument("offset_histogram: no offsets");
  if (!(bin_width > 0)) throw std::invalid_argument("offset_histogram: bin width must be > 0");
  static constexpr const char* kEdges[] = {"left", "top", "right", "bottom"};
  std::vector<HistogramRow> rows;
  for (int e = 0; e < 4; ++e) {
    std::map<long long, std::size_t> bins;
    for (const auto& o : offsets) {
      const double v = e == 0 ? o.left : e == 1 ? o.top : e == 2 ? o.right : o.bottom;
      ++bins[static_cast<long long>(std::floor(v / bin_width))];
    }
    for (const auto& [bin, count] : bins) {
      rows.push_back({kEdges[e], static_cast<double>(bin) * bin_width, count});
    }
  }
  return rows;
}

std::string export_offset_histogram(const std::vector<EdgeOffsets>& offsets, double bin_width) {
  std::ostringstream out;
  out << "edge,bin_center,count\n";
  char buf[64];
  for (const auto& row : offset_histogram(offsets, bin_width)) {
    std::snprintf(buf, sizeof buf, "%.10g", row.bin_center == 0 ? 0.0 : row.bin_center);
    out << row.edge << ',' << buf << ',' << row.count << '\n';
  }
  return out.str();
}

std::vector<BoxPair> load_box_pairs(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open pairs file " + path.string());
  std::vector<BoxPair> pairs;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      pairs.push_back({j.at("pred").get<BBox>(), j.at("gt").get<BBox>()});
    } catch (const std::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (pairs.empty()) throw LoadError("pairs file " + path.string() + " is empty");
  return pairs;
}

}  // namespace geoseg
