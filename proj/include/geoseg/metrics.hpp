#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/raster.hpp"

namespace geoseg {

struct Confusion {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct PixelMetrics {
  double iou = 0;
  double dice = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double specificity = 0;
};

struct MetricValues {
  double iou = 0;
  double dice = 0;
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double specificity = 0;
  double boundary_f = 0;
  friend bool operator==(const MetricValues&, const MetricValues&) = default;
};

Confusion confusion(const Mask& pred, const Mask& gt);

// Empty-denominator conventions: iou/dice/precision/recall are 1 when both
// masks are empty and 0 otherwise; specificity is 1 without background.
PixelMetrics pixel_metrics(const Confusion& c);

// Boundary pixels are foreground pixels 4-adjacent to background or on the
// image border. A boundary pixel matches if the other boundary has a pixel
// within Euclidean distance theta.
double boundary_f(const Mask& pred, const Mask& gt, double theta);

// round(0.0075 * image diagonal)
double default_boundary_theta(int width, int height);

struct MetricsReport {
  std::string sample_id;
  std::optional<std::string> scenario;
  std::optional<int> level;
  MetricValues values;
  Confusion counts;
  double theta = 0;
  std::optional<std::string> branch;  // fusion branch of the prediction, if known
  std::vector<std::string> flags;     // e.g. "missing_prediction"
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

MetricsReport score_sample(const Mask& pred, const Mask& gt, std::optional<double> theta = {});

enum class AggregationMode { macro, micro };

struct MetricGroup {
  std::size_t count = 0;
  MetricValues values;
};

struct MetricsSummary {
  AggregationMode mode = AggregationMode::macro;
  MetricGroup overall;
  std::map<std::string, MetricGroup> by_scenario;
  std::map<int, MetricGroup> by_level;
};

// Macro: per-sample mean. Micro: pixel metrics of summed confusions
// (boundary F stays a per-sample mean). Throws on an empty list.
MetricsSummary aggregate(const std::vector<MetricsReport>& reports,
                         AggregationMode mode = AggregationMode::macro);

// Plain-text table, IoU | Dice | Acc. | Prec. | Rec. | Spec. | BF in percent.
std::string render_metrics_table(const MetricsSummary& summary);

void to_json(nlohmann::json& j, const MetricValues& v);
void from_json(const nlohmann::json& j, MetricValues& v);
void to_json(nlohmann::json& j, const MetricsReport& r);
void from_json(const nlohmann::json& j, MetricsReport& r);
void to_json(nlohmann::json& j, const MetricsSummary& s);

}  // namespace geoseg
