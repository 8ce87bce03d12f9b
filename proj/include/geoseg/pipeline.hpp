#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "geoseg/backends.hpp"
#include "geoseg/fusion.hpp"
#include "geoseg/geometry.hpp"
#include "geoseg/keypoints.hpp"
#include "geoseg/manifest.hpp"
#include "geoseg/raster.hpp"

namespace geoseg {

struct FallbackPolicy {
  bool full_image_on_grounding_failure = true;
  int grounder_parse_retries = 1;
  friend bool operator==(const FallbackPolicy&, const FallbackPolicy&) = default;
};

// Defaults are the recommended operating point: alpha 0.2, beta 0.1, k 5,
// tau 0.3, gamma 0.01.
struct PipelineConfig {
  RefineParams refine;
  KeypointParams keypoints;
  FusionParams fusion;
  BackendEndpoint grounder{.role = BackendRole::grounder, .url = {}};
  BackendEndpoint matcher{.role = BackendRole::matcher, .url = {}};
  BackendEndpoint segmenter{.role = BackendRole::segmenter, .url = {}};
  BackendEndpoint judge{.role = BackendRole::judge, .url = {}};
  FallbackPolicy fallback;
  // When set, the grounder receives this template rendered with the query
  // instead of the bare query.
  std::optional<std::string> grounding_prompt;
  std::optional<std::filesystem::path> cache_dir;
  std::optional<std::filesystem::path> stub_fixture;
  int workers = 0;  // 0: one per processor
  bool record_timings = false;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);
PipelineConfig load_config(const std::filesystem::path& path);
// Fills unset endpoint URLs from GEOSEG_*_URL.
void apply_endpoint_env(PipelineConfig& config);
// Throws std::invalid_argument for out-of-range parameters.
void validate(const PipelineConfig& config);
// The fields that can change a prediction (execution settings such as
// workers, cache_dir and record_timings are dropped). Echoed into traces.
nlohmann::json config_echo(const PipelineConfig& config);
std::string config_digest(const PipelineConfig& config);

struct StageTimings {
  double grounding_ms = 0;
  double route_a_ms = 0;
  double route_b_ms = 0;
  double total_ms = 0;
  friend bool operator==(const StageTimings&, const StageTimings&) = default;
};

struct PipelineTrace {
  std::string sample_id;
  std::string query;
  std::vector<std::string> grounder_responses;
  std::optional<BBox> box;          // parsed and clamped
  std::optional<BBox> refined_box;
  std::optional<PixelBox> roi;      // integer grid of refined_box
  std::string phrase;
  bool grounding_fallback = false;  // full-image RoI used
  std::optional<int> nms_radius;
  KeypointSet keypoints;
  std::optional<RleMask> point_mask;
  std::optional<RleMask> text_mask;
  bool point_valid = false;
  bool text_valid = false;
  FusionBranch branch = FusionBranch::error;
  std::size_t mask_area = 0;
  std::vector<std::string> errors;
  std::optional<StageTimings> timings;
  nlohmann::json config;

  friend bool operator==(const PipelineTrace&, const PipelineTrace&) = default;
};

void to_json(nlohmann::json& j, const PipelineTrace& t);
void from_json(const nlohmann::json& j, PipelineTrace& t);

struct SampleResult {
  Mask mask;
  PipelineTrace trace;
};

// ground -> parse -> refine -> crop -> {point route, text route} ->
// paste back -> validity -> fuse. Backend failures yield an all-zero mask
// with branch "error"; they are never thrown.
SampleResult run_sample(const RgbImage& image, const std::string& query, const PipelineConfig& config,
                        const BackendSet& backends, const std::string& sample_id = "sample");

// Same as run_sample but consults/updates the content-addressed cache when
// config.cache_dir is set.
SampleResult run_sample_cached(const RgbImage& image, const std::string& query,
                               const PipelineConfig& config, const BackendSet& backends,
                               const std::string& sample_id = "sample", bool* cache_hit = nullptr);

struct BatchOutcome {
  std::string sample_id;
  std::optional<Mask> mask;  // absent when the image could not be read
  PipelineTrace trace;
  bool failed = false;
  bool cache_hit = false;
};

struct BatchResult {
  std::vector<BatchOutcome> outcomes;  // manifest order
  std::size_t failures = 0;
  std::vector<std::string> failed_ids;
};

// Predictions go to <out_dir>/predictions/<id>.png, traces to
// <out_dir>/traces.jsonl in manifest order.
BatchResult run_batch(const Manifest& manifest, const PipelineConfig& config, const BackendSet& backends,
                      const std::filesystem::path& out_dir);

std::vector<PipelineTrace> read_traces(const std::filesystem::path& path);
void write_traces(const std::filesystem::path& path, const std::vector<PipelineTrace>& traces);

// Stub backends when config.stub_fixture is set, HTTP clients otherwise.
BackendSet make_backends(const PipelineConfig& config);

}  // namespace geoseg
