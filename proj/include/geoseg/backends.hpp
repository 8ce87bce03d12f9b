#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "geoseg/geometry.hpp"
#include "geoseg/keypoints.hpp"
#include "geoseg/raster.hpp"

namespace geoseg {

// (b, p): a clamped box and the concise referential phrase naming the target.
struct GroundingResult {
  BBox box;
  std::string phrase;
  bool from_fallback_numbers = false;  // recovered from bare integers, phrase = query
};

// Finds the first JSON object in model output accepted by `accept`,
// searching fenced code blocks before the whole text.
std::optional<nlohmann::json> extract_json_object(
    std::string_view text, const std::function<bool(const nlohmann::json&)>& accept);

// Throws GroundingParseError when no box can be recovered and
// GroundingDegenerateError when the box is empty inside the image.
GroundingResult parse_grounding(std::string_view raw_text, int width, int height,
                                std::string_view query);

std::string_view default_grounding_prompt();
// Substitutes {query}, {width} and {height}.
std::string render_grounding_prompt(std::string_view tmpl, std::string_view query, int width,
                                    int height);

struct PointPrompt {
  std::vector<std::pair<double, double>> points;  // crop pixel coordinates
  friend bool operator==(const PointPrompt&, const PointPrompt&) = default;
};

struct TextPrompt {
  std::string text;
  friend bool operator==(const TextPrompt&, const TextPrompt&) = default;
};

using SegmentPrompt = std::variant<PointPrompt, TextPrompt>;

// Backend roles. Implementations must accept concurrent calls.
class Grounder {
 public:
  virtual ~Grounder() = default;
  virtual std::string ground(const RgbImage& image, const std::string& query) const = 0;
};

class Matcher {
 public:
  virtual ~Matcher() = default;
  virtual SimilarityMap similarity(const RgbImage& crop, const std::string& phrase) const = 0;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  // Any resolution; multi-instance results arrive unioned.
  virtual Mask segment(const RgbImage& crop, const SegmentPrompt& prompt) const = 0;
};

class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::string judge(const RgbImage& overlay, const std::string& prompt) const = 0;
};

struct BackendSet {
  std::shared_ptr<const Grounder> grounder;
  std::shared_ptr<const Matcher> matcher;
  std::shared_ptr<const Segmenter> segmenter;
  std::shared_ptr<const Judge> judge;
};

enum class BackendRole { grounder, matcher, segmenter, judge };

std::string_view to_string(BackendRole role);

struct BackendEndpoint {
  BackendRole role = BackendRole::grounder;
  std::string url;
  double timeout_seconds = 60.0;
  int retry_count = 2;
  friend bool operator==(const BackendEndpoint&, const BackendEndpoint&) = default;
};

// GEOSEG_GROUNDER_URL etc.
std::string_view endpoint_env_var(BackendRole role);

// Throws std::invalid_argument when timeout <= 0 or retry_count < 0.
void validate(const BackendEndpoint& endpoint);

void to_json(nlohmann::json& j, const BackendEndpoint& e);
// Role is not serialized; the caller sets it from the owning key.
void from_json(const nlohmann::json& j, BackendEndpoint& e);

}  // namespace geoseg
