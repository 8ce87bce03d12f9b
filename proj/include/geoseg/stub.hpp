#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "geoseg/backends.hpp"

namespace geoseg {

// A scripted reply: either text, or a simulated transport failure.
struct ScriptedReply {
  std::optional<std::string> text;
  std::optional<std::string> error;
};

struct FixtureRegion {
  std::string label;
  PixelBox rect;  // exclusive max edges, image pixels
  Rgb color;      // unique across the fixture; identifies the region in any crop
  bool matchable = true;     // matcher emits a bump for it
  bool point_visible = true; // point prompts on it return it
  bool text_visible = true;  // text prompts naming it return it
};

// Synthetic scene: a flat background with regions painted in order.
struct FixtureScene {
  std::string name;
  int width = 0;
  int height = 0;
  Rgb background{32, 32, 32};
  std::vector<FixtureRegion> regions;
  std::map<std::string, ScriptedReply> grounder;  // keyed by query
};

struct Fixture {
  std::vector<FixtureScene> scenes;
  std::optional<ScriptedReply> judge_default;
  std::map<std::string, ScriptedReply> judge_by_class;
};

Fixture parse_fixture(const nlohmann::json& j);
Fixture load_fixture(const std::filesystem::path& path);

RgbImage render_scene_image(const FixtureScene& scene);
// Union of the rendered pixels of regions labelled exactly `label`.
Mask scene_label_mask(const FixtureScene& scene, std::string_view label);

// SHA-256 over the little-endian u32 width, u32 height and the RGB bytes.
std::string image_digest(const RgbImage& image);

// Case-insensitive "label contains text" with a non-empty trimmed text.
bool label_matches(std::string_view label, std::string_view text);

// Stub similarity maps use one cell per 4x4 crop pixels.
inline constexpr int kStubMapCell = 4;

// Deterministic in-process backends answering from a fixture.
//  - grounder: scripted text per (image digest, query); unknown -> StubMissError.
//  - matcher: a Gaussian bump (sigma = region extent / 4) at the centre of
//    every matchable region whose label matches the phrase, evaluated at
//    cell centres; no match gives an all-zero map.
//  - segmenter: points select the region whose colour lies under them;
//    text selects every text-visible region whose label matches.
//  - judge: scripted text keyed by the "Class:" line of the prompt.
class ScriptedStub final : public Grounder, public Matcher, public Segmenter, public Judge {
 public:
  explicit ScriptedStub(Fixture fixture);

  std::string ground(const RgbImage& image, const std::string& query) const override;
  SimilarityMap similarity(const RgbImage& crop, const std::string& phrase) const override;
  Mask segment(const RgbImage& crop, const SegmentPrompt& prompt) const override;
  std::string judge(const RgbImage& overlay, const std::string& prompt) const override;

  const Fixture& fixture() const { return fixture_; }
  std::size_t call_count() const { return calls_.load(); }
  void reset_call_count() { calls_.store(0); }

 private:
  const FixtureRegion* region_for(Rgb color) const;

  Fixture fixture_;
  std::unordered_map<std::string, const FixtureScene*> by_digest_;
  std::unordered_map<std::uint32_t, const FixtureRegion*> by_color_;
  mutable std::atomic<std::size_t> calls_{0};
};

BackendSet make_stub_backends(std::shared_ptr<const ScriptedStub> stub);

}  // namespace geoseg
