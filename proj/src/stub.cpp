#include "geoseg/stub.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>

#include "geoseg/errors.hpp"
#include "geoseg/wire.hpp"

namespace geoseg {

namespace {

std::uint32_t pack(Rgb c) {
  return (std::uint32_t{c.r} << 16) | (std::uint32_t{c.g} << 8) | std::uint32_t{c.b};
}

Rgb parse_rgb(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw LoadError("fixture colour must be [r,g,b]");
  const auto channel = [](const nlohmann::json& v) {
    const int c = v.get<int>();
    if (c < 0 || c > 255) throw LoadError("fixture colour channel outside 0..255");
    return static_cast<std::uint8_t>(c);
  };
  return {channel(j[0]), channel(j[1]), channel(j[2])};
}

ScriptedReply parse_reply(const nlohmann::json& j) {
  if (j.is_string()) return {j.get<std::string>(), std::nullopt};
  if (j.is_object() && j.contains("error")) return {std::nullopt, j["error"].get<std::string>()};
  throw LoadError("scripted reply must be a string or {\"error\": ...}");
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::string reply_text(const ScriptedReply& reply, std::string_view who) {
  if (reply.error) throw BackendUnavailableError(std::string(who) + " (scripted): " + *reply.error);
  return *reply.text;
}

// Pixel extent of a region inside a crop.
struct Extent {
  int min_x = 0;
  int min_y = 0;
  int max_x = -1;
  int max_y = -1;
  bool any() const { return max_x >= min_x; }
};

}  // namespace

Fixture parse_fixture(const nlohmann::json& j) {
  Fixture f;
  try {
    std::set<std::uint32_t> colors;
    for (const auto& js : j.at("scenes")) {
      FixtureScene scene;
      scene.name = js.at("name").get<std::string>();
      scene.width = js.at("width").get<int>();
      scene.height = js.at("height").get<int>();
      if (scene.width < 1 || scene.height < 1) throw LoadError("scene " + scene.name + ": bad canvas");
      if (js.contains("background")) scene.background = parse_rgb(js["background"]);
      std::set<std::string> labels;
      for (const auto& jr : js.value("regions", nlohmann::json::array())) {
        FixtureRegion r;
        r.label = jr.at("label").get<std::string>();
        r.rect = jr.at("rect").get<PixelBox>();
        r.color = parse_rgb(jr.at("color"));
        r.matchable = jr.value("matchable", true);
        r.point_visible = jr.value("point_visible", true);
        r.text_visible = jr.value("text_visible", true);
        if (r.rect.width() <= 0 || r.rect.height() <= 0 || r.rect.x1 < 0 || r.rect.y1 < 0 ||
            r.rect.x2 > scene.width || r.rect.y2 > scene.height) {
          throw LoadError("scene " + scene.name + ": region " + r.label + " outside the canvas");
        }
        if (!labels.insert(r.label).second) {
          throw LoadError("scene " + scene.name + ": duplicate label " + r.label);
        }
        if (!colors.insert(pack(r.color)).second) {
          throw LoadError("scene " + scene.name + ": region colour reused: " + r.label);
        }
        scene.regions.push_back(std::move(r));
      }
      // Bound to a local: items() on a temporary would dangle.
      const nlohmann::json grounder = js.value("grounder", nlohmann::json::object());
      for (const auto& [query, reply] : grounder.items()) {
        scene.grounder[query] = parse_reply(reply);
      }
      f.scenes.push_back(std::move(scene));
    }
    for (const auto& scene : f.scenes) {
      if (colors.count(pack(scene.background))) {
        throw LoadError("scene " + scene.name + ": background colour collides with a region");
      }
    }
    if (j.contains("judge")) {
      const auto& jj = j["judge"];
      if (jj.contains("default")) f.judge_default = parse_reply(jj["default"]);
      const nlohmann::json by_class = jj.value("by_class", nlohmann::json::object());
      for (const auto& [cls, reply] : by_class.items()) {
        f.judge_by_class[cls] = parse_reply(reply);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(std::string("fixture: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw LoadError(std::string("fixture: ") + e.what());
  }
  return f;
}

Fixture load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open fixture " + path.string());
  auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw LoadError("fixture " + path.string() + " is not valid JSON");
  return parse_fixture(j);
}

RgbImage render_scene_image(const FixtureScene& scene) {
  RgbImage image(scene.width, scene.height, scene.background);
  for (const auto& r : scene.regions) {
    for (int y = r.rect.y1; y < r.rect.y2; ++y) {
      for (int x = r.rect.x1; x < r.rect.x2; ++x) image.set(x, y, r.color);
    }
  }
  return image;
}

Mask scene_label_mask(const FixtureScene& scene, std::string_view label) {
  const RgbImage image = render_scene_image(scene);
  std::set<std::uint32_t> wanted;
  for (const auto& r : scene.regions) {
    if (r.label == label) wanted.insert(pack(r.color));
  }
  Mask m(scene.width, scene.height);
  for (int y = 0; y < scene.height; ++y) {
    for (int x = 0; x < scene.width; ++x) {
      if (wanted.count(pack(image.at(x, y)))) m.set(x, y, true);
    }
  }
  return m;
}

std::string image_digest(const RgbImage& image) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(8 + image.data().size());
  for (std::uint32_t v : {static_cast<std::uint32_t>(image.width()), static_cast<std::uint32_t>(image.height())}) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  bytes.insert(bytes.end(), image.data().begin(), image.data().end());
  return sha256_hex(bytes);
}

bool label_matches(std::string_view label, std::string_view text) {
  const std::string needle = lower(trim_copy(text));
  return !needle.empty() && lower(label).find(needle) != std::string::npos;
}

ScriptedStub::ScriptedStub(Fixture fixture) : fixture_(std::move(fixture)) {
  for (const auto& scene : fixture_.scenes) {
    const auto digest = image_digest(render_scene_image(scene));
    if (!by_digest_.emplace(digest, &scene).second) {
      throw LoadError("fixture scenes " + scene.name + " and " + by_digest_[digest]->name +
                      " render identical images");
    }
    for (const auto& r : scene.regions) by_color_.emplace(pack(r.color), &r);
  }
}

const FixtureRegion* ScriptedStub::region_for(Rgb color) const {
  const auto it = by_color_.find(pack(color));
  return it == by_color_.end() ? nullptr : it->second;
}

std::string ScriptedStub::ground(const RgbImage& image, const std::string& query) const {
  ++calls_;
  const auto scene = by_digest_.find(image_digest(image));
  if (scene == by_digest_.end()) throw StubMissError("stub grounder: unknown image digest");
  const auto reply = scene->second->grounder.find(query);
  if (reply == scene->second->grounder.end()) {
    throw StubMissError("stub grounder: scene " + scene->second->name + " has no script for query \"" +
                        query + "\"");
  }
  return reply_text(reply->second, "grounder");
}

SimilarityMap ScriptedStub::similarity(const RgbImage& crop, const std::string& phrase) const {
  ++calls_;
  const int cw = crop.width();
  const int ch = crop.height();
  std::map<const FixtureRegion*, Extent> extents;
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      const FixtureRegion* r = region_for(crop.at(x, y));
      if (!r || !r->matchable || !label_matches(r->label, phrase)) continue;
      auto [it, fresh] = extents.try_emplace(r, Extent{x, y, x, y});
      Extent& e = it->second;
      if (!fresh) {
        e.min_x = std::min(e.min_x, x);
        e.min_y = std::min(e.min_y, y);
        e.max_x = std::max(e.max_x, x);
        e.max_y = std::max(e.max_y, y);
      }
    }
  }

  SimilarityMap map;
  map.width = (cw + kStubMapCell - 1) / kStubMapCell;
  map.height = (ch + kStubMapCell - 1) / kStubMapCell;
  map.values.assign(static_cast<std::size_t>(map.width) * map.height, 0.0f);
  // Stable order regardless of pointer values.
  std::vector<Extent> bumps;
  for (const auto& scene : fixture_.scenes) {
    for (const auto& r : scene.regions) {
      if (auto it = extents.find(&r); it != extents.end()) bumps.push_back(it->second);
    }
  }
  for (int i = 0; i < map.height; ++i) {
    const double py = (i + 0.5) * ch / map.height;
    for (int j = 0; j < map.width; ++j) {
      const double px = (j + 0.5) * cw / map.width;
      double best = 0.0;
      for (const auto& e : bumps) {
        const double w = e.max_x - e.min_x + 1;
        const double h = e.max_y - e.min_y + 1;
        const double dx = (px - (e.min_x + w / 2.0)) / (w / 4.0);
        const double dy = (py - (e.min_y + h / 2.0)) / (h / 4.0);
        best = std::max(best, std::exp(-0.5 * (dx * dx + dy * dy)));
      }
      map.values[static_cast<std::size_t>(i) * map.width + j] = static_cast<float>(best);
    }
  }
  return map;
}

Mask ScriptedStub::segment(const RgbImage& crop, const SegmentPrompt& prompt) const {
  ++calls_;
  std::set<std::uint32_t> selected;
  if (const auto* pts = std::get_if<PointPrompt>(&prompt)) {
    for (const auto& [x, y] : pts->points) {
      const int px = std::clamp(static_cast<int>(std::floor(x)), 0, crop.width() - 1);
      const int py = std::clamp(static_cast<int>(std::floor(y)), 0, crop.height() - 1);
      const Rgb c = crop.at(px, py);
      const FixtureRegion* r = region_for(c);
      if (r && r->point_visible) selected.insert(pack(c));
    }
  } else {
    const auto& text = std::get<TextPrompt>(prompt).text;
    for (const auto& [packed, r] : by_color_) {
      if (r->text_visible && label_matches(r->label, text)) selected.insert(packed);
    }
  }
  Mask m(crop.width(), crop.height());
  if (selected.empty()) return m;
  for (int y = 0; y < crop.height(); ++y) {
    for (int x = 0; x < crop.width(); ++x) {
      if (selected.count(pack(crop.at(x, y)))) m.set(x, y, true);
    }
  }
  return m;
}

std::string ScriptedStub::judge(const RgbImage& /*overlay*/, const std::string& prompt) const {
  ++calls_;
  static constexpr std::string_view kClassTag = "\nClass: ";
  const auto pos = prompt.find(kClassTag);
  if (pos != std::string::npos) {
    const auto start = pos + kClassTag.size();
    const auto cls = prompt.substr(start, prompt.find('\n', start) - start);
    if (const auto it = fixture_.judge_by_class.find(cls); it != fixture_.judge_by_class.end()) {
      return reply_text(it->second, "judge");
    }
  }
  if (fixture_.judge_default) return reply_text(*fixture_.judge_default, "judge");
  throw StubMissError("stub judge: no script for this prompt");
}

BackendSet make_stub_backends(std::shared_ptr<const ScriptedStub> stub) {
  return {stub, stub, stub, stub};
}

}  // namespace geoseg
