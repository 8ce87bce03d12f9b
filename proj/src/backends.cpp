#include "geoseg/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <regex>
#include <stdexcept>

#include "geoseg/errors.hpp"

namespace geoseg {

namespace {

constexpr std::string_view kFence = "```";

std::vector<std::string_view> fenced_blocks(std::string_view text) {
  std::vector<std::string_view> blocks;
  std::size_t pos = 0;
  while (true) {
    const std::size_t open = text.find(kFence, pos);
    if (open == std::string_view::npos) break;
    std::size_t body = open + kFence.size();
    // skip an info string such as "json"
    while (body < text.size() && std::isalnum(static_cast<unsigned char>(text[body]))) ++body;
    const std::size_t close = text.find(kFence, body);
    if (close == std::string_view::npos) break;
    blocks.push_back(text.substr(body, close - body));
    pos = close + kFence.size();
  }
  return blocks;
}

// End (exclusive) of the brace-balanced span starting at `open`, honouring
// JSON string literals.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (escaped) escaped = false;
      else if (c == '\\') escaped = true;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{') ++depth;
    else if (c == '}' && --depth == 0) return i + 1;
  }
  return std::nullopt;
}

std::optional<nlohmann::json> scan_objects(std::string_view text,
                                           const std::function<bool(const nlohmann::json&)>& accept) {
  for (std::size_t i = text.find('{'); i != std::string_view::npos; i = text.find('{', i + 1)) {
    const auto end = balanced_end(text, i);
    if (!end) continue;
    auto parsed = nlohmann::json::parse(text.substr(i, *end - i), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    if (accept(parsed)) return parsed;
  }
  return std::nullopt;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool is_grounding_object(const nlohmann::json& j) {
  if (!j.contains("bbox_2d") || !j.contains("label")) return false;
  const auto& box = j["bbox_2d"];
  if (!box.is_array() || box.size() != 4) return false;
  if (!std::all_of(box.begin(), box.end(), [](const auto& v) { return v.is_number(); })) return false;
  return j["label"].is_string() && !trim(j["label"].get<std::string>()).empty();
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

std::optional<nlohmann::json> extract_json_object(
    std::string_view text, const std::function<bool(const nlohmann::json&)>& accept) {
  for (const auto block : fenced_blocks(text)) {
    if (auto found = scan_objects(block, accept)) return found;
  }
  return scan_objects(text, accept);
}

GroundingResult parse_grounding(std::string_view raw_text, int width, int height,
                                std::string_view query) {
  if (auto obj = extract_json_object(raw_text, is_grounding_object)) {
    const auto& b = (*obj)["bbox_2d"];
    const BBox box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    return {clamp_box(box, width, height), trim((*obj)["label"].get<std::string>()), false};
  }

  static const std::regex kNumber(R"(-?\d+(?:\.\d+)?)");
  std::vector<double> numbers;
  const std::string text(raw_text);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kNumber);
       it != std::sregex_iterator() && numbers.size() < 4; ++it) {
    // Digits glued to a word ("bbox_2d", "x1") are not coordinates.
    const auto pos = static_cast<std::size_t>(it->position());
    if (pos > 0 && (std::isalnum(static_cast<unsigned char>(text[pos - 1])) || text[pos - 1] == '_')) continue;
    const auto end = pos + static_cast<std::size_t>(it->length());
    if (end < text.size() && (std::isalpha(static_cast<unsigned char>(text[end])) || text[end] == '_')) continue;
    numbers.push_back(std::strtod(it->str().c_str(), nullptr));
  }
  if (numbers.size() < 4) throw GroundingParseError("grounder output contains no bounding box");
  std::string phrase = trim(query);
  if (phrase.empty()) throw GroundingParseError("grounder output has no label and the query is empty");
  return {clamp_box({numbers[0], numbers[1], numbers[2], numbers[3]}, width, height), phrase, true};
}

std::string_view default_grounding_prompt() {
  return "You are given a remote sensing image of {width}x{height} pixels. Locate the single "
         "region that answers the following query: \"{query}\". Respond with ONLY a JSON object "
         "{\"bbox_2d\": [x1, y1, x2, y2], \"label\": \"<concise phrase>\"} where the box is in "
         "absolute pixel coordinates of the {width}x{height} image and the label is a short "
         "referential phrase naming the target.";
}

std::string render_grounding_prompt(std::string_view tmpl, std::string_view query, int width,
                                    int height) {
  std::string out(tmpl);
  replace_all(out, "{width}", std::to_string(width));
  replace_all(out, "{height}", std::to_string(height));
  replace_all(out, "{query}", query);
  return out;
}

std::string_view to_string(BackendRole role) {
  switch (role) {
    case BackendRole::grounder: return "grounder";
    case BackendRole::matcher: return "matcher";
    case BackendRole::segmenter: return "segmenter";
    case BackendRole::judge: return "judge";
  }
  return "grounder";
}

std::string_view endpoint_env_var(BackendRole role) {
  switch (role) {
    case BackendRole::grounder: return "GEOSEG_GROUNDER_URL";
    case BackendRole::matcher: return "GEOSEG_MATCHER_URL";
    case BackendRole::segmenter: return "GEOSEG_SEGMENTER_URL";
    case BackendRole::judge: return "GEOSEG_JUDGE_URL";
  }
  return "GEOSEG_GROUNDER_URL";
}

void validate(const BackendEndpoint& endpoint) {
  if (!(endpoint.timeout_seconds > 0)) throw std::invalid_argument("endpoint timeout must be > 0");
  if (endpoint.retry_count < 0) throw std::invalid_argument("endpoint retry_count must be >= 0");
}

void to_json(nlohmann::json& j, const BackendEndpoint& e) {
  j = {{"url", e.url}, {"timeout", e.timeout_seconds}, {"retries", e.retry_count}};
}

void from_json(const nlohmann::json& j, BackendEndpoint& e) {
  e.url = j.value("url", e.url);
  e.timeout_seconds = j.value("timeout", e.timeout_seconds);
  e.retry_count = j.value("retries", e.retry_count);
}

}  // namespace geoseg
