#include "geoseg/wire.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <openssl/evp.h>
#include <openssl/sha.h>

#include "geoseg/errors.hpp"

namespace geoseg {

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64: length is not a multiple of 4");
  std::vector<std::uint8_t> out(3 * (text.size() / 4));
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("base64: invalid character");
  std::size_t padding = 0;
  if (!text.empty() && text.back() == '=') ++padding;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++padding;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(bytes.data(), bytes.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * SHA256_DIGEST_LENGTH);
  for (unsigned char c : digest) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

std::string sha256_hex(std::string_view text) {
  return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace wire {

namespace {

const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ProtocolError(std::string("missing field \"") + key + "\"");
  }
  return j[key];
}

std::string string_field(const nlohmann::json& j, const char* key) {
  const auto& v = field(j, key);
  if (!v.is_string()) throw ProtocolError(std::string("field \"") + key + "\" must be a string");
  return v.get<std::string>();
}

std::string image_b64(const RgbImage& image) { return base64_encode(encode_rgb_png(image)); }

RgbImage image_field(const nlohmann::json& j) {
  const auto bytes = base64_decode(string_field(j, "image_png_b64"));
  try {
    return decode_rgb_png(bytes);
  } catch (const CodecError& e) {
    throw ProtocolError(std::string("image_png_b64: ") + e.what());
  }
}

}  // namespace

nlohmann::json encode_prompt(const SegmentPrompt& prompt) {
  if (const auto* pts = std::get_if<PointPrompt>(&prompt)) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [x, y] : pts->points) points.push_back({x, y});
    return {{"type", "points"}, {"points", points}};
  }
  return {{"type", "text"}, {"text", std::get<TextPrompt>(prompt).text}};
}

SegmentPrompt decode_prompt(const nlohmann::json& j) {
  const std::string type = string_field(j, "type");
  if (type == "text") return TextPrompt{string_field(j, "text")};
  if (type != "points") throw ProtocolError("unknown prompt type \"" + type + "\"");
  const auto& points = field(j, "points");
  if (!points.is_array()) throw ProtocolError("prompt points must be an array");
  PointPrompt out;
  for (const auto& p : points) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ProtocolError("prompt point must be [x,y]");
    }
    out.points.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

nlohmann::json encode(const GroundRequest& r) {
  return {{"image_png_b64", image_b64(r.image)}, {"query", r.query}};
}

nlohmann::json encode(const SimilarityRequest& r) {
  return {{"image_png_b64", image_b64(r.image)}, {"phrase", r.phrase}};
}

nlohmann::json encode(const SegmentRequest& r) {
  return {{"image_png_b64", image_b64(r.image)}, {"prompt", encode_prompt(r.prompt)}};
}

nlohmann::json encode(const JudgeRequest& r) {
  return {{"image_png_b64", image_b64(r.image)}, {"prompt", r.prompt}};
}

GroundRequest decode_ground_request(const nlohmann::json& j) {
  return {image_field(j), string_field(j, "query")};
}

SimilarityRequest decode_similarity_request(const nlohmann::json& j) {
  return {image_field(j), string_field(j, "phrase")};
}

SegmentRequest decode_segment_request(const nlohmann::json& j) {
  return {image_field(j), decode_prompt(field(j, "prompt"))};
}

JudgeRequest decode_judge_request(const nlohmann::json& j) {
  return {image_field(j), string_field(j, "prompt")};
}

nlohmann::json encode_text_response(std::string_view text) { return {{"text", text}}; }

nlohmann::json encode_similarity_response(const SimilarityMap& map) {
  return {{"width", map.width}, {"height", map.height}, {"values", map.values}};
}

nlohmann::json encode_segment_response(const Mask& mask) {
  return {{"mask_rle", rle_encode(mask)}};
}

nlohmann::json encode_error(std::string_view message) { return {{"error", message}}; }

std::string decode_text_response(const nlohmann::json& j) { return string_field(j, "text"); }

SimilarityMap decode_similarity_response(const nlohmann::json& j) {
  SimilarityMap map;
  try {
    map.width = field(j, "width").get<int>();
    map.height = field(j, "height").get<int>();
    map.values = field(j, "values").get<std::vector<float>>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("similarity response: ") + e.what());
  }
  try {
    validate(map);
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(e.what());
  }
  return map;
}

Mask decode_segment_response(const nlohmann::json& j) {
  try {
    return rle_decode(field(j, "mask_rle").get<RleMask>());
  } catch (const CodecError& e) {
    throw ProtocolError(std::string("mask_rle: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ProtocolError(std::string("mask_rle: ") + e.what());
  }
}

}  // namespace wire

HttpJsonClient::HttpJsonClient(BackendEndpoint endpoint) : endpoint_(std::move(endpoint)) {
  validate(endpoint_);
  const std::string& url = endpoint_.url;
  const auto scheme = url.find("://");
  if (url.empty() || scheme == std::string::npos) {
    throw std::invalid_argument(std::string(to_string(endpoint_.role)) + " endpoint URL \"" + url +
                                "\" must look like http://host:port");
  }
  const auto path = url.find('/', scheme + 3);
  host_ = url.substr(0, path);
  if (path != std::string::npos) {
    prefix_ = url.substr(path);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
  }
}

nlohmann::json HttpJsonClient::post(std::string_view path, const nlohmann::json& body) const {
  const std::string payload = body.dump();
  const std::string target = prefix_ + std::string(path);
  const auto seconds = static_cast<time_t>(endpoint_.timeout_seconds);
  const auto micros = static_cast<time_t>(
      std::llround((endpoint_.timeout_seconds - static_cast<double>(seconds)) * 1e6));

  std::string last_error;
  for (int attempt = 0; attempt <= endpoint_.retry_count; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    httplib::Client client(host_);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);
    auto res = client.Post(target, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    auto reply = nlohmann::json::parse(res->body, nullptr, false);
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      if (!reply.is_discarded() && reply.contains("error")) last_error += ": " + reply["error"].dump();
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      std::string msg = std::string(to_string(endpoint_.role)) + " replied HTTP " + std::to_string(res->status);
      if (!reply.is_discarded() && reply.contains("error")) msg += ": " + reply["error"].dump();
      throw ProtocolError(msg);
    }
    if (reply.is_discarded() || !reply.is_object()) {
      throw ProtocolError(std::string(to_string(endpoint_.role)) + " replied with a non-JSON body");
    }
    return reply;
  }
  throw BackendUnavailableError(std::string(to_string(endpoint_.role)) + " at " + endpoint_.url +
                                " unavailable after " + std::to_string(endpoint_.retry_count + 1) +
                                " attempt(s): " + last_error);
}

std::string HttpGrounder::ground(const RgbImage& image, const std::string& query) const {
  return wire::decode_text_response(client_.post(wire::kGroundPath, wire::encode(wire::GroundRequest{image, query})));
}

SimilarityMap HttpMatcher::similarity(const RgbImage& crop, const std::string& phrase) const {
  return wire::decode_similarity_response(
      client_.post(wire::kSimilarityPath, wire::encode(wire::SimilarityRequest{crop, phrase})));
}

Mask HttpSegmenter::segment(const RgbImage& crop, const SegmentPrompt& prompt) const {
  return wire::decode_segment_response(
      client_.post(wire::kSegmentPath, wire::encode(wire::SegmentRequest{crop, prompt})));
}

std::string HttpJudge::judge(const RgbImage& overlay, const std::string& prompt) const {
  return wire::decode_text_response(client_.post(wire::kJudgePath, wire::encode(wire::JudgeRequest{overlay, prompt})));
}

}  // namespace geoseg
