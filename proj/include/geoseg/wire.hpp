#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "geoseg/backends.hpp"

namespace geoseg {

std::string base64_encode(std::span<const std::uint8_t> bytes);
// Throws ProtocolError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

namespace wire {

inline constexpr std::string_view kGroundPath = "/v1/ground";
inline constexpr std::string_view kSimilarityPath = "/v1/similarity";
inline constexpr std::string_view kSegmentPath = "/v1/segment";
inline constexpr std::string_view kJudgePath = "/v1/judge";
inline constexpr std::string_view kPipelinePath = "/v1/pipeline";

struct GroundRequest {
  RgbImage image;
  std::string query;
  friend bool operator==(const GroundRequest&, const GroundRequest&) = default;
};

struct SimilarityRequest {
  RgbImage image;
  std::string phrase;
  friend bool operator==(const SimilarityRequest&, const SimilarityRequest&) = default;
};

struct SegmentRequest {
  RgbImage image;
  SegmentPrompt prompt;
  friend bool operator==(const SegmentRequest&, const SegmentRequest&) = default;
};

struct JudgeRequest {
  RgbImage image;
  std::string prompt;
  friend bool operator==(const JudgeRequest&, const JudgeRequest&) = default;
};

// Request bodies. Images travel as base64 PNG.
nlohmann::json encode(const GroundRequest& r);
nlohmann::json encode(const SimilarityRequest& r);
nlohmann::json encode(const SegmentRequest& r);
nlohmann::json encode(const JudgeRequest& r);

// Decoders throw ProtocolError on a malformed body.
GroundRequest decode_ground_request(const nlohmann::json& j);
SimilarityRequest decode_similarity_request(const nlohmann::json& j);
SegmentRequest decode_segment_request(const nlohmann::json& j);
JudgeRequest decode_judge_request(const nlohmann::json& j);

// Response bodies: {"text"}, {"width","height","values"}, {"mask_rle"}.
nlohmann::json encode_text_response(std::string_view text);
nlohmann::json encode_similarity_response(const SimilarityMap& map);
nlohmann::json encode_segment_response(const Mask& mask);
nlohmann::json encode_error(std::string_view message);

std::string decode_text_response(const nlohmann::json& j);
SimilarityMap decode_similarity_response(const nlohmann::json& j);
Mask decode_segment_response(const nlohmann::json& j);

nlohmann::json encode_prompt(const SegmentPrompt& prompt);
SegmentPrompt decode_prompt(const nlohmann::json& j);

}  // namespace wire

// POSTs JSON bodies to one endpoint, retrying transport failures and 5xx
// replies. Throws BackendUnavailableError after the last attempt and
// ProtocolError for 4xx or malformed replies.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(BackendEndpoint endpoint);
  nlohmann::json post(std::string_view path, const nlohmann::json& body) const;
  const BackendEndpoint& endpoint() const { return endpoint_; }

 private:
  BackendEndpoint endpoint_;
  std::string host_;  // scheme://host:port
  std::string prefix_;
};

class HttpGrounder final : public Grounder {
 public:
  explicit HttpGrounder(BackendEndpoint endpoint) : client_(std::move(endpoint)) {}
  std::string ground(const RgbImage& image, const std::string& query) const override;

 private:
  HttpJsonClient client_;
};

class HttpMatcher final : public Matcher {
 public:
  explicit HttpMatcher(BackendEndpoint endpoint) : client_(std::move(endpoint)) {}
  SimilarityMap similarity(const RgbImage& crop, const std::string& phrase) const override;

 private:
  HttpJsonClient client_;
};

class HttpSegmenter final : public Segmenter {
 public:
  explicit HttpSegmenter(BackendEndpoint endpoint) : client_(std::move(endpoint)) {}
  Mask segment(const RgbImage& crop, const SegmentPrompt& prompt) const override;

 private:
  HttpJsonClient client_;
};

class HttpJudge final : public Judge {
 public:
  explicit HttpJudge(BackendEndpoint endpoint) : client_(std::move(endpoint)) {}
  std::string judge(const RgbImage& overlay, const std::string& prompt) const override;

 private:
  HttpJsonClient client_;
};

}  // namespace geoseg
