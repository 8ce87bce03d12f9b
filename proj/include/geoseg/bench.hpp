#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "geoseg/backends.hpp"
#include "geoseg/manifest.hpp"
#include "geoseg/metrics.hpp"

namespace geoseg {

struct EvaluateOptions {
  std::optional<double> theta;  // unset: per-sample default from the image diagonal
  AggregationMode mode = AggregationMode::macro;
  int workers = 0;
  std::map<std::string, std::string> branches;  // sample id -> fusion branch, from traces
};

struct Evaluation {
  std::vector<MetricsReport> reports;  // manifest order
  MetricsSummary summary;
};

// Missing, unreadable or mis-sized predictions are scored as empty masks
// and flagged in the report.
Evaluation evaluate(const Manifest& manifest, const std::filesystem::path& predictions_dir,
                    const EvaluateOptions& options = {});

// metrics.jsonl, aggregate.json, metrics_table.txt
void write_evaluation(const Evaluation& evaluation, const std::filesystem::path& out_dir);

struct JudgeScores {
  int faithfulness = 0;
  int localization = 0;
  int robustness = 0;
  int overlap = 0;
  friend bool operator==(const JudgeScores&, const JudgeScores&) = default;
};

inline constexpr std::string_view kJudgeResponseFormat =
    R"({"faithfulness": <1-5>, "localization": <1-5>, "robustness": <1-5>, "overlap": <1-5>})";

// Rubric prompt with the class name, image size and computed IoU filled in.
std::string build_judge_prompt(std::string_view class_name, int width, int height, double reference_iou);

// Throws JudgeParseError for a missing key or a score outside 1..5.
JudgeScores parse_judge_response(std::string_view raw_text);

struct JudgeSampleResult {
  std::string sample_id;
  double iou = 0;
  std::optional<JudgeScores> scores;  // absent when the judge failed or replied badly
  std::optional<std::string> error;
};

struct JudgeSummary {
  std::size_t total = 0;
  std::size_t coverage = 0;  // samples with scores
  // Means over covered samples; overlap is auxiliary to the three headline dimensions.
  std::optional<double> faithfulness;
  std::optional<double> localization;
  std::optional<double> robustness;
  std::optional<double> overlap;
};

struct JudgeRun {
  std::vector<JudgeSampleResult> samples;
  JudgeSummary summary;
};

struct JudgeOptions {
  double alpha = kDefaultOverlayAlpha;
  std::optional<std::filesystem::path> overlay_dir;  // persist overlays for audit
  int workers = 0;
};

JudgeSummary summarize_judge(const std::vector<JudgeSampleResult>& samples);

JudgeRun judge_run(const Manifest& manifest, const std::filesystem::path& predictions_dir, const Judge& judge,
                   const JudgeOptions& options = {});

std::string render_judge_table(const JudgeSummary& summary);

void to_json(nlohmann::json& j, const JudgeSampleResult& r);
void to_json(nlohmann::json& j, const JudgeSummary& s);

}  // namespace geoseg
