#include "geoseg/bench.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "geoseg/errors.hpp"
#include "geoseg/parallel.hpp"

namespace geoseg {

namespace {

constexpr std::string_view kJudgeTemplate =
    "You are an expert in remote sensing image analysis. Evaluate the segmentation quality of a "
    "[Class Name] in this remote sensing image.\n"
    "\n"
    "The image shows:\n"
    "- Original image (background)\n"
    "- Green overlay: Ground truth mask (correct segmentation)\n"
    "- Red overlay: Predicted mask (model's segmentation)\n"
    "- Yellow areas: Overlapping regions (where both masks agree)\n"
    "\n"
    "Image dimensions: [Width] x [Height] pixels\n"
    "Class: [Class Name]\n"
    "\n"
    "Evaluate the segmentation from FOUR aspects and provide integer scores from 1 to 5 for each "
    "metric. Use the following scoring standards:\n"
    "\n"
    "1. Faithfulness: Does the predicted mask correctly identify the [Class Name]?\n"
    "- 5 (Excellent): Perfectly correct identification, no confusion with other classes.\n"
    "- 4 (Good): Mostly correct, minor confusion with similar classes.\n"
    "- 3 (Fair): Generally correct but some confusion with related classes.\n"
    "- 2 (Poor): Significant confusion, partially wrong class identification.\n"
    "- 1 (Very Poor): Completely wrong class, major misidentification.\n"
    "\n"
    "2. Localization: Does the predicted mask precisely follow the complex edges?\n"
    "- 5 (Excellent): Boundaries perfectly match ground truth, no rounded corners or overflow.\n"
    "- 4 (Good): Boundaries mostly accurate, minor deviations at complex edges.\n"
    "- 3 (Fair): Generally follows boundaries but noticeable deviations or slight overflow.\n"
    "- 2 (Poor): Significant boundary misalignment, obvious rounded corners or overflow.\n"
    "- 1 (Very Poor): Severe boundary errors, completely misaligned edges.\n"
    "\n"
    "3. Robustness: Can the segmentation resist interference from clouds, shadows, seasonal "
    "changes, or similar textures?\n"
    "- 5 (Excellent): Highly robust, unaffected by environmental variations or similar textures.\n"
    "- 4 (Good): Mostly robust, minor sensitivity to environmental factors.\n"
    "- 3 (Fair): Moderate robustness, some sensitivity to clouds/shadows/similar textures.\n"
    "- 2 (Poor): Low robustness, easily confused by environmental variations.\n"
    "- 1 (Very Poor): Very fragile, severely affected by clouds, shadows, or similar textures.\n"
    "\n"
    "4. Overlap: Pixel-level IoU (Intersection over Union) between predicted and ground truth "
    "masks.\n"
    "- 5 (Excellent): IoU ≥ 0.8, excellent pixel-level overlap.\n"
    "- 4 (Good): IoU 0.6–0.8, good overlap with minor differences.\n"
    "- 3 (Fair): IoU 0.4–0.6, moderate overlap, noticeable differences.\n"
    "- 2 (Poor): IoU 0.2–0.4, poor overlap, significant differences.\n"
    "- 1 (Very Poor): IoU < 0.2, very poor overlap, minimal agreement.\n"
    "\n"
    "(Note: The actual calculated IoU is provided to the model as a reference).\n"
    "Calculated IoU: [IoU]\n"
    "\n"
    "Respond with ONLY a valid JSON object in this format (use integer scores 1-5):\n";

constexpr const char* kJudgeKeys[] = {"faithfulness", "localization", "robustness", "overlap"};

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

int coerce_score(const nlohmann::json& v, const char* key) {
  double value = 0;
  if (v.is_number()) {
    value = v.get<double>();
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    char* end = nullptr;
    value = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') throw JudgeParseError(std::string(key) + ": not a number");
  } else {
    throw JudgeParseError(std::string(key) + ": not a number");
  }
  if (value != std::floor(value)) throw JudgeParseError(std::string(key) + ": not an integer");
  if (value < 1 || value > 5) throw JudgeParseError(std::string(key) + ": score outside 1..5");
  return static_cast<int>(value);
}

std::optional<double> mean_of(const std::vector<JudgeSampleResult>& samples, int JudgeScores::*field) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : samples) {
    if (!s.scores) continue;
    sum += (*s.scores).*field;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

Mask load_prediction(const std::filesystem::path& path, const Mask& gt, std::vector<std::string>& flags) {
  if (!std::filesystem::exists(path)) {
    flags.push_back("missing_prediction");
    return Mask(gt.width(), gt.height());
  }
  try {
    Mask pred = read_mask_png(path);
    if (!pred.same_shape(gt)) {
      flags.push_back("dimension_mismatch");
      return Mask(gt.width(), gt.height());
    }
    return pred;
  } catch (const std::exception&) {
    flags.push_back("unreadable_prediction");
    return Mask(gt.width(), gt.height());
  }
}

std::string format_mean(const std::optional<double>& v) {
  if (!v) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", *v);
  return buf;
}

template <typename T>
nlohmann::json nullable(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace

Evaluation evaluate(const Manifest& manifest, const std::filesystem::path& predictions_dir,
                    const EvaluateOptions& options) {
  Evaluation ev;
  ev.reports.resize(manifest.samples.size());
  std::vector<std::string> failures(manifest.samples.size());
  parallel_for(manifest.samples.size(), options.workers, [&](std::size_t i) {
    const BenchmarkSample& s = manifest.samples[i];
    try {
      const Mask gt = read_mask_png(manifest.resolve(s.mask));
      std::vector<std::string> flags;
      const Mask pred = load_prediction(predictions_dir / (s.id + ".png"), gt, flags);
      MetricsReport r = score_sample(pred, gt, options.theta);
      r.sample_id = s.id;
      r.scenario = s.scenario;
      r.level = s.level;
      r.flags = std::move(flags);
      if (auto it = options.branches.find(s.id); it != options.branches.end()) r.branch = it->second;
      ev.reports[i] = std::move(r);
    } catch (const std::exception& e) {
      failures[i] = s.id + ": " + e.what();
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) throw LoadError("ground truth unreadable for " + f);
  }
  ev.summary = aggregate(ev.reports, options.mode);
  return ev;
}

void write_evaluation(const Evaluation& evaluation, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "metrics.jsonl", std::ios::trunc);
    for (const auto& r : evaluation.reports) out << nlohmann::json(r).dump() << '\n';
  }
  {
    std::ofstream out(out_dir / "aggregate.json", std::ios::trunc);
    out << nlohmann::json(evaluation.summary).dump(2) << '\n';
  }
  {
    std::ofstream out(out_dir / "metrics_table.txt", std::ios::trunc);
    out << render_metrics_table(evaluation.summary);
  }
}

std::string build_judge_prompt(std::string_view class_name, int width, int height, double reference_iou) {
  std::string prompt(kJudgeTemplate);
  char iou[32];
  std::snprintf(iou, sizeof iou, "%.4f", reference_iou);
  replace_all(prompt, "[Width]", std::to_string(width));
  replace_all(prompt, "[Height]", std::to_string(height));
  replace_all(prompt, "[IoU]", iou);
  replace_all(prompt, "[Class Name]", class_name);
  prompt += kJudgeResponseFormat;
  return prompt;
}

JudgeScores parse_judge_response(std::string_view raw_text) {
  const auto obj = extract_json_object(raw_text, [](const nlohmann::json& j) {
    for (const char* key : kJudgeKeys) {
      if (!j.contains(key)) return false;
    }
    return true;
  });
  if (!obj) throw JudgeParseError("judge reply has no JSON object with all four scores");
  return {coerce_score((*obj)["faithfulness"], "faithfulness"),
          coerce_score((*obj)["localization"], "localization"),
          coerce_score((*obj)["robustness"], "robustness"), coerce_score((*obj)["overlap"], "overlap")};
}

JudgeSummary summarize_judge(const std::vector<JudgeSampleResult>& samples) {
  JudgeSummary s;
  s.total = samples.size();
  for (const auto& r : samples) {
    if (r.scores) ++s.coverage;
  }
  s.faithfulness = mean_of(samples, &JudgeScores::faithfulness);
  s.localization = mean_of(samples, &JudgeScores::localization);
  s.robustness = mean_of(samples, &JudgeScores::robustness);
  s.overlap = mean_of(samples, &JudgeScores::overlap);
  return s;
}

JudgeRun judge_run(const Manifest& manifest, const std::filesystem::path& predictions_dir, const Judge& judge,
                   const JudgeOptions& options) {
  if (options.overlay_dir) std::filesystem::create_directories(*options.overlay_dir);
  JudgeRun run;
  run.samples.resize(manifest.samples.size());
  parallel_for(manifest.samples.size(), options.workers, [&](std::size_t i) {
    const BenchmarkSample& s = manifest.samples[i];
    JudgeSampleResult& r = run.samples[i];
    r.sample_id = s.id;
    try {
      const RgbImage image = read_rgb_png(manifest.resolve(s.image));
      const Mask gt = read_mask_png(manifest.resolve(s.mask));
      std::vector<std::string> flags;
      const Mask pred = load_prediction(predictions_dir / (s.id + ".png"), gt, flags);
      r.iou = pixel_metrics(confusion(pred, gt)).iou;
      const RgbImage overlay = render_overlay(image, gt, pred, options.alpha);
      if (options.overlay_dir) write_rgb_png(*options.overlay_dir / (s.id + ".png"), overlay);
      const std::string prompt =
          build_judge_prompt(s.class_name.value_or(s.query), gt.width(), gt.height(), r.iou);
      r.scores = parse_judge_response(judge.judge(overlay, prompt));
    } catch (const std::exception& e) {
      r.error = e.what();
    }
  });
  run.summary = summarize_judge(run.samples);
  return run;
}

std::string render_judge_table(const JudgeSummary& s) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-8s %-8s %-8s %-8s %-10s %s\n", "F.", "L.", "R.", "Overlap*", "Coverage",
                "");
  out << line;
  const std::string coverage = std::to_string(s.coverage) + "/" + std::to_string(s.total);
  std::snprintf(line, sizeof line, "%-8s %-8s %-8s %-8s %-10s\n", format_mean(s.faithfulness).c_str(),
                format_mean(s.localization).c_str(), format_mean(s.robustness).c_str(),
                format_mean(s.overlap).c_str(), coverage.c_str());
  out << line;
  out << "* auxiliary dimension\n";
  return out.str();
}

void to_json(nlohmann::json& j, const JudgeSampleResult& r) {
  j = {{"sample_id", r.sample_id}, {"iou", r.iou}, {"error", nullable(r.error)}};
  if (r.scores) {
    j["scores"] = {{"faithfulness", r.scores->faithfulness},
                   {"localization", r.scores->localization},
                   {"robustness", r.scores->robustness},
                   {"overlap", r.scores->overlap}};
  } else {
    j["scores"] = nullptr;
  }
}

void to_json(nlohmann::json& j, const JudgeSummary& s) {
  j = {{"total", s.total},
       {"coverage", s.coverage},
       {"faithfulness", nullable(s.faithfulness)},
       {"localization", nullable(s.localization)},
       {"robustness", nullable(s.robustness)},
       {"overlap", nullable(s.overlap)}};
}

}  // namespace geoseg
