#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include "geoseg/bench.hpp"
#include "geoseg/errors.hpp"
#include "geoseg/stub.hpp"
#include "support/bench_fixture.hpp"

using namespace geoseg;
namespace gt = geoseg::testing;
namespace fs = std::filesystem;

namespace {

std::size_t count_of(const std::string& hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

// Copies each ground truth mask into <dir>/<id>.png.
void predictions_from_gt(const Manifest& m, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& s : m.samples) fs::copy_file(m.resolve(s.mask), dir / (s.id + ".png"));
}

void write_predictions(const Manifest& m, const fs::path& dir, const std::function<Mask(const Mask&)>& f) {
  fs::create_directories(dir);
  for (const auto& s : m.samples) write_mask_png(dir / (s.id + ".png"), f(read_mask_png(m.resolve(s.mask))));
}

}  // namespace

TEST(JudgePrompt, FilledTemplate) {
  const std::string p = build_judge_prompt("lake", 810, 810, 0.8123);
  EXPECT_NE(p.find("Evaluate the segmentation quality of a lake"), std::string::npos);
  EXPECT_NE(p.find("Image dimensions: 810 x 810 pixels"), std::string::npos);
  EXPECT_NE(p.find("\nClass: lake\n"), std::string::npos);
  for (const char* h : {"1. Faithfulness:", "2. Localization:", "3. Robustness:", "4. Overlap:"})
    EXPECT_EQ(count_of(p, h), 1u) << h;
  EXPECT_EQ(count_of(p, kJudgeResponseFormat), 1u);
  EXPECT_NE(p.find("Calculated IoU: 0.8123"), std::string::npos);
  EXPECT_EQ(p.find("[Class Name]"), std::string::npos);
  EXPECT_EQ(p.find("[Width]"), std::string::npos);
  EXPECT_EQ(p.find("[IoU]"), std::string::npos);
  EXPECT_TRUE(p.ends_with(kJudgeResponseFormat));
}

TEST(JudgeParse, PlainFencedAndStringScores) {
  EXPECT_EQ(parse_judge_response(R"({"faithfulness": 4, "localization": 3, "robustness": 5, "overlap": 2})"),
            (JudgeScores{4, 3, 5, 2}));
  EXPECT_EQ(parse_judge_response("Here:\n```json\n{\"faithfulness\": 1, \"localization\": 2, \"robustness\": 3, "
                                 "\"overlap\": 4}\n```"),
            (JudgeScores{1, 2, 3, 4}));
  EXPECT_EQ(parse_judge_response(R"({"faithfulness": "5", "localization": 5.0, "robustness": 5, "overlap": 5})"),
            (JudgeScores{5, 5, 5, 5}));
}

TEST(JudgeParse, Rejections) {
  EXPECT_THROW(parse_judge_response(R"({"faithfulness": 4, "localization": 3, "robustness": 5})"), JudgeParseError);
  EXPECT_THROW(parse_judge_response(R"({"faithfulness": 6, "localization": 3, "robustness": 5, "overlap": 2})"),
               JudgeParseError);
  EXPECT_THROW(parse_judge_response(R"({"faithfulness": 0, "localization": 3, "robustness": 5, "overlap": 2})"),
               JudgeParseError);
  EXPECT_THROW(parse_judge_response(R"({"faithfulness": 3.5, "localization": 3, "robustness": 5, "overlap": 2})"),
               JudgeParseError);
  EXPECT_THROW(parse_judge_response("no scores"), JudgeParseError);
}

TEST(JudgeSummary, MeansOverCoveredSamples) {
  std::vector<JudgeSampleResult> rs(3);
  rs[0].scores = JudgeScores{4, 3, 4, 3};
  rs[1].scores = JudgeScores{2, 3, 2, 3};
  rs[2].error = "judge offline";
  const auto s = summarize_judge(rs);
  EXPECT_EQ(s.total, 3u);
  EXPECT_EQ(s.coverage, 2u);
  EXPECT_DOUBLE_EQ(*s.faithfulness, 3.0);
  EXPECT_DOUBLE_EQ(*s.localization, 3.0);
  EXPECT_DOUBLE_EQ(*s.robustness, 3.0);
  EXPECT_DOUBLE_EQ(*s.overlap, 3.0);
  const std::string table = render_judge_table(s);
  EXPECT_NE(table.find("2/3"), std::string::npos);
  EXPECT_NE(table.find("auxiliary"), std::string::npos);

  const auto none = summarize_judge(std::vector<JudgeSampleResult>(2));
  EXPECT_EQ(none.coverage, 0u);
  EXPECT_FALSE(none.faithfulness);
}

TEST(JudgeRun, FixtureCoverageAndFailures) {
  gt::TempDir dir("judge");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  predictions_from_gt(m, dir / "pred");
  const ScriptedStub stub(load_fixture(gt::scenes_fixture()));
  const auto run = judge_run(m, dir / "pred", stub, {.overlay_dir = dir / "overlays", .workers = 2});
  ASSERT_EQ(run.samples.size(), 10u);
  EXPECT_EQ(run.summary.total, 10u);
  EXPECT_EQ(run.summary.coverage, 8u);  // road replies badly, bus judge is down
  EXPECT_DOUBLE_EQ(*run.summary.faithfulness, 33.0 / 8);
  EXPECT_DOUBLE_EQ(*run.summary.localization, 34.0 / 8);
  for (const auto& r : run.samples) {
    EXPECT_DOUBLE_EQ(r.iou, 1.0) << r.sample_id;
    EXPECT_EQ(r.scores.has_value(), !r.error.has_value());
    EXPECT_TRUE(fs::exists(dir / "overlays" / (r.sample_id + ".png")));
  }
  EXPECT_TRUE(run.samples[6].error);  // s07 bus
  EXPECT_TRUE(run.samples[7].error);  // s08 road
}

TEST(Evaluate, PerfectPredictions) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  predictions_from_gt(m, dir / "pred");
  const auto e = evaluate(m, dir / "pred");
  ASSERT_EQ(e.reports.size(), 10u);
  for (const auto& r : e.reports) {
    EXPECT_DOUBLE_EQ(r.values.iou, 1.0);
    EXPECT_DOUBLE_EQ(r.values.boundary_f, 1.0);
    EXPECT_TRUE(r.flags.empty());
  }
  EXPECT_EQ(e.summary.overall.count, 10u);
  EXPECT_DOUBLE_EQ(e.summary.overall.values.iou, 1.0);
  EXPECT_EQ(e.summary.by_scenario.at("urban").count, 2u);
  EXPECT_EQ(e.summary.by_level.at(1).count, 6u);

  write_evaluation(e, dir / "report");
  for (const char* f : {"metrics.jsonl", "aggregate.json", "metrics_table.txt"}) EXPECT_TRUE(fs::exists(dir / "report" / f));
}

TEST(Evaluate, EmptyPredictionsScoreZero) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  write_predictions(m, dir / "pred", [](const Mask& g) { return Mask(g.width(), g.height()); });
  const auto e = evaluate(m, dir / "pred");
  for (const auto& r : e.reports) {
    EXPECT_DOUBLE_EQ(r.values.iou, 0.0);
    EXPECT_DOUBLE_EQ(r.values.recall, 0.0);
  }
}

TEST(Evaluate, HalfCorrectMacro) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  fs::create_directories(dir / "pred");
  for (std::size_t i = 0; i < m.samples.size(); ++i) {
    const Mask g = read_mask_png(m.resolve(m.samples[i].mask));
    write_mask_png(dir / "pred" / (m.samples[i].id + ".png"), i % 2 ? Mask(g.width(), g.height()) : g);
  }
  EXPECT_DOUBLE_EQ(evaluate(m, dir / "pred").summary.overall.values.iou, 0.5);
}

TEST(Evaluate, MissingAndMisSizedPredictionsAreFlagged) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  predictions_from_gt(m, dir / "pred");
  fs::remove(dir / "pred" / "s02.png");
  write_mask_png(dir / "pred" / "s03.png", Mask(5, 5));
  std::ofstream(dir / "pred" / "s04.png", std::ios::trunc) << "garbage";
  const auto e = evaluate(m, dir / "pred", {.theta = {}, .mode = AggregationMode::micro, .workers = 0, .branches = {}});
  EXPECT_EQ(e.reports[1].flags, std::vector<std::string>{"missing_prediction"});
  EXPECT_EQ(e.reports[2].flags, std::vector<std::string>{"dimension_mismatch"});
  EXPECT_EQ(e.reports[3].flags, std::vector<std::string>{"unreadable_prediction"});
  EXPECT_DOUBLE_EQ(e.reports[1].values.iou, 0.0);
  EXPECT_EQ(e.summary.mode, AggregationMode::micro);
  EXPECT_LT(e.summary.overall.values.iou, 1.0);
}

TEST(Evaluate, BranchesFromTracesAreAttached) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  predictions_from_gt(m, dir / "pred");
  const auto e = evaluate(m, dir / "pred", {.theta = {}, .mode = AggregationMode::macro, .workers = 0, .branches = {{"s01", "intersection"}}});
  EXPECT_EQ(e.reports[0].branch, "intersection");
  EXPECT_FALSE(e.reports[1].branch);
}

TEST(Evaluate, UnreadableGroundTruthIsFatal) {
  gt::TempDir dir("eval");
  const auto m = gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  predictions_from_gt(m, dir / "pred");
  std::ofstream(m.resolve(m.samples[0].mask), std::ios::trunc) << "garbage";
  EXPECT_THROW(evaluate(m, dir / "pred"), LoadError);
}
