#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <sys/wait.h>

#include "geoseg/pipeline.hpp"
#include "support/bench_fixture.hpp"

using namespace geoseg;
namespace gt = geoseg::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the CLI with stderr folded into stdout.
Outcome cli(const std::string& args) {
  const std::string cmd = std::string("'") + GEOSEG_CLI + "' " + args + " 2>&1";
  Outcome o;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return o;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) o.out.append(buf, n);
  const int status = ::pclose(pipe);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Cli, UsageErrors) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("run --no-such-flag").code, 2);
  EXPECT_EQ(cli("frobnicate").code, 2);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, RunWritesMaskAndTrace) {
  gt::TempDir dir("cli");
  gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  const auto o = cli("run --image " + q(dir / "bench" / "images" / "harbor.png") + " --query 'the blue lake' --out " +
                     q(dir / "m.png") + " --stub-fixture " + q(gt::scenes_fixture()));
  ASSERT_EQ(o.code, 0) << o.out;
  const Mask m = read_mask_png(dir / "m.png");
  EXPECT_EQ(mask_area(m), 1600u);
  const auto trace = nlohmann::json::parse(slurp(dir / "m.trace.json")).get<PipelineTrace>();
  EXPECT_EQ(trace.branch, FusionBranch::intersection);
  EXPECT_DOUBLE_EQ(trace.config["refine"]["alpha"].get<double>(), 0.2);
}

TEST(Cli, RunErrorBranchExitsOne) {
  gt::TempDir dir("cli");
  gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  const auto o = cli("run --image " + q(dir / "bench" / "images" / "junction.png") + " --query 'the bus' --out " +
                     q(dir / "m.png") + " --stub-fixture " + q(gt::scenes_fixture()));
  EXPECT_EQ(o.code, 1) << o.out;
  EXPECT_EQ(mask_area(read_mask_png(dir / "m.png")), 0u);
}

TEST(Cli, FlagsOverrideConfigFile) {
  gt::TempDir dir("cli");
  gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  std::ofstream(dir / "c.json") << R"({"refine":{"alpha":0.3,"beta":0.05}})";
  const auto o = cli("run -c " + q(dir / "c.json") + " --alpha 0.25 --image " +
                     q(dir / "bench" / "images" / "harbor.png") + " --query 'the blue lake' --out " + q(dir / "m.png") +
                     " --trace " + q(dir / "t.json") + " --stub-fixture " + q(gt::scenes_fixture()));
  ASSERT_EQ(o.code, 0) << o.out;
  const auto trace = nlohmann::json::parse(slurp(dir / "t.json"));
  EXPECT_DOUBLE_EQ(trace["config"]["refine"]["alpha"].get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(trace["config"]["refine"]["beta"].get<double>(), 0.05);
}

TEST(Cli, InvalidParameterExitsTwo) {
  gt::TempDir dir("cli");
  gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  const auto o = cli("run --image " + q(dir / "bench" / "images" / "harbor.png") + " --query 'the blue lake' --out " +
                     q(dir / "m.png") + " --gamma 2 --stub-fixture " + q(gt::scenes_fixture()));
  EXPECT_EQ(o.code, 2) << o.out;
  EXPECT_FALSE(fs::exists(dir / "m.png"));
}

TEST(Cli, Calibrate) {
  const auto o = cli("calibrate --pairs " + q(gt::fixture_dir() / "pairs_degenerate.jsonl"));
  ASSERT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("alpha=0.20 beta=0.10"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("edge,bin_center,count"), std::string::npos) << o.out;
  EXPECT_EQ(cli("calibrate --pairs /nonexistent.jsonl").code, 2);  // missing input is a usage error
  gt::TempDir dir("cli");
  std::ofstream(dir / "bad.jsonl") << "{\"pred\":[1,2]}\n";
  EXPECT_EQ(cli("calibrate --pairs " + q(dir / "bad.jsonl")).code, 1);
}

TEST(Cli, BenchEvalJudge) {
  gt::TempDir dir("cli");
  gt::materialize_bench(gt::scenes_fixture(), dir / "bench");
  const std::string manifest = q(dir / "bench" / "manifest.jsonl");
  const std::string stub = " --stub-fixture " + q(gt::scenes_fixture());

  const auto b = cli("bench -m " + manifest + " -o " + q(dir / "run") + stub + " -j 2");
  EXPECT_EQ(b.code, 1) << b.out;  // the scripted grounder failure
  EXPECT_NE(b.out.find("s07"), std::string::npos) << b.out;
  EXPECT_TRUE(fs::exists(dir / "run" / "traces.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "run" / "predictions" / "s01.png"));
  EXPECT_TRUE(fs::exists(dir / "run" / "metrics_table.txt"));

  // Strict composition fails on a 10-sample manifest.
  const auto strict = cli("bench --strict -m " + manifest + " -o " + q(dir / "strict") + stub);
  EXPECT_EQ(strict.code, 1);
  EXPECT_FALSE(fs::exists(dir / "strict" / "traces.jsonl"));

  const auto e = cli("eval -m " + manifest + " -p " + q(dir / "run" / "predictions") + " -o " + q(dir / "eval") +
                     " --traces " + q(dir / "run" / "traces.jsonl"));
  EXPECT_EQ(e.code, 0) << e.out;
  const auto agg = nlohmann::json::parse(slurp(dir / "eval" / "aggregate.json"));
  EXPECT_EQ(agg["overall"]["count"], 10);
  const std::string first = slurp(dir / "eval" / "metrics.jsonl").substr(0, slurp(dir / "eval" / "metrics.jsonl").find('\n'));
  EXPECT_EQ(nlohmann::json::parse(first)["branch"], "intersection");

  const auto j = cli("judge -m " + manifest + " -p " + q(dir / "run" / "predictions") + " -o " + q(dir / "judge") +
                     " --overlays " + q(dir / "ov") + stub);
  EXPECT_EQ(j.code, 1) << j.out;  // two samples have no scores
  EXPECT_TRUE(fs::exists(dir / "judge" / "judge.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "judge" / "judge_summary.json"));
  EXPECT_NE(slurp(dir / "judge" / "judge_table.txt").find("8/10"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "ov" / "s01.png"));
}
