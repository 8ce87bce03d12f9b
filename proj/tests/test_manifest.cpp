#include <gtest/gtest.h>

#include <fstream>

#include "geoseg/errors.hpp"
#include "geoseg/manifest.hpp"
#include "support/bench_fixture.hpp"

using namespace geoseg;
using geoseg::testing::TempDir;

namespace {

std::vector<BenchmarkSample> synthetic(std::size_t urban, std::size_t rural, std::size_t traffic, std::size_t nature,
                                       std::size_t l1, std::size_t l2, std::size_t l3) {
  std::vector<BenchmarkSample> out;
  const std::pair<const char*, std::size_t> scen[] = {{"urban", urban}, {"rural", rural}, {"traffic", traffic}, {"nature", nature}};
  std::vector<int> levels;
  levels.insert(levels.end(), l1, 1);
  levels.insert(levels.end(), l2, 2);
  levels.insert(levels.end(), l3, 3);
  std::size_t i = 0;
  for (const auto& [name, n] : scen) {
    for (std::size_t k = 0; k < n; ++k, ++i) {
      BenchmarkSample s{"s" + std::to_string(i), "img.png", "q", "m.png", std::string(name), std::nullopt, "c"};
      if (i < levels.size()) s.level = levels[i];
      out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST(Manifest, StrictBenchComposition) {
  const auto stats = composition(synthetic(330, 160, 240, 80, 486, 243, 81));
  EXPECT_EQ(stats.total, 810u);
  EXPECT_NO_THROW(check_bench_composition(stats));
  EXPECT_EQ(stats.by_scenario.at("urban"), 330u);
  EXPECT_EQ(stats.by_scenario.at("nature"), 80u);
}

TEST(Manifest, StrictRejectsOffByOne) {
  EXPECT_THROW(check_bench_composition(composition(synthetic(331, 159, 240, 80, 486, 243, 81))), CompositionError);
  EXPECT_THROW(check_bench_composition(composition(synthetic(330, 160, 240, 80, 487, 242, 81))), CompositionError);
  EXPECT_THROW(check_bench_composition(composition(synthetic(330, 160, 240, 79, 486, 243, 80))), CompositionError);
}

TEST(Manifest, TenSampleRatio) {
  const auto stats = composition(synthetic(4, 3, 2, 1, 6, 3, 1));
  EXPECT_TRUE(level_ratio_matches(stats, kBenchLevelShares));
  EXPECT_FALSE(level_ratio_matches(composition(synthetic(4, 3, 2, 1, 5, 4, 1)), kBenchLevelShares));
}

TEST(Manifest, EmptyFileIsLoadError) {
  TempDir dir("manifest");
  std::ofstream(dir / "m.jsonl") << "\n  \n";
  EXPECT_THROW(load_manifest(dir / "m.jsonl"), LoadError);
  EXPECT_THROW(load_manifest(dir / "absent.jsonl"), LoadError);
}

TEST(Manifest, MalformedLineCarriesLineNumber) {
  TempDir dir("manifest");
  std::ofstream(dir / "m.jsonl") << R"({"id":"a","image":"i.png","query":"q","mask":"m.png"})" << "\n"
                                 << R"({"id":"b","image":"i.png","query":"q","mask":"m.png","level":7})" << "\n";
  try {
    load_manifest(dir / "m.jsonl", {.strict = false, .check_files = false});
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
  }
}

TEST(Manifest, UnknownScenarioAndMissingFiles) {
  TempDir dir("manifest");
  std::ofstream(dir / "a.jsonl") << R"({"id":"a","image":"i.png","query":"q","mask":"m.png","scenario":"desert"})" << "\n";
  EXPECT_THROW(load_manifest(dir / "a.jsonl", {.strict = false, .check_files = false}), LoadError);
  std::ofstream(dir / "b.jsonl") << R"({"id":"a","image":"i.png","query":"q","mask":"m.png"})" << "\n";
  EXPECT_THROW(load_manifest(dir / "b.jsonl"), LoadError);
}

TEST(Manifest, WriteLoadRoundTrip) {
  TempDir dir("manifest");
  std::vector<BenchmarkSample> samples{
      {"a", "x.png", "the blue lake", "xm.png", "urban", 1, "lake"},
      {"b", "y.png", "a road \"quoted\"", "ym.png", std::nullopt, std::nullopt, std::nullopt},
  };
  write_manifest(dir / "m.jsonl", samples);
  const auto m = load_manifest(dir / "m.jsonl", {.strict = false, .check_files = false});
  EXPECT_EQ(m.samples, samples);
  EXPECT_EQ(m.resolve("x.png"), dir.path() / "x.png");
  EXPECT_EQ(m.resolve("/abs/x.png"), std::filesystem::path("/abs/x.png"));
}

TEST(Manifest, StrictModeOnLoad) {
  TempDir dir("manifest");
  const auto bench = geoseg::testing::materialize_bench(geoseg::testing::scenes_fixture(), dir.path());
  EXPECT_EQ(bench.samples.size(), 10u);
  EXPECT_TRUE(level_ratio_matches(bench.stats, kBenchLevelShares));
  EXPECT_THROW(load_manifest(dir / "manifest.jsonl", {.strict = true}), CompositionError);
}
