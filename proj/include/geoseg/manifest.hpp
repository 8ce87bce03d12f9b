#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace geoseg {

inline constexpr std::array<std::string_view, 4> kScenarios = {"urban", "rural", "traffic", "nature"};

// One benchmark triplet (image, query, mask) plus its tags. Paths are kept
// as written in the manifest; resolve them with Manifest::resolve.
struct BenchmarkSample {
  std::string id;
  std::string image;
  std::string query;
  std::string mask;
  std::optional<std::string> scenario;
  std::optional<int> level;
  std::optional<std::string> class_name;
  friend bool operator==(const BenchmarkSample&, const BenchmarkSample&) = default;
};

struct CompositionStats {
  std::size_t total = 0;
  std::map<std::string, std::size_t> by_scenario;
  std::map<int, std::size_t> by_level;
};

struct Manifest {
  std::vector<BenchmarkSample> samples;
  CompositionStats stats;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
};

struct ManifestOptions {
  bool strict = false;       // assert the reference benchmark composition
  bool check_files = true;   // referenced image/mask files must exist
};

// JSON-lines {"id","image","query","mask","scenario","level","class_name"}.
// Throws LoadError (with the line number) for malformed input and
// CompositionError when strict composition does not hold.
Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options = {});
void write_manifest(const std::filesystem::path& path, const std::vector<BenchmarkSample>& samples);

CompositionStats composition(const std::vector<BenchmarkSample>& samples);

// Level shares L1:L2:L3, each count must equal round(share * total).
bool level_ratio_matches(const CompositionStats& stats, const std::array<double, 3>& shares);

// 810 samples: urban 330, rural 160, traffic 240, nature 80; levels 60/30/10.
inline constexpr std::size_t kBenchTotal = 810;
inline constexpr std::array<std::pair<std::string_view, std::size_t>, 4> kBenchScenarioCounts = {
    {{"urban", 330}, {"rural", 160}, {"traffic", 240}, {"nature", 80}}};
inline constexpr std::array<double, 3> kBenchLevelShares = {0.6, 0.3, 0.1};

void check_bench_composition(const CompositionStats& stats);

void to_json(nlohmann::json& j, const BenchmarkSample& s);
void from_json(const nlohmann::json& j, BenchmarkSample& s);
void to_json(nlohmann::json& j, const CompositionStats& s);

}  // namespace geoseg
