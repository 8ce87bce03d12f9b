#include "geoseg/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "geoseg/errors.hpp"

namespace geoseg {

namespace {

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

template <typename T>
nlohmann::json nullable(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

void validate_sample(const BenchmarkSample& s) {
  if (s.id.empty()) throw std::invalid_argument("empty id");
  if (s.query.empty()) throw std::invalid_argument("empty query");
  if (s.scenario &&
      std::find(kScenarios.begin(), kScenarios.end(), *s.scenario) == kScenarios.end()) {
    throw std::invalid_argument("unknown scenario \"" + *s.scenario + "\"");
  }
  if (s.level && (*s.level < 1 || *s.level > 3)) {
    throw std::invalid_argument("level must be 1, 2 or 3");
  }
}

}  // namespace

std::filesystem::path Manifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

void to_json(nlohmann::json& j, const BenchmarkSample& s) {
  j = {{"id", s.id},
       {"image", s.image},
       {"query", s.query},
       {"mask", s.mask},
       {"scenario", nullable(s.scenario)},
       {"level", nullable(s.level)},
       {"class_name", nullable(s.class_name)}};
}

void from_json(const nlohmann::json& j, BenchmarkSample& s) {
  s.id = j.at("id").get<std::string>();
  s.image = j.at("image").get<std::string>();
  s.query = j.at("query").get<std::string>();
  s.mask = j.at("mask").get<std::string>();
  s.scenario = optional_field<std::string>(j, "scenario");
  s.level = optional_field<int>(j, "level");
  s.class_name = optional_field<std::string>(j, "class_name");
}

void to_json(nlohmann::json& j, const CompositionStats& s) {
  j = {{"total", s.total}, {"by_scenario", s.by_scenario}, {"by_level", nlohmann::json::object()}};
  for (const auto& [level, n] : s.by_level) j["by_level"][std::to_string(level)] = n;
}

Manifest load_manifest(const std::filesystem::path& path, const ManifestOptions& options) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());
  Manifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno) + ": ";
    BenchmarkSample s;
    try {
      s = nlohmann::json::parse(line).get<BenchmarkSample>();
      validate_sample(s);
    } catch (const std::exception& e) {
      throw LoadError(where + e.what());
    }
    if (options.check_files) {
      for (const auto* p : {&s.image, &s.mask}) {
        if (!std::filesystem::exists(m.resolve(*p))) throw LoadError(where + "missing file " + *p);
      }
    }
    m.samples.push_back(std::move(s));
  }
  if (m.samples.empty()) throw LoadError("manifest " + path.string() + " has no samples");
  m.stats = composition(m.samples);
  if (options.strict) check_bench_composition(m.stats);
  return m;
}

void write_manifest(const std::filesystem::path& path, const std::vector<BenchmarkSample>& samples) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest " + path.string());
  for (const auto& s : samples) out << nlohmann::json(s).dump() << '\n';
}

CompositionStats composition(const std::vector<BenchmarkSample>& samples) {
  CompositionStats stats;
  stats.total = samples.size();
  for (const auto& s : samples) {
    if (s.scenario) ++stats.by_scenario[*s.scenario];
    if (s.level) ++stats.by_level[*s.level];
  }
  return stats;
}

bool level_ratio_matches(const CompositionStats& stats, const std::array<double, 3>& shares) {
  std::size_t tagged = 0;
  for (int level = 1; level <= 3; ++level) {
    const auto it = stats.by_level.find(level);
    const std::size_t n = it == stats.by_level.end() ? 0 : it->second;
    tagged += n;
    const auto expected = std::llround(shares[static_cast<std::size_t>(level - 1)] * stats.total);
    if (static_cast<long long>(n) != expected) return false;
  }
  return tagged == stats.total;
}

void check_bench_composition(const CompositionStats& stats) {
  if (stats.total != kBenchTotal) {
    throw CompositionError("expected " + std::to_string(kBenchTotal) + " samples, found " +
                           std::to_string(stats.total));
  }
  for (const auto& [name, expected] : kBenchScenarioCounts) {
    const auto it = stats.by_scenario.find(std::string(name));
    const std::size_t n = it == stats.by_scenario.end() ? 0 : it->second;
    if (n != expected) {
      throw CompositionError("scenario " + std::string(name) + ": expected " + std::to_string(expected) +
                             ", found " + std::to_string(n));
    }
  }
  if (!level_ratio_matches(stats, kBenchLevelShares)) {
    throw CompositionError("level composition is not 60% L1 / 30% L2 / 10% L3");
  }
}

}  // namespace geoseg
