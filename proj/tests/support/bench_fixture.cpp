#include "bench_fixture.hpp"

#include <atomic>
#include <fstream>
#include <stdexcept>

#include <unistd.h>

#include <json.hpp>

namespace geoseg::testing {

fs::path fixture_dir() { return fs::path(GEOSEG_TEST_FIXTURES); }
fs::path scenes_fixture() { return fixture_dir() / "scenes.json"; }

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> serial{0};
  path_ = fs::temp_directory_path() /
          ("geoseg-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(serial++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<FixtureSample> load_fixture_samples(const fs::path& fixture_path) {
  std::ifstream in(fixture_path);
  const auto j = nlohmann::json::parse(in);
  std::vector<FixtureSample> out;
  for (const auto& s : j.at("samples")) {
    out.push_back({s.at("id"), s.at("scene"), s.at("query"), s.at("gt").get<std::vector<std::string>>(),
                   s.at("class_name"), s.at("scenario"), s.at("level"), s.at("expect")});
  }
  return out;
}

const FixtureScene& find_scene(const Fixture& fixture, const std::string& name) {
  for (const auto& s : fixture.scenes) {
    if (s.name == name) return s;
  }
  throw std::out_of_range("no fixture scene " + name);
}

Mask ground_truth(const FixtureScene& scene, const std::vector<std::string>& labels) {
  Mask out(scene.width, scene.height);
  for (const auto& label : labels) {
    const Mask m = scene_label_mask(scene, label);
    for (int y = 0; y < m.height(); ++y) {
      for (int x = 0; x < m.width(); ++x) {
        if (m.at(x, y)) out.set(x, y, true);
      }
    }
  }
  return out;
}

Manifest materialize_bench(const fs::path& fixture_path, const fs::path& dir) {
  const Fixture fixture = load_fixture(fixture_path);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  std::vector<BenchmarkSample> samples;
  for (const auto& s : load_fixture_samples(fixture_path)) {
    const FixtureScene& scene = find_scene(fixture, s.scene);
    const std::string image = "images/" + s.scene + ".png";
    if (!fs::exists(dir / image)) write_rgb_png(dir / image, render_scene_image(scene));
    const std::string mask = "masks/" + s.id + ".png";
    write_mask_png(dir / mask, ground_truth(scene, s.gt_labels));
    samples.push_back({s.id, image, s.query, mask, s.scenario, s.level, s.class_name});
  }
  write_manifest(dir / "manifest.jsonl", samples);
  return load_manifest(dir / "manifest.jsonl");
}

PipelineConfig stub_config(const fs::path& fixture_path, int workers) {
  PipelineConfig c;
  c.stub_fixture = fixture_path;
  c.workers = workers;
  return c;
}

}  // namespace geoseg::testing
