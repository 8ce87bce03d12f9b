#include "geoseg/pipeline.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <future>
#include <mutex>

#include "geoseg/errors.hpp"
#include "geoseg/parallel.hpp"
#include "geoseg/stub.hpp"
#include "geoseg/wire.hpp"

namespace geoseg {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

template <typename T>
nlohmann::json nullable(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

struct RouteRun {
  RouteOutput output;
  KeypointSet keypoints;
  int radius = 0;
  double ms = 0;
};

RouteRun run_point_route(const RgbImage& crop, const std::string& phrase, const PixelBox& roi, int width,
                         int height, const PipelineConfig& config, const BackendSet& backends) {
  const auto start = Clock::now();
  RouteRun run;
  run.output.route = Route::point;
  const SimilarityMap map = backends.matcher->similarity(crop, phrase);
  validate(map);
  run.radius = config.keypoints.radius.value_or(default_nms_radius(map.width, map.height));
  run.keypoints = extract_keypoints(map, crop.width(), crop.height(), config.keypoints.k,
                                    config.keypoints.tau, run.radius);
  run.output.keypoint_count = run.keypoints.size();
  if (run.keypoints.empty()) {
    run.output.mask = Mask(width, height);
  } else {
    PointPrompt prompt;
    for (const auto& kp : run.keypoints) prompt.points.emplace_back(kp.x, kp.y);
    run.output.mask = paste_mask(backends.segmenter->segment(crop, prompt), roi, width, height);
  }
  run.ms = elapsed_ms(start);
  return run;
}

RouteRun run_text_route(const RgbImage& crop, const std::string& phrase, const PixelBox& roi, int width,
                        int height, const BackendSet& backends) {
  const auto start = Clock::now();
  RouteRun run;
  run.output.route = Route::text;
  run.output.mask = paste_mask(backends.segmenter->segment(crop, TextPrompt{phrase}), roi, width, height);
  run.ms = elapsed_ms(start);
  return run;
}

void require_backends(const BackendSet& b) {
  if (!b.grounder) throw BackendUnavailableError("no grounder backend configured");
  if (!b.matcher) throw BackendUnavailableError("no matcher backend configured");
  if (!b.segmenter) throw BackendUnavailableError("no segmenter backend configured");
}

nlohmann::json endpoint_json(const BackendEndpoint& e) { return e; }

std::filesystem::path cache_path(const PipelineConfig& config, const RgbImage& image,
                                 const std::string& query) {
  const std::string key = sha256_hex(image_digest(image) + "\n" + query + "\n" + config_digest(config));
  return *config.cache_dir / (key + ".json");
}

}  // namespace

void to_json(nlohmann::json& j, const PipelineConfig& c) {
  j = {{"refine", c.refine},
       {"keypoints", c.keypoints},
       {"fusion", c.fusion},
       {"endpoints",
        {{"grounder", endpoint_json(c.grounder)},
         {"matcher", endpoint_json(c.matcher)},
         {"segmenter", endpoint_json(c.segmenter)},
         {"judge", endpoint_json(c.judge)}}},
       {"fallback",
        {{"full_image_on_grounding_failure", c.fallback.full_image_on_grounding_failure},
         {"grounder_parse_retries", c.fallback.grounder_parse_retries}}},
       {"grounding_prompt", nullable(c.grounding_prompt)},
       {"cache_dir", c.cache_dir ? nlohmann::json(c.cache_dir->string()) : nlohmann::json(nullptr)},
       {"stub_fixture", c.stub_fixture ? nlohmann::json(c.stub_fixture->string()) : nlohmann::json(nullptr)},
       {"workers", c.workers},
       {"record_timings", c.record_timings}};
}

void from_json(const nlohmann::json& j, PipelineConfig& c) {
  if (j.contains("refine")) c.refine = j["refine"].get<RefineParams>();
  if (j.contains("keypoints")) c.keypoints = j["keypoints"].get<KeypointParams>();
  if (j.contains("fusion")) c.fusion = j["fusion"].get<FusionParams>();
  if (j.contains("endpoints")) {
    const auto& e = j["endpoints"];
    for (auto* ep : {&c.grounder, &c.matcher, &c.segmenter, &c.judge}) {
      const std::string key(to_string(ep->role));
      if (e.contains(key)) {
        const BackendRole role = ep->role;
        *ep = e[key].get<BackendEndpoint>();
        ep->role = role;
      }
    }
  }
  if (j.contains("fallback")) {
    const auto& f = j["fallback"];
    c.fallback.full_image_on_grounding_failure =
        f.value("full_image_on_grounding_failure", c.fallback.full_image_on_grounding_failure);
    c.fallback.grounder_parse_retries = f.value("grounder_parse_retries", c.fallback.grounder_parse_retries);
  }
  if (j.contains("grounding_prompt")) c.grounding_prompt = optional_field<std::string>(j, "grounding_prompt");
  if (j.contains("cache_dir")) {
    const auto v = optional_field<std::string>(j, "cache_dir");
    c.cache_dir = v ? std::optional<std::filesystem::path>(*v) : std::nullopt;
  }
  if (j.contains("stub_fixture")) {
    const auto v = optional_field<std::string>(j, "stub_fixture");
    c.stub_fixture = v ? std::optional<std::filesystem::path>(*v) : std::nullopt;
  }
  c.workers = j.value("workers", c.workers);
  c.record_timings = j.value("record_timings", c.record_timings);
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open config " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw LoadError("config " + path.string() + " is not a JSON object");
  PipelineConfig c;
  try {
    c = j.get<PipelineConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw LoadError("config " + path.string() + ": " + e.what());
  }
  // Relative paths in a config file are relative to the file.
  const auto base = path.parent_path();
  if (c.stub_fixture && c.stub_fixture->is_relative()) c.stub_fixture = base / *c.stub_fixture;
  if (c.cache_dir && c.cache_dir->is_relative()) c.cache_dir = base / *c.cache_dir;
  return c;
}

void apply_endpoint_env(PipelineConfig& config) {
  for (auto* ep : {&config.grounder, &config.matcher, &config.segmenter, &config.judge}) {
    if (!ep->url.empty()) continue;
    if (const char* v = std::getenv(std::string(endpoint_env_var(ep->role)).c_str())) ep->url = v;
  }
}

void validate(const PipelineConfig& c) {
  if (c.refine.alpha < 0 || c.refine.beta < 0) throw std::invalid_argument("refine margins must be >= 0");
  if (c.keypoints.k < 1) throw std::invalid_argument("keypoints.k must be >= 1");
  if (!(c.keypoints.tau >= 0 && c.keypoints.tau <= 1)) throw std::invalid_argument("keypoints.tau outside [0,1]");
  if (c.keypoints.radius && *c.keypoints.radius < 1) throw std::invalid_argument("keypoints.radius must be >= 1");
  if (!(c.fusion.gamma >= 0 && c.fusion.gamma <= 1)) throw std::invalid_argument("fusion.gamma outside [0,1]");
  if (c.fallback.grounder_parse_retries < 0) throw std::invalid_argument("grounder_parse_retries must be >= 0");
  if (c.workers < 0) throw std::invalid_argument("workers must be >= 0");
  for (const auto* ep : {&c.grounder, &c.matcher, &c.segmenter, &c.judge}) validate(*ep);
}

nlohmann::json config_echo(const PipelineConfig& config) {
  nlohmann::json j = config;
  j.erase("cache_dir");
  j.erase("workers");
  j.erase("record_timings");
  return j;
}

std::string config_digest(const PipelineConfig& config) { return sha256_hex(config_echo(config).dump()); }

void to_json(nlohmann::json& j, const PipelineTrace& t) {
  j = {{"sample_id", t.sample_id},
       {"query", t.query},
       {"grounder_responses", t.grounder_responses},
       {"box", nullable(t.box)},
       {"refined_box", nullable(t.refined_box)},
       {"roi", nullable(t.roi)},
       {"phrase", t.phrase},
       {"grounding_fallback", t.grounding_fallback},
       {"nms_radius", nullable(t.nms_radius)},
       {"keypoints", t.keypoints},
       {"point_mask", nullable(t.point_mask)},
       {"text_mask", nullable(t.text_mask)},
       {"point_valid", t.point_valid},
       {"text_valid", t.text_valid},
       {"branch", to_string(t.branch)},
       {"mask_area", t.mask_area},
       {"errors", t.errors},
       {"config", t.config}};
  if (t.timings) {
    j["timings_ms"] = {{"grounding", t.timings->grounding_ms},
                       {"route_a", t.timings->route_a_ms},
                       {"route_b", t.timings->route_b_ms},
                       {"total", t.timings->total_ms}};
  }
}

void from_json(const nlohmann::json& j, PipelineTrace& t) {
  t.sample_id = j.at("sample_id").get<std::string>();
  t.query = j.at("query").get<std::string>();
  t.grounder_responses = j.at("grounder_responses").get<std::vector<std::string>>();
  t.box = optional_field<BBox>(j, "box");
  t.refined_box = optional_field<BBox>(j, "refined_box");
  t.roi = optional_field<PixelBox>(j, "roi");
  t.phrase = j.at("phrase").get<std::string>();
  t.grounding_fallback = j.at("grounding_fallback").get<bool>();
  t.nms_radius = optional_field<int>(j, "nms_radius");
  t.keypoints = j.at("keypoints").get<KeypointSet>();
  t.point_mask = optional_field<RleMask>(j, "point_mask");
  t.text_mask = optional_field<RleMask>(j, "text_mask");
  t.point_valid = j.at("point_valid").get<bool>();
  t.text_valid = j.at("text_valid").get<bool>();
  t.branch = fusion_branch_from_string(j.at("branch").get<std::string>());
  t.mask_area = j.at("mask_area").get<std::size_t>();
  t.errors = j.at("errors").get<std::vector<std::string>>();
  t.config = j.value("config", nlohmann::json());
  t.timings.reset();
  if (j.contains("timings_ms")) {
    const auto& tm = j["timings_ms"];
    t.timings = StageTimings{tm.at("grounding").get<double>(), tm.at("route_a").get<double>(),
                             tm.at("route_b").get<double>(), tm.at("total").get<double>()};
  }
}

SampleResult run_sample(const RgbImage& image, const std::string& query, const PipelineConfig& config,
                        const BackendSet& backends, const std::string& sample_id) {
  const auto start = Clock::now();
  const int width = image.width();
  const int height = image.height();
  SampleResult result;
  PipelineTrace& trace = result.trace;
  trace.sample_id = sample_id;
  trace.query = query;
  trace.config = config_echo(config);
  result.mask = Mask(width, height);
  StageTimings timings;

  try {
    if (width < 1 || height < 1) throw std::invalid_argument("image is empty");
    if (trim(query).empty()) throw std::invalid_argument("query is empty");
    require_backends(backends);

    // Stage 1: grounding, with bounded retries on unparsable output.
    const std::string request =
        config.grounding_prompt ? render_grounding_prompt(*config.grounding_prompt, query, width, height) : query;
    std::optional<GroundingResult> grounding;
    for (int attempt = 0; attempt <= config.fallback.grounder_parse_retries && !grounding; ++attempt) {
      trace.grounder_responses.push_back(backends.grounder->ground(image, request));
      try {
        grounding = parse_grounding(trace.grounder_responses.back(), width, height, query);
      } catch (const GroundingParseError& e) {
        trace.errors.push_back(std::string("grounding parse: ") + e.what());
      } catch (const GroundingDegenerateError& e) {
        trace.errors.push_back(std::string("grounding degenerate: ") + e.what());
      }
    }
    timings.grounding_ms = elapsed_ms(start);

    // Stage 2: bias-aware refinement (or the full-image fallback).
    BBox refined;
    if (grounding) {
      trace.box = grounding->box;
      trace.phrase = grounding->phrase;
      refined = refine_box(grounding->box, width, height, config.refine);
    } else {
      if (!config.fallback.full_image_on_grounding_failure) {
        throw GroundingParseError("grounding failed and the full-image fallback is disabled");
      }
      trace.grounding_fallback = true;
      trace.phrase = trim(query);
      refined = BBox{0, 0, double(width), double(height)};
    }
    trace.refined_box = refined;
    const PixelBox roi = grid_box(refined);
    trace.roi = roi;
    const RgbImage crop = crop_region(image, roi);

    // Stage 3: both routes on the same crop, concurrently.
    auto point_future = std::async(std::launch::async, [&] {
      return run_point_route(crop, trace.phrase, roi, width, height, config, backends);
    });
    std::optional<RouteRun> text;
    std::exception_ptr text_error;
    try {
      text = run_text_route(crop, trace.phrase, roi, width, height, backends);
    } catch (...) {
      text_error = std::current_exception();
    }
    RouteRun point = point_future.get();
    if (text_error) std::rethrow_exception(text_error);

    trace.nms_radius = point.radius;
    trace.keypoints = point.keypoints;
    trace.point_mask = rle_encode(point.output.mask);
    trace.text_mask = rle_encode(text->output.mask);
    trace.point_valid = assess_validity(point.output, roi, config.fusion);
    trace.text_valid = assess_validity(text->output, roi, config.fusion);
    FusedMask fused = fuse(point.output, text->output, trace.point_valid, trace.text_valid);
    result.mask = std::move(fused.mask);
    trace.branch = fused.branch;
    timings.route_a_ms = point.ms;
    timings.route_b_ms = text->ms;
  } catch (const std::exception& e) {
    result.mask = Mask(std::max(width, 0), std::max(height, 0));
    trace.branch = FusionBranch::error;
    trace.errors.push_back(e.what());
  }
  trace.mask_area = mask_area(result.mask);
  timings.total_ms = elapsed_ms(start);
  if (config.record_timings) trace.timings = timings;
  return result;
}

SampleResult run_sample_cached(const RgbImage& image, const std::string& query, const PipelineConfig& config,
                               const BackendSet& backends, const std::string& sample_id, bool* cache_hit) {
  if (cache_hit) *cache_hit = false;
  if (!config.cache_dir) return run_sample(image, query, config, backends, sample_id);

  const auto path = cache_path(config, image, query);
  if (std::filesystem::exists(path)) {
    std::ifstream in(path);
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (!j.is_discarded()) {
      try {
        SampleResult cached{rle_decode(j.at("mask_rle").get<RleMask>()), j.at("trace").get<PipelineTrace>()};
        cached.trace.sample_id = sample_id;
        if (cache_hit) *cache_hit = true;
        return cached;
      } catch (const std::exception&) {
        // unreadable entry: recompute and overwrite
      }
    }
  }

  SampleResult fresh = run_sample(image, query, config, backends, sample_id);
  if (fresh.trace.branch != FusionBranch::error) {
    std::filesystem::create_directories(*config.cache_dir);
    nlohmann::json entry = {{"mask_rle", rle_encode(fresh.mask)}, {"trace", fresh.trace}};
    const auto tmp = path.string() + ".tmp" + std::to_string(std::hash<std::string>{}(sample_id));
    {
      std::ofstream out(tmp, std::ios::trunc);
      out << entry.dump();
    }
    std::filesystem::rename(tmp, path);
  }
  return fresh;
}

BatchResult run_batch(const Manifest& manifest, const PipelineConfig& config, const BackendSet& backends,
                      const std::filesystem::path& out_dir) {
  const auto pred_dir = out_dir / "predictions";
  std::filesystem::create_directories(pred_dir);

  BatchResult result;
  result.outcomes.resize(manifest.samples.size());
  parallel_for(manifest.samples.size(), config.workers, [&](std::size_t i) {
    const BenchmarkSample& s = manifest.samples[i];
    BatchOutcome& out = result.outcomes[i];
    out.sample_id = s.id;
    try {
      const RgbImage image = read_rgb_png(manifest.resolve(s.image));
      SampleResult r = run_sample_cached(image, s.query, config, backends, s.id, &out.cache_hit);
      write_mask_png(pred_dir / (s.id + ".png"), r.mask);
      out.failed = r.trace.branch == FusionBranch::error;
      out.mask = std::move(r.mask);
      out.trace = std::move(r.trace);
    } catch (const std::exception& e) {
      out.failed = true;
      out.trace.sample_id = s.id;
      out.trace.query = s.query;
      out.trace.config = config_echo(config);
      out.trace.branch = FusionBranch::error;
      out.trace.errors.push_back(e.what());
    }
  });

  std::vector<PipelineTrace> traces;
  traces.reserve(result.outcomes.size());
  for (const auto& o : result.outcomes) {
    traces.push_back(o.trace);
    if (o.failed) {
      ++result.failures;
      result.failed_ids.push_back(o.sample_id);
    }
  }
  write_traces(out_dir / "traces.jsonl", traces);
  return result;
}

std::vector<PipelineTrace> read_traces(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open traces " + path.string());
  std::vector<PipelineTrace> traces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      traces.push_back(nlohmann::json::parse(line).get<PipelineTrace>());
    } catch (const std::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return traces;
}

void write_traces(const std::filesystem::path& path, const std::vector<PipelineTrace>& traces) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write traces " + path.string());
  for (const auto& t : traces) out << nlohmann::json(t).dump() << '\n';
}

BackendSet make_backends(const PipelineConfig& config) {
  if (config.stub_fixture) {
    auto stub = std::make_shared<const ScriptedStub>(load_fixture(*config.stub_fixture));
    return make_stub_backends(stub);
  }
  BackendSet set;
  if (!config.grounder.url.empty()) set.grounder = std::make_shared<HttpGrounder>(config.grounder);
  if (!config.matcher.url.empty()) set.matcher = std::make_shared<HttpMatcher>(config.matcher);
  if (!config.segmenter.url.empty()) set.segmenter = std::make_shared<HttpSegmenter>(config.segmenter);
  if (!config.judge.url.empty()) set.judge = std::make_shared<HttpJudge>(config.judge);
  return set;
}

}  // namespace geoseg
