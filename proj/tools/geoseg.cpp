// geoseg: command-line front end for the reasoning-segmentation pipeline.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "geoseg/bench.hpp"
#include "geoseg/calibration.hpp"
#include "geoseg/errors.hpp"
#include "geoseg/manifest.hpp"
#include "geoseg/parallel.hpp"
#include "geoseg/pipeline.hpp"
#include "geoseg/wire.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

// Flags that override the config file. Unset flags leave the file (or the
// built-in default) in place.
struct ConfigFlags {
  std::optional<std::string> config_path;
  std::optional<double> alpha, beta, tau, gamma;
  std::optional<int> k, radius, workers;
  std::optional<std::string> cache_dir, stub_fixture;
  std::optional<std::string> grounder_url, matcher_url, segmenter_url, judge_url;
  bool timings = false;

  void attach(CLI::App& cmd) {
    cmd.add_option("-c,--config", config_path, "pipeline config JSON");
    cmd.add_option("--alpha", alpha, "left/top refinement margin");
    cmd.add_option("--beta", beta, "right/bottom refinement margin");
    cmd.add_option("--k", k, "max keypoints");
    cmd.add_option("--tau", tau, "keypoint threshold");
    cmd.add_option("--radius", radius, "NMS radius in map cells");
    cmd.add_option("--gamma", gamma, "validity area ratio");
    cmd.add_option("-j,--workers", workers, "worker threads (0: one per processor)");
    cmd.add_option("--cache-dir", cache_dir, "content-addressed result cache");
    cmd.add_option("--stub-fixture", stub_fixture, "answer from a scripted fixture instead of HTTP backends");
    cmd.add_option("--grounder-url", grounder_url);
    cmd.add_option("--matcher-url", matcher_url);
    cmd.add_option("--segmenter-url", segmenter_url);
    cmd.add_option("--judge-url", judge_url);
    cmd.add_flag("--timings", timings, "record per-stage wall-clock in traces");
  }

  geoseg::PipelineConfig resolve() const {
    geoseg::PipelineConfig c = config_path ? geoseg::load_config(*config_path) : geoseg::PipelineConfig{};
    if (alpha) c.refine.alpha = *alpha;
    if (beta) c.refine.beta = *beta;
    if (k) c.keypoints.k = *k;
    if (tau) c.keypoints.tau = *tau;
    if (radius) c.keypoints.radius = *radius;
    if (gamma) c.fusion.gamma = *gamma;
    if (workers) c.workers = *workers;
    if (cache_dir) c.cache_dir = fs::path(*cache_dir);
    if (stub_fixture) c.stub_fixture = fs::path(*stub_fixture);
    if (grounder_url) c.grounder.url = *grounder_url;
    if (matcher_url) c.matcher.url = *matcher_url;
    if (segmenter_url) c.segmenter.url = *segmenter_url;
    if (judge_url) c.judge.url = *judge_url;
    if (timings) c.record_timings = true;
    geoseg::apply_endpoint_env(c);
    geoseg::validate(c);
    return c;
  }
};

void require_backends(const geoseg::BackendSet& b, bool need_judge) {
  if (need_judge) {
    if (!b.judge) throw std::invalid_argument("no judge backend: set --judge-url, GEOSEG_JUDGE_URL or a stub fixture");
    return;
  }
  if (!b.grounder || !b.matcher || !b.segmenter) {
    throw std::invalid_argument(
        "grounder, matcher and segmenter backends are required: set their URLs or a stub fixture");
  }
}

std::map<std::string, std::string> branches_from_traces(const fs::path& path) {
  std::map<std::string, std::string> out;
  for (const auto& t : geoseg::read_traces(path)) out[t.sample_id] = std::string(geoseg::to_string(t.branch));
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw geoseg::Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// ---- run

struct RunArgs {
  ConfigFlags cfg;
  std::string image, query, out;
  std::optional<std::string> trace;
};

int cmd_run(const RunArgs& a) {
  const auto config = a.cfg.resolve();
  const auto backends = geoseg::make_backends(config);
  require_backends(backends, false);
  const auto image = geoseg::read_rgb_png(a.image);
  const auto result =
      geoseg::run_sample_cached(image, a.query, config, backends, fs::path(a.image).stem().string());
  geoseg::write_mask_png(a.out, result.mask);
  const fs::path trace_path = a.trace ? fs::path(*a.trace) : fs::path(a.out).replace_extension(".trace.json");
  write_json(trace_path, json(result.trace));
  std::printf("branch=%s area=%zu\n", std::string(geoseg::to_string(result.trace.branch)).c_str(),
              result.trace.mask_area);
  if (result.trace.branch == geoseg::FusionBranch::error) {
    for (const auto& e : result.trace.errors) std::fprintf(stderr, "error: %s\n", e.c_str());
    return kExitPartial;
  }
  return kExitOk;
}

// ---- bench / eval

struct EvalFlags {
  std::optional<double> theta;
  bool micro = false;
  void attach(CLI::App& cmd) {
    cmd.add_option("--theta", theta, "boundary tolerance in pixels (default: 0.75% of the diagonal)");
    cmd.add_flag("--micro", micro, "pool pixel counts instead of averaging per sample");
  }
  geoseg::EvaluateOptions options(int workers) const {
    geoseg::EvaluateOptions o;
    o.theta = theta;
    o.mode = micro ? geoseg::AggregationMode::micro : geoseg::AggregationMode::macro;
    o.workers = workers;
    return o;
  }
};

struct BenchArgs {
  ConfigFlags cfg;
  EvalFlags eval;
  std::string manifest, out;
  bool strict = false;
};

int cmd_bench(const BenchArgs& a) {
  const auto config = a.cfg.resolve();
  const auto manifest = geoseg::load_manifest(a.manifest, {.strict = a.strict});
  const auto backends = geoseg::make_backends(config);
  require_backends(backends, false);
  const auto batch = geoseg::run_batch(manifest, config, backends, a.out);

  auto options = a.eval.options(config.workers);
  for (const auto& o : batch.outcomes) options.branches[o.sample_id] = std::string(geoseg::to_string(o.trace.branch));
  const auto evaluation = geoseg::evaluate(manifest, fs::path(a.out) / "predictions", options);
  geoseg::write_evaluation(evaluation, a.out);
  std::cout << geoseg::render_metrics_table(evaluation.summary);
  if (batch.failures > 0) {
    std::fprintf(stderr, "%zu of %zu samples failed:", batch.failures, batch.outcomes.size());
    for (const auto& id : batch.failed_ids) std::fprintf(stderr, " %s", id.c_str());
    std::fputc('\n', stderr);
    return kExitPartial;
  }
  return kExitOk;
}

struct EvalArgs {
  EvalFlags eval;
  std::string manifest, predictions, out;
  std::optional<std::string> traces;
  bool strict = false;
  int workers = 0;
};

int cmd_eval(const EvalArgs& a) {
  const auto manifest = geoseg::load_manifest(a.manifest, {.strict = a.strict});
  auto options = a.eval.options(a.workers);
  if (a.traces) options.branches = branches_from_traces(*a.traces);
  const auto evaluation = geoseg::evaluate(manifest, a.predictions, options);
  geoseg::write_evaluation(evaluation, a.out);
  std::cout << geoseg::render_metrics_table(evaluation.summary);
  return kExitOk;
}

// ---- calibrate

struct CalibrateArgs {
  std::string pairs;
  double quantile = geoseg::kDefaultMarginQuantile;
  double bin_width = 0.05;
  std::optional<std::string> histogram;
};

int cmd_calibrate(const CalibrateArgs& a) {
  const auto pairs = geoseg::load_box_pairs(a.pairs);
  std::vector<geoseg::EdgeOffsets> offsets;
  offsets.reserve(pairs.size());
  for (const auto& p : pairs) offsets.push_back(geoseg::edge_offsets(p.pred, p.gt));
  const auto margins = geoseg::derive_margins(offsets, a.quantile);
  const std::string csv = geoseg::export_offset_histogram(offsets, a.bin_width);
  std::printf("alpha=%.2f beta=%.2f\n", margins.alpha, margins.beta);
  if (a.histogram) {
    std::ofstream(*a.histogram, std::ios::trunc) << csv;
  } else {
    std::fputs(csv.c_str(), stdout);
  }
  return kExitOk;
}

// ---- judge

struct JudgeArgs {
  ConfigFlags cfg;
  std::string manifest, predictions, out;
  std::optional<std::string> overlays;
  double overlay_alpha = geoseg::kDefaultOverlayAlpha;
};

int cmd_judge(const JudgeArgs& a) {
  const auto config = a.cfg.resolve();
  const auto manifest = geoseg::load_manifest(a.manifest);
  const auto backends = geoseg::make_backends(config);
  require_backends(backends, true);
  geoseg::JudgeOptions options;
  options.alpha = a.overlay_alpha;
  options.workers = config.workers;
  if (a.overlays) options.overlay_dir = fs::path(*a.overlays);
  const auto run = geoseg::judge_run(manifest, a.predictions, *backends.judge, options);

  fs::create_directories(a.out);
  {
    std::ofstream out(fs::path(a.out) / "judge.jsonl", std::ios::trunc);
    for (const auto& s : run.samples) out << json(s).dump() << '\n';
  }
  write_json(fs::path(a.out) / "judge_summary.json", json(run.summary));
  const std::string table = geoseg::render_judge_table(run.summary);
  std::ofstream(fs::path(a.out) / "judge_table.txt", std::ios::trunc) << table;
  std::cout << table;
  for (const auto& s : run.samples) {
    if (s.error) std::fprintf(stderr, "%s: %s\n", s.sample_id.c_str(), s.error->c_str());
  }
  return run.summary.coverage == run.summary.total ? kExitOk : kExitPartial;
}

// ---- serve

struct ServeArgs {
  ConfigFlags cfg;
  std::string host = "127.0.0.1";
  int port = 8080;
};

int cmd_serve(const ServeArgs& a) {
  const auto config = a.cfg.resolve();
  const auto backends = geoseg::make_backends(config);
  require_backends(backends, false);

  httplib::Server server;
  const auto threads = static_cast<std::size_t>(geoseg::resolve_workers(config.workers));
  server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

  server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"ok", true}, {"role", "pipeline"}}.dump(), "application/json");
  });
  server.Post(std::string(geoseg::wire::kPipelinePath), [&](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto body = json::parse(req.body, nullptr, false);
      if (body.is_discarded() || !body.is_object()) throw geoseg::ProtocolError("body is not a JSON object");
      // Same body shape as a grounding request.
      const auto request = geoseg::wire::decode_ground_request(body);
      if (request.query.empty()) throw geoseg::ProtocolError("empty query");
      const auto result = geoseg::run_sample_cached(request.image, request.query, config, backends, "request");
      res.set_content(json{{"mask_rle", geoseg::rle_encode(result.mask)}, {"trace", result.trace}}.dump(),
                      "application/json");
    } catch (const geoseg::ProtocolError& e) {
      res.status = 400;
      res.set_content(geoseg::wire::encode_error(e.what()).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(geoseg::wire::encode_error(e.what()).dump(), "application/json");
    }
  });

  std::fprintf(stderr, "listening on %s:%d\n", a.host.c_str(), a.port);
  if (!server.listen(a.host, a.port)) {
    std::fprintf(stderr, "cannot bind %s:%d\n", a.host.c_str(), a.port);
    return kExitPartial;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Training-free reasoning segmentation for remote sensing imagery"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all subcommand help");
  app.failure_message(CLI::FailureMessage::help);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "segment one image for one query");
  run.cfg.attach(*run_cmd);
  run_cmd->add_option("--image", run.image, "RGB PNG")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--query", run.query, "natural-language query")->required();
  run_cmd->add_option("-o,--out", run.out, "output mask PNG")->required();
  run_cmd->add_option("--trace", run.trace, "trace JSON (default: <out>.trace.json)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "run a manifest through the pipeline, then score it");
  bench.cfg.attach(*bench_cmd);
  bench.eval.attach(*bench_cmd);
  bench_cmd->add_option("-m,--manifest", bench.manifest, "JSON-lines manifest")->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("-o,--out", bench.out, "output directory")->required();
  bench_cmd->add_flag("--strict", bench.strict, "require the full benchmark composition");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "score existing predictions");
  eval.eval.attach(*eval_cmd);
  eval_cmd->add_option("-m,--manifest", eval.manifest)->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-p,--predictions", eval.predictions, "directory of <id>.png masks")->required();
  eval_cmd->add_option("-o,--out", eval.out, "report directory")->required();
  eval_cmd->add_option("--traces", eval.traces, "traces.jsonl, adds the fusion branch to reports");
  eval_cmd->add_flag("--strict", eval.strict);
  eval_cmd->add_option("-j,--workers", eval.workers);

  CalibrateArgs cal;
  auto* cal_cmd = app.add_subcommand("calibrate", "estimate refinement margins from box pairs");
  cal_cmd->add_option("--pairs", cal.pairs, "JSON-lines {\"pred\":[..],\"gt\":[..]}")->required()->check(CLI::ExistingFile);
  cal_cmd->add_option("--quantile", cal.quantile)->check(CLI::Range(0.0, 1.0));
  cal_cmd->add_option("--bin-width", cal.bin_width)->check(CLI::PositiveNumber);
  cal_cmd->add_option("--histogram", cal.histogram, "write the CSV here instead of stdout");

  JudgeArgs judge;
  auto* judge_cmd = app.add_subcommand("judge", "score predictions with a vision-language judge");
  judge.cfg.attach(*judge_cmd);
  judge_cmd->add_option("-m,--manifest", judge.manifest)->required()->check(CLI::ExistingFile);
  judge_cmd->add_option("-p,--predictions", judge.predictions)->required();
  judge_cmd->add_option("-o,--out", judge.out, "report directory")->required();
  judge_cmd->add_option("--overlays", judge.overlays, "persist overlays here");
  judge_cmd->add_option("--overlay-alpha", judge.overlay_alpha)->check(CLI::Range(0.0, 1.0));

  ServeArgs serve;
  auto* serve_cmd = app.add_subcommand("serve", "expose the pipeline over HTTP");
  serve.cfg.attach(*serve_cmd);
  serve_cmd->add_option("--host", serve.host);
  serve_cmd->add_option("--port", serve.port)->check(CLI::Range(1, 65535));

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*bench_cmd) return cmd_bench(bench);
    if (*eval_cmd) return cmd_eval(eval);
    if (*cal_cmd) return cmd_calibrate(cal);
    if (*judge_cmd) return cmd_judge(judge);
    if (*serve_cmd) return cmd_serve(serve);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitPartial;
  }
  return kExitUsage;
}
