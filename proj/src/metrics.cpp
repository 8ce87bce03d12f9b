#include "geoseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace geoseg {

namespace {

double ratio_or(std::uint64_t num, std::uint64_t den, double when_empty) {
  return den == 0 ? when_empty : static_cast<double>(num) / static_cast<double>(den);
}

std::vector<std::uint8_t> boundary_of(const Mask& m) {
  const int w = m.width();
  const int h = m.height();
  std::vector<std::uint8_t> out(m.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y)) continue;
      const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.at(x - 1, y) ||
                        !m.at(x + 1, y) || !m.at(x, y - 1) || !m.at(x, y + 1);
      if (edge) out[static_cast<std::size_t>(y) * w + x] = 1;
    }
  }
  return out;
}

constexpr double kFar = 1e20;

// Squared distance transform of a sampled function (lower envelope of parabolas).
void edt_1d(const double* f, int n, std::size_t stride, double* d, std::vector<int>& v,
            std::vector<double>& z) {
  v.assign(static_cast<std::size_t>(n), 0);
  z.assign(static_cast<std::size_t>(n) + 1, 0);
  auto val = [&](int i) { return f[static_cast<std::size_t>(i) * stride]; };
  auto intersect = [&](int q, int p) {
    return ((val(q) + double(q) * q) - (val(p) + double(p) * p)) / (2.0 * q - 2.0 * p);
  };
  std::size_t k = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const int p = v[k];
    d[static_cast<std::size_t>(q) * stride] = double(q - p) * (q - p) + val(p);
  }
}

std::vector<double> squared_distance_to(const std::vector<std::uint8_t>& sites, int w, int h) {
  std::vector<double> grid(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) grid[i] = sites[i] ? 0.0 : kFar;
  std::vector<double> tmp(sites.size());
  std::vector<int> v;
  std::vector<double> z;
  for (int x = 0; x < w; ++x) {
    edt_1d(grid.data() + x, h, static_cast<std::size_t>(w), tmp.data() + x, v, z);
  }
  for (int y = 0; y < h; ++y) {
    const std::size_t row = static_cast<std::size_t>(y) * w;
    edt_1d(tmp.data() + row, w, 1, grid.data() + row, v, z);
  }
  return grid;
}

double matched_fraction(const std::vector<std::uint8_t>& from, const std::vector<double>& dist2,
                        double theta) {
  std::uint64_t total = 0;
  std::uint64_t hit = 0;
  const double limit = theta * theta;
  for (std::size_t i = 0; i < from.size(); ++i) {
    if (!from[i]) continue;
    ++total;
    if (dist2[i] <= limit) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(total);
}

MetricValues with_boundary(const PixelMetrics& p, double bf) {
  return {p.iou, p.dice, p.accuracy, p.precision, p.recall, p.specificity, bf};
}

void accumulate(MetricValues& acc, const MetricValues& v) {
  acc.iou += v.iou;
  acc.dice += v.dice;
  acc.accuracy += v.accuracy;
  acc.precision += v.precision;
  acc.recall += v.recall;
  acc.specificity += v.specificity;
  acc.boundary_f += v.boundary_f;
}

MetricGroup summarize(const std::vector<const MetricsReport*>& members, AggregationMode mode) {
  MetricGroup g;
  g.count = members.size();
  MetricValues sum;
  Confusion pooled;
  for (const auto* r : members) {
    accumulate(sum, r->values);
    pooled += r->counts;
  }
  const double n = static_cast<double>(members.size());
  g.values = {sum.iou / n,       sum.dice / n,        sum.accuracy / n,  sum.precision / n,
              sum.recall / n,    sum.specificity / n, sum.boundary_f / n};
  if (mode == AggregationMode::micro) {
    g.values = with_boundary(pixel_metrics(pooled), g.values.boundary_f);
  }
  return g;
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v * 100.0);
  return buf;
}

nlohmann::json group_json(const MetricGroup& g) {
  nlohmann::json j = g.values;
  j["count"] = g.count;
  return j;
}

}  // namespace

Confusion confusion(const Mask& pred, const Mask& gt) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("confusion: mask dimensions differ");
  Confusion c;
  const auto p = pred.bits();
  const auto g = gt.bits();
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] && g[i]) ++c.tp;
    else if (p[i]) ++c.fp;
    else if (g[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

PixelMetrics pixel_metrics(const Confusion& c) {
  const bool both_empty = c.tp + c.fp + c.fn == 0;
  const double empty_value = both_empty ? 1.0 : 0.0;
  PixelMetrics m;
  m.iou = ratio_or(c.tp, c.tp + c.fp + c.fn, 1.0);
  m.dice = ratio_or(2 * c.tp, 2 * c.tp + c.fp + c.fn, 1.0);
  m.accuracy = ratio_or(c.tp + c.tn, c.total(), 1.0);
  m.precision = ratio_or(c.tp, c.tp + c.fp, empty_value);
  m.recall = ratio_or(c.tp, c.tp + c.fn, empty_value);
  m.specificity = ratio_or(c.tn, c.tn + c.fp, 1.0);
  return m;
}

double boundary_f(const Mask& pred, const Mask& gt, double theta) {
  if (!pred.same_shape(gt)) throw std::invalid_argument("boundary_f: mask dimensions differ");
  if (!(theta >= 0)) throw std::invalid_argument("boundary_f: theta must be >= 0");
  const auto pb = boundary_of(pred);
  const auto gb = boundary_of(gt);
  const bool p_empty = std::find(pb.begin(), pb.end(), 1) == pb.end();
  const bool g_empty = std::find(gb.begin(), gb.end(), 1) == gb.end();
  if (p_empty && g_empty) return 1.0;
  if (p_empty || g_empty) return 0.0;

  const int w = pred.width();
  const int h = pred.height();
  const double precision = matched_fraction(pb, squared_distance_to(gb, w, h), theta);
  const double recall = matched_fraction(gb, squared_distance_to(pb, w, h), theta);
  if (precision + recall == 0) return 0.0;
  return 2 * precision * recall / (precision + recall);
}

double default_boundary_theta(int width, int height) {
  return std::round(0.0075 * std::hypot(static_cast<double>(width), static_cast<double>(height)));
}

MetricsReport score_sample(const Mask& pred, const Mask& gt, std::optional<double> theta) {
  MetricsReport r;
  r.counts = confusion(pred, gt);
  r.theta = theta.value_or(default_boundary_theta(gt.width(), gt.height()));
  r.values = with_boundary(pixel_metrics(r.counts), boundary_f(pred, gt, r.theta));
  return r;
}

MetricsSummary aggregate(const std::vector<MetricsReport>& reports, AggregationMode mode) {
  if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
  MetricsSummary s;
  s.mode = mode;
  std::vector<const MetricsReport*> all;
  std::map<std::string, std::vector<const MetricsReport*>> scenarios;
  std::map<int, std::vector<const MetricsReport*>> levels;
  for (const auto& r : reports) {
    all.push_back(&r);
    if (r.scenario) scenarios[*r.scenario].push_back(&r);
    if (r.level) levels[*r.level].push_back(&r);
  }
  s.overall = summarize(all, mode);
  for (const auto& [name, members] : scenarios) s.by_scenario[name] = summarize(members, mode);
  for (const auto& [level, members] : levels) s.by_level[level] = summarize(members, mode);
  return s;
}

std::string render_metrics_table(const MetricsSummary& summary) {
  std::ostringstream out;
  char line[256];
  auto row = [&](const std::string& name, const MetricGroup& g) {
    const auto& v = g.values;
    std::snprintf(line, sizeof line, "%-12s %6zu %6s %6s %6s %6s %6s %6s %6s\n", name.c_str(), g.count,
                  percent(v.iou).c_str(), percent(v.dice).c_str(), percent(v.accuracy).c_str(),
                  percent(v.precision).c_str(), percent(v.recall).c_str(),
                  percent(v.specificity).c_str(), percent(v.boundary_f).c_str());
    out << line;
  };
  std::snprintf(line, sizeof line, "%-12s %6s %6s %6s %6s %6s %6s %6s %6s\n", "Group", "N", "IoU",
                "Dice", "Acc.", "Prec.", "Rec.", "Spec.", "BF");
  out << line;
  row("overall", summary.overall);
  for (const auto& [name, g] : summary.by_scenario) row(name, g);
  for (const auto& [level, g] : summary.by_level) row("L" + std::to_string(level), g);
  return out.str();
}

void to_json(nlohmann::json& j, const MetricValues& v) {
  j = {{"iou", v.iou},
       {"dice", v.dice},
       {"accuracy", v.accuracy},
       {"precision", v.precision},
       {"recall", v.recall},
       {"specificity", v.specificity},
       {"boundary_f", v.boundary_f}};
}

void from_json(const nlohmann::json& j, MetricValues& v) {
  v.iou = j.at("iou").get<double>();
  v.dice = j.at("dice").get<double>();
  v.accuracy = j.at("accuracy").get<double>();
  v.precision = j.at("precision").get<double>();
  v.recall = j.at("recall").get<double>();
  v.specificity = j.at("specificity").get<double>();
  v.boundary_f = j.at("boundary_f").get<double>();
}

void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = r.values;
  j["sample_id"] = r.sample_id;
  j["scenario"] = r.scenario ? nlohmann::json(*r.scenario) : nlohmann::json(nullptr);
  j["level"] = r.level ? nlohmann::json(*r.level) : nlohmann::json(nullptr);
  j["theta"] = r.theta;
  j["branch"] = r.branch ? nlohmann::json(*r.branch) : nlohmann::json(nullptr);
  j["tp"] = r.counts.tp;
  j["fp"] = r.counts.fp;
  j["fn"] = r.counts.fn;
  j["tn"] = r.counts.tn;
  j["flags"] = r.flags;
}

void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.values = j.get<MetricValues>();
  r.sample_id = j.at("sample_id").get<std::string>();
  r.scenario = j.value("scenario", nlohmann::json()).is_null()
                   ? std::nullopt
                   : std::optional<std::string>(j["scenario"].get<std::string>());
  r.level = j.value("level", nlohmann::json()).is_null() ? std::nullopt
                                                          : std::optional<int>(j["level"].get<int>());
  r.theta = j.at("theta").get<double>();
  r.branch = j.value("branch", nlohmann::json()).is_null()
                 ? std::nullopt
                 : std::optional<std::string>(j["branch"].get<std::string>());
  r.counts = {j.at("tp").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
              j.at("fn").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>()};
  r.flags = j.value("flags", std::vector<std::string>{});
}

void to_json(nlohmann::json& j, const MetricsSummary& s) {
  j = {{"mode", s.mode == AggregationMode::macro ? "macro" : "micro"},
       {"overall", group_json(s.overall)}};
  j["by_scenario"] = nlohmann::json::object();
  for (const auto& [name, g] : s.by_scenario) j["by_scenario"][name] = group_json(g);
  j["by_level"] = nlohmann::json::object();
  for (const auto& [level, g] : s.by_level) j["by_level"][std::to_string(level)] = group_json(g);
}

}  // namespace geoseg
