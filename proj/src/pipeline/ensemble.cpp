#include "tape/ensemble.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <future>

#include "tape/error.hpp"
#include "tape/nn.hpp"

namespace tape {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}, {"values", m.values}}; }

MeanStd mean_std_from_json(const json& j) {
  MeanStd m;
  m.values = j.at("values").get<std::vector<double>>();
  m.mean = j.at("mean").get<double>();
  m.std = j.at("std").get<double>();
  return m;
}

json to_json(const SplitScores& s) { return {{"val", to_json(s.val)}, {"test", to_json(s.test)}}; }

SplitScores split_from_json(const json& j) {
  return {mean_std_from_json(j.at("val")), mean_std_from_json(j.at("test"))};
}

std::string cell(const MeanStd& m) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.4f ± %.4f", m.mean, m.std);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // "±" is two bytes but one column.
  std::size_t cols = 0;
  for (const char c : s) cols += (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  return s + std::string(width > cols ? width - cols : 0, ' ');
}

struct SeedResult {
  DenseMatrix logits;
  double val = 0.0;
  double test = 0.0;
  double seconds = 0.0;
};

SeedResult train_one(const TextAttributedGraph& graph, const DenseMatrix& x, GnnConfig cfg) {
  const auto t0 = Clock::now();
  auto trained = train_gnn(x, graph, cfg);
  SeedResult r;
  r.logits = predict(trained.model, normalize_adjacency(graph.adjacency, cfg.arch), x);
  r.val = accuracy(r.logits, graph.labels, graph.splits.val);
  r.test = accuracy(r.logits, graph.labels, graph.splits.test);
  r.seconds = seconds_since(t0);
  return r;
}

}  // namespace

std::string_view to_string(EnsembleMode mode) noexcept {
  return mode == EnsembleMode::logits ? "logits" : "probabilities";
}

EnsembleMode parse_ensemble_mode(std::string_view name) {
  if (name == "logits") return EnsembleMode::logits;
  if (name == "probabilities") return EnsembleMode::probabilities;
  throw ConfigError("unknown ensemble mode '" + std::string(name) + "' (expected logits or probabilities)");
}

DenseMatrix ensemble_mean(std::span<const DenseMatrix> logits, EnsembleMode mode) {
  if (logits.empty()) throw ConfigError("ensemble_mean: empty list");
  const std::size_t rows = logits[0].rows(), cols = logits[0].cols();
  for (const auto& m : logits)
    if (m.rows() != rows || m.cols() != cols) throw ShapeError("ensemble_mean: shape mismatch");
  std::vector<double> acc(rows * cols, 0.0);
  for (const auto& m : logits) {
    for (std::size_t r = 0; r < rows; ++r) {
      const auto row = m.row(r);
      double* out = acc.data() + r * cols;
      if (mode == EnsembleMode::logits) {
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
        continue;
      }
      double mx = row[0], z = 0.0;
      for (const float v : row) mx = std::max(mx, static_cast<double>(v));
      for (const float v : row) z += std::exp(v - mx);
      for (std::size_t c = 0; c < cols; ++c) out[c] += std::exp(row[c] - mx) / z;
    }
  }
  DenseMatrix out(rows, cols);
  const double inv = 1.0 / static_cast<double>(logits.size());
  auto d = out.data();
  for (std::size_t i = 0; i < acc.size(); ++i) d[i] = static_cast<float>(acc[i] * inv);
  return out;
}

double accuracy(const DenseMatrix& logits, std::span<const int> labels, std::span<const std::size_t> mask) {
  return masked_accuracy(logits, labels, mask);
}

MeanStd MeanStd::of(std::vector<double> values) {
  MeanStd m;
  m.values = std::move(values);
  if (m.values.empty()) return m;
  double s = 0.0;
  for (const double v : m.values) s += v;
  m.mean = s / static_cast<double>(m.values.size());
  if (m.values.size() > 1) {
    double ss = 0.0;
    for (const double v : m.values) ss += (v - m.mean) * (v - m.mean);
    m.std = std::sqrt(ss / static_cast<double>(m.values.size() - 1));
  }
  return m;
}

json to_json(const ExperimentReport& r) {
  json per = json::object();
  for (const auto& [name, s] : r.per_source) per[name] = to_json(s);
  return {{"sources", r.sources},
          {"per_source", per},
          {"ensemble", to_json(r.ensemble)},
          {"seeds", r.seeds},
          {"config_hash", r.config_hash},
          {"arch", to_string(r.arch)},
          {"ensemble_mode", to_string(r.mode)},
          {"timings", r.timings}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.sources = j.at("sources").get<std::vector<std::string>>();
    for (const auto& [name, s] : j.at("per_source").items()) r.per_source[name] = split_from_json(s);
    r.ensemble = split_from_json(j.at("ensemble"));
    r.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.arch = parse_arch(j.at("arch").get<std::string>());
    r.mode = parse_ensemble_mode(j.at("ensemble_mode").get<std::string>());
    r.timings = j.at("timings").get<std::map<std::string, double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: ") + e.what());
  }
  return r;
}

ExperimentReport run_tape_experiment(const TextAttributedGraph& graph, const FeatureSet& features,
                                     const ExperimentSpec& spec) {
  if (spec.sources.empty()) throw ConfigError("experiment: no feature sources listed");
  if (spec.seeds.empty()) throw ConfigError("experiment: seed list is empty");
  for (const auto& s : spec.sources) {
    if (!features.count(s)) throw ConfigError("experiment: feature source '" + s + "' is missing");
    if (std::count(spec.sources.begin(), spec.sources.end(), s) > 1)
      throw ConfigError("experiment: feature source '" + s + "' listed twice");
  }
  if (graph.splits.test.empty()) throw ConfigError("experiment: graph has no test split");

  ExperimentReport report;
  report.sources = spec.sources;
  report.seeds = spec.seeds;
  report.config_hash = spec.config_hash;
  report.arch = spec.gnn.arch;
  report.mode = spec.mode;
  std::map<std::string, std::vector<double>> val, test;
  std::vector<double> ens_val, ens_test;

  for (const auto seed : spec.seeds) {
    GnnConfig cfg = spec.gnn;
    cfg.seed = seed;
    std::vector<SeedResult> results(spec.sources.size());
    if (spec.parallel && spec.sources.size() > 1) {
      std::vector<std::future<SeedResult>> jobs;
      for (const auto& s : spec.sources)
        jobs.push_back(std::async(std::launch::async, train_one, std::cref(graph), std::cref(features.at(s)), cfg));
      for (std::size_t i = 0; i < jobs.size(); ++i) results[i] = jobs[i].get();
    } else {
      for (std::size_t i = 0; i < spec.sources.size(); ++i)
        results[i] = train_one(graph, features.at(spec.sources[i]), cfg);
    }
    std::vector<DenseMatrix> logits;
    for (std::size_t i = 0; i < spec.sources.size(); ++i) {
      const auto& name = spec.sources[i];
      val[name].push_back(results[i].val);
      test[name].push_back(results[i].test);
      report.timings["train_" + name] += results[i].seconds;
      logits.push_back(std::move(results[i].logits));
    }
    const auto ens = ensemble_mean(logits, spec.mode);
    ens_val.push_back(accuracy(ens, graph.labels, graph.splits.val));
    ens_test.push_back(accuracy(ens, graph.labels, graph.splits.test));
  }
  for (const auto& s : spec.sources) report.per_source[s] = {MeanStd::of(val[s]), MeanStd::of(test[s])};
  report.ensemble = {MeanStd::of(ens_val), MeanStd::of(ens_test)};
  return report;
}

ExperimentReport ablate(const TextAttributedGraph& graph, const FeatureSet& features,
                        const ExperimentSpec& spec, const std::set<std::string>& leave_out) {
  ExperimentSpec sub = spec;
  sub.sources.clear();
  for (const auto& s : spec.sources)
    if (!leave_out.count(s)) sub.sources.push_back(s);
  if (sub.sources.empty()) throw ConfigError("ablation leaves no feature source");
  return run_tape_experiment(graph, features, sub);
}

std::vector<AblationRow> ablation_sweep(const TextAttributedGraph& graph, const FeatureSet& features,
                                        const ExperimentSpec& spec) {
  std::vector<AblationRow> rows;
  rows.push_back({"full", run_tape_experiment(graph, features, spec), 0.0});
  const double full = rows[0].report.ensemble.test.mean;
  if (spec.sources.size() < 2) return rows;
  for (const auto& s : spec.sources) {
    auto r = ablate(graph, features, spec, {s});
    const double delta = r.ensemble.test.mean - full;
    rows.push_back({"without " + s, std::move(r), delta});
  }
  return rows;
}

std::string render_table(const std::vector<std::pair<std::string, ExperimentReport>>& rows) {
  const std::size_t w0 = 12, w = 20;
  std::string out = pad("method", w0);
  for (const char* h : {"h_orig", "h_expl", "h_pred", "h_TAPE"}) out += pad(h, w);
  out += "\n";
  for (const auto& [label, r] : rows) {
    out += pad(label, w0);
    for (const char* s : kSourceNames) {
      const auto it = r.per_source.find(s);
      out += pad(it == r.per_source.end() ? "-" : cell(it->second.test), w);
    }
    out += pad(cell(r.ensemble.test), w) + "\n";
  }
  return out;
}

std::string render_ablation(const std::vector<AblationRow>& rows) {
  std::string out = pad("run", 16) + pad("sources", 20) + pad("ensemble test", 20) + "delta\n";
  for (const auto& row : rows) {
    std::string sources;
    for (const auto& s : row.report.sources) sources += (sources.empty() ? "" : ",") + s;
    char delta[32];
    std::snprintf(delta, sizeof(delta), "%+.4f", row.delta_test);
    out += pad(row.name, 16) + pad(sources, 20) + pad(cell(row.report.ensemble.test), 20) + delta + "\n";
  }
  return out;
}

}  // namespace tape
