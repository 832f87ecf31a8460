#include <json.hpp>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/log.hpp"
#include "motad/pipeline/plot.hpp"
#include "motad/pipeline/stages.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Loaded {
  const ExecutionEntry* entry;
  scoring::AnomalyTrace trace;
};

std::vector<Loaded> load_traces(const Dataset& ds, Split split, const fs::path& dir, const char* stage) {
  std::vector<Loaded> out;
  for (const auto* e : detail::flowed(ds, split)) {
    const fs::path p = dir / "traces" / (e->id + ".csv");
    if (!fs::exists(p)) {
      throw MissingStage(stage, "no trace for " + e->id + " in " + dir.string() + "; run `motad score`");
    }
    ds.note(*e, p.lexically_relative(ds.root()).generic_string());
    out.push_back({e, scoring::read_trace_csv(p)});
  }
  return out;
}

MetricPair metrics(const std::vector<double>& s, const std::vector<int>& y) {
  return {scoring::auc_roc(s, y).auc, scoring::auc_pr(s, y).auc};
}

json to_json(const MetricPair& m) { return {{"auc_roc", m.auc_roc}, {"auc_pr", m.auc_pr}}; }

std::vector<scoring::AnomalyTrace> traces_of(const std::vector<Loaded>& v) {
  std::vector<scoring::AnomalyTrace> out;
  for (const auto& l : v) out.push_back(l.trace);
  return out;
}

scoring::Thresholds read_thresholds(const fs::path& dir) {
  const fs::path p = dir / "thresholds.json";
  if (!fs::exists(p)) throw MissingStage("score", "no thresholds at " + p.string() + "; run `motad score`");
  try {
    const json j = json::parse(detail::read_text(p));
    return {j.at("e_c_thres").get<double>(), j.at("e_b_thres").get<double>()};
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace

EvalReport evaluate(const PipelineConfig& cfg) {
  cfg.validate();
  const auto access = open_access_log(cfg, "eval");
  const Dataset ds(cfg.root, read_manifest(cfg.root), access.get());
  const fs::path sdir = score_dir(cfg);
  const auto test = load_traces(ds, Split::test, sdir, "score");
  if (test.empty()) throw SingleClassError("the test split has no scored executions");
  const scoring::Thresholds th = read_thresholds(sdir);
  const int first = cfg.range.first_scored_frame();
  const bool warm = cfg.include_warmup;

  EvalReport r;
  r.executions = static_cast<int>(test.size());
  const auto pooled = scoring::pool(traces_of(test), first, warm);
  r.frames = pooled.scores.size();
  for (int y : pooled.labels) r.anomalous_frames += y;
  r.fused = metrics(pooled.scores, pooled.labels);
  r.of_only = metrics(pooled.e_o, pooled.labels);
  r.e_o_above_one_fraction = scoring::fraction_above_one(pooled.e_o);

  std::set<std::string> kinds;
  std::vector<scoring::AnomalyTrace> nominal;
  for (const auto& l : test) {
    if (l.entry->nominal()) nominal.push_back(l.trace);
    else kinds.insert(l.entry->kind);
  }
  for (const auto& kind : kinds) {
    auto subset = nominal;
    for (const auto& l : test) {
      if (l.entry->kind == kind) subset.push_back(l.trace);
    }
    const auto p = scoring::pool(subset, first, warm);
    r.fused_by_kind[kind] = metrics(p.scores, p.labels);
    r.of_only_by_kind[kind] = metrics(p.e_o, p.labels);
  }

  std::size_t nominal_frames = 0, branch = 0;
  for (const auto& t : nominal) {
    for (const auto& row : t.rows) {
      if (!warm && row.frame < first) continue;
      ++nominal_frames;
      branch += row.e_c >= th.e_c_thres || row.e_b >= th.e_b_thres;
    }
  }
  r.nominal_threshold_fraction = nominal_frames ? static_cast<double>(branch) / nominal_frames : 0.0;

  const fs::path hdir = cfg.root / "scores" / "hmm";
  if (cfg.hmm.enabled && fs::exists(hdir / "traces")) {
    const auto h = scoring::pool(traces_of(load_traces(ds, Split::test, hdir, "score")), first, warm);
    r.hmm = metrics(h.scores, h.labels);
  }

  const auto val = detail::flowed(ds, Split::val);
  if (!val.empty()) {
    double alarm = 0.0;
    for (const auto& l : load_traces(ds, Split::val, sdir, "score")) {
      for (const auto& row : l.trace.rows) {
        if (row.frame >= first) alarm = std::max(alarm, row.e_o);
      }
    }
    r.alarm_level = alarm;
  }
  return r;
}

EvalReport cmd_eval(const PipelineConfig& cfg) {
  const EvalReport r = evaluate(cfg);
  const fs::path dir = eval_dir(cfg);
  fs::create_directories(dir / "traces");

  json by_kind = json::object();
  for (const auto& [kind, m] : r.fused_by_kind) {
    by_kind[kind] = {{"fused", to_json(m)}, {"of_only", to_json(r.of_only_by_kind.at(kind))}};
  }
  json j = {{"auc_roc", r.fused.auc_roc},
            {"auc_pr", r.fused.auc_pr},
            {"of_only", to_json(r.of_only)},
            {"by_kind", by_kind},
            {"counts",
             {{"executions", r.executions},
              {"frames", r.frames},
              {"anomalous_frames", r.anomalous_frames},
              {"nominal_frames", r.frames - r.anomalous_frames},
              {"anomalous_fraction", r.frames ? static_cast<double>(r.anomalous_frames) / r.frames : 0.0}}},
            {"nominal_threshold_fraction", r.nominal_threshold_fraction},
            {"e_o_above_one_fraction", r.e_o_above_one_fraction},
            {"variant", std::string(nn::to_string(cfg.variant))},
            {"range", {{"A", cfg.range.A}, {"B", cfg.range.B}, {"M", cfg.range.M}}},
            {"include_warmup", cfg.include_warmup}};
  if (r.hmm) j["hmm"] = to_json(*r.hmm);
  if (r.alarm_level) j["alarm_level"] = *r.alarm_level;
  detail::write_text_atomic(dir / "metrics.json", j.dump(2) + "\n");

  // Curves and per-execution plots reread the traces the metrics came from.
  const Dataset ds(cfg.root, read_manifest(cfg.root));
  const auto test = load_traces(ds, Split::test, score_dir(cfg), "score");
  std::vector<scoring::AnomalyTrace> all;
  for (const auto& l : test) all.push_back(l.trace);
  const auto p = scoring::pool(all, cfg.range.first_scored_frame(), cfg.include_warmup);
  plot_curves(scoring::auc_roc(p.scores, p.labels), scoring::auc_pr(p.scores, p.labels),
              scoring::auc_roc(p.e_o, p.labels), scoring::auc_pr(p.e_o, p.labels), dir / "curves.png");
  for (const auto& l : test) {
    plot_trace(l.trace, cfg.range.first_scored_frame(), r.alarm_level, dir / "traces" / (l.entry->id + ".png"));
  }
  log::info("eval: AUC-ROC " + detail::num(r.fused.auc_roc) + ", AUC-PR " + detail::num(r.fused.auc_pr) +
            " over " + std::to_string(r.frames) + " frames; report in " + dir.string());
  return r;
}

fs::path sweep_path(const PipelineConfig& cfg) {
  return cfg.root / "sweep" / ("sweep_" + std::string(nn::to_string(cfg.variant)) + "_M" +
                               std::to_string(cfg.range.M) + ".csv");
}

std::vector<SweepCell> cmd_sweep(const PipelineConfig& cfg) {
  cfg.validate();
  std::vector<SweepCell> cells;
  for (int a : cfg.sweep.A) {
    for (int b : cfg.sweep.B) {
      PipelineConfig c = cfg;
      c.range.A = a;
      c.range.B = b;
      log::info("sweep: A=" + std::to_string(a) + " B=" + std::to_string(b));
      cmd_train(c, false);
      cmd_score(c);
      const EvalReport r = evaluate(c);
      cells.push_back({a, b, r.fused, r.of_only});
    }
  }
  std::string csv = "A,B,auc_roc,auc_pr,of_only_auc_roc,of_only_auc_pr\n";
  for (const auto& c : cells) {
    csv += std::to_string(c.A) + "," + std::to_string(c.B) + "," + detail::num(c.fused.auc_roc) + "," +
           detail::num(c.fused.auc_pr) + "," + detail::num(c.of_only.auc_roc) + "," + detail::num(c.of_only.auc_pr) +
           "\n";
  }
  detail::write_text_atomic(sweep_path(cfg), csv);
  return cells;
}

}  // namespace motad::pipeline
