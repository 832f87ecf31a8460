#include <json.hpp>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/log.hpp"
#include "motad/neural/training.hpp"
#include "motad/pipeline/parallel.hpp"
#include "motad/pipeline/stages.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;

KinematicErrors kinematic_errors(const Dataset& ds, const ExecutionEntry& e, const PipelineConfig& cfg) {
  const int n = detail::stamped_frames(ds.exec_dir(e.id));
  const auto cams = ds.camera(e);
  if (static_cast<int>(cams.size()) < n) throw FormatError(e.id + ": camera.csv has fewer rows than frames");
  const auto reg = read_registration_csv(ds.derived(e, "flow/registration.csv"));
  if (static_cast<int>(reg.size()) != n - 1) throw FormatError(e.id + ": registration.csv does not match the frames");
  const auto observed = ds.flows(e, "real", n - 1);
  const auto body = ds.flows(e, "rendered", n - 1);
  const int w = observed[0].width(), h = observed[0].height();
  // Transforms are compared about the image centre so that a rotation or
  // scale residual does not show up as a large translation at the origin.
  const double cx = w / 2.0, cy = h / 2.0;
  const auto depth = kinematics::DepthModel::uniform(cfg.depth);

  KinematicErrors out;
  for (int t = 1; t < n; ++t) {
    const auto& k = cfg.intrinsics ? *cfg.intrinsics : cams[t].intrinsics;
    const auto expected = kinematics::expected_transform(k, relative_motion(cams[t - 1], cams[t]), depth, w, h);
    out.e_c.push_back(kinematics::camera_error(expected.about(cx, cy), reg[t - 1].transform.about(cx, cy),
                                               cfg.camera_weights));
    const Mask mask = kinematics::body_mask(ds.frame(e, FrameStream::rendered, t - 1), cfg.flow.mask_threshold,
                                            cfg.flow.mask_dilation);
    out.e_b.push_back(kinematics::body_error(observed[t - 1], body[t - 1], mask));
  }
  return out;
}

ScoreReport cmd_score(const PipelineConfig& cfg) {
  cfg.validate();
  const fs::path ckpt = checkpoint_path(cfg);
  if (!fs::exists(ckpt)) {
    throw MissingStage("train", "no checkpoint at " + ckpt.string() + "; run `motad train` first");
  }
  const nn::ProbUNet model = nn::ProbUNet::load(ckpt);
  const auto& mc = model.config();
  if (mc.side != cfg.model.side || mc.depth != cfg.model.depth || mc.base != cfg.model.base ||
      mc.latent != cfg.model.latent) {
    throw ValidationError("checkpoint " + ckpt.string() + " was trained with a different architecture; rerun "
                          "`motad train --force`");
  }
  const auto access = open_access_log(cfg, "score");
  const Dataset ds(cfg.root, read_manifest(cfg.root), access.get());

  ScoreReport r;
  r.dir = score_dir(cfg);
  std::size_t threshold_frames = 0;
  if (cfg.thresholds.policy == ThresholdPolicy::train_max) {
    const auto train = detail::flowed(ds, Split::train);
    std::vector<KinematicErrors> per(train.size());
    parallel_for(static_cast<int>(train.size()), cfg.jobs,
                 [&](int i) { per[i] = kinematic_errors(ds, *train[i], cfg); });
    std::vector<double> ec, eb;
    for (const auto& k : per) {
      ec.insert(ec.end(), k.e_c.begin(), k.e_c.end());
      eb.insert(eb.end(), k.e_b.begin(), k.e_b.end());
    }
    if (ec.empty()) throw MissingStage("flow", "no train-split frames to derive thresholds from; run `motad flow`");
    r.thresholds = scoring::compute_thresholds(ec, eb);
    threshold_frames = ec.size();
  } else {
    r.thresholds = {cfg.thresholds.e_c, cfg.thresholds.e_b};
  }

  std::vector<const ExecutionEntry*> targets = detail::flowed(ds, Split::val);
  for (const auto* e : detail::flowed(ds, Split::test)) targets.push_back(e);
  const fs::path hmm_path = cfg.root / "models" / "hmm.json";
  std::optional<hmm::GaussianHmm> hmm_model;
  if (cfg.hmm.enabled && fs::exists(hmm_path)) hmm_model = load_hmm(hmm_path);

  fs::create_directories(r.dir / "traces");
  if (hmm_model) fs::create_directories(cfg.root / "scores" / "hmm" / "traces");
  const int first = cfg.range.first_scored_frame();
  parallel_for(static_cast<int>(targets.size()), cfg.jobs, [&](int i) {
    const ExecutionEntry& e = *targets[i];
    const KinematicErrors ke = kinematic_errors(ds, e, cfg);
    const auto labels = ds.labels(e);
    const auto inputs = detail::model_inputs(ds, e, cfg);
    const int n = static_cast<int>(inputs.size()) + 1;
    if (static_cast<int>(labels.size()) < n) throw FormatError(e.id + ": labels.csv has fewer rows than frames");
    nn::ErrorPredictor predict(model, inputs);
    scoring::AnomalyTrace trace{e.id, {}};
    for (int t = 1; t < n; ++t) {
      scoring::TraceRow row;
      row.frame = t;
      row.e_c = ke.e_c[t - 1];
      row.e_b = ke.e_b[t - 1];
      row.e_o = t >= first ? predict(t, cfg.range, cfg.seed) : 0.0;
      row.score = scoring::fuse(row.e_c, row.e_b, row.e_o, r.thresholds);
      row.label = labels[t];
      trace.rows.push_back(row);
    }
    scoring::write_trace_csv(trace, r.dir / "traces" / (e.id + ".csv"));

    if (hmm_model) {
      const auto seq = hmm::to_sequence(read_features_csv(ds.derived(e, "flow/features.csv")));
      const auto s = hmm::anomaly_scores(*hmm_model, seq);
      scoring::AnomalyTrace ht{e.id, {}};
      for (int t = 1; t < n; ++t) ht.rows.push_back({t, 0.0, 0.0, s[t - 1], s[t - 1], labels[t]});
      scoring::write_trace_csv(ht, cfg.root / "scores" / "hmm" / "traces" / (e.id + ".csv"));
    }
  });

  const nlohmann::json th = {{"e_c_thres", r.thresholds.e_c_thres},
                             {"e_b_thres", r.thresholds.e_b_thres},
                             {"policy", cfg.thresholds.policy == ThresholdPolicy::train_max ? "train_max" : "fixed"},
                             {"train_frames", threshold_frames}};
  detail::write_text_atomic(r.dir / "thresholds.json", th.dump(2) + "\n");
  r.executions = static_cast<int>(targets.size());
  log::info("score: " + std::to_string(r.executions) + " traces in " + r.dir.string() + " (e_c threshold " +
            detail::num(r.thresholds.e_c_thres) + ", e_b threshold " + detail::num(r.thresholds.e_b_thres) + ")");
  return r;
}

}  // namespace motad::pipeline
