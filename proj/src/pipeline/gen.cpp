#include <cstdio>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/imaging/io.hpp"
#include "motad/log.hpp"
#include "motad/pipeline/parallel.hpp"
#include "motad/pipeline/stages.hpp"
#include "motad/synth/world.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;

namespace {

constexpr const char* kAnomalyKinds[] = {"falling_object", "occlusion", "camera_shake", "arm_deviation"};

std::string numbered(std::string_view prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "_%03d", i);
  return std::string(prefix) + buf;
}

void write_execution(const synth::Execution& ex, const fs::path& dir) {
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "rendered");
  for (int t = 0; t < ex.length(); ++t) {
    write_png(ex.frames_real[t], frame_path(dir, FrameStream::rgb, t));
    write_png(ex.frames_rendered[t], frame_path(dir, FrameStream::rendered, t));
  }
  std::vector<std::array<double, 3>> joints(ex.joints.begin(), ex.joints.end());
  write_joints_csv(joints, dir / "joints.csv");
  std::vector<CameraRecord> cams;
  for (const auto& p : ex.camera) {
    CameraRecord c;
    c.intrinsics = ex.intrinsics;
    c.pose.leftCols<3>() = p.rotation;
    c.pose.col(3) = p.translation;
    cams.push_back(c);
  }
  write_camera_csv(cams, dir / "camera.csv");
  write_labels_csv(ex.labels, dir / "labels.csv");
}

// Removes what a previous gen (and the stages after it) wrote under root.
void clear_dataset(const fs::path& root, const Manifest& planned) {
  if (fs::exists(manifest_path(root))) {
    try {
      for (const auto& e : read_manifest(root).executions) fs::remove_all(root / e.id);
    } catch (const FormatError& e) {
      log::warn(std::string("ignoring unreadable manifest while clearing: ") + e.what());
    }
  }
  for (const auto& e : planned.executions) fs::remove_all(root / e.id);
  for (const char* d : {"models", "scores", "eval", "sweep"}) fs::remove_all(root / d);
  fs::remove(root / "flow_report.json");
  fs::remove(manifest_path(root));
}

}  // namespace

int draw_onset(std::string_view kind, int T, std::mt19937_64& rng) {
  if (T < 2) throw InvalidArgument("onset needs T >= 2");
  int lo = 0, hi = 0;
  if (kind == "falling_object") {
    // The book rests on the shelf from about half-way; it can only fall after that.
    lo = std::max(T / 2 + 1, T - 18);
    hi = std::max(lo, T - 12);
  } else {
    lo = T / 3;
    hi = std::max(lo, 2 * T / 3);
  }
  lo = std::clamp(lo, 1, T - 1);
  hi = std::clamp(hi, lo, T - 1);
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Manifest plan_dataset(const PipelineConfig& cfg) {
  const auto& d = cfg.dataset;
  Manifest m;
  m.seed = cfg.seed;
  m.T = d.T;
  m.image_side = d.image_side;
  std::mt19937_64 onset_rng(detail::splitmix(cfg.seed ^ 0x6f6e736574ULL));
  std::uint64_t index = 0;
  auto add = [&](std::string id, Split s, std::string kind) {
    ExecutionEntry e;
    e.id = std::move(id);
    e.split = s;
    e.seed = detail::splitmix(cfg.seed * 0x100000001b3ULL + index++);
    if (kind != "none") e.onset = draw_onset(kind, d.T, onset_rng);
    e.kind = std::move(kind);
    m.executions.push_back(std::move(e));
  };
  for (int i = 0; i < d.n_train; ++i) add(numbered("train", i), Split::train, "none");
  for (int i = 0; i < d.n_val; ++i) add(numbered("val", i), Split::val, "none");
  for (int i = 0; i < d.n_test_nominal; ++i) add(numbered("test_nominal", i), Split::test, "none");
  for (const char* kind : kAnomalyKinds) {
    for (int i = 0; i < d.n_anomalous_per_kind; ++i) add(numbered(std::string("test_") + kind, i), Split::test, kind);
  }
  return m;
}

GenReport cmd_gen(const PipelineConfig& cfg, bool force) {
  cfg.validate();
  const fs::path& root = cfg.root;
  const Manifest m = plan_dataset(cfg);
  if (fs::exists(root) && !fs::is_directory(root)) throw ValidationError(root.string() + " is not a directory");
  if (fs::exists(root) && !fs::is_empty(root)) {
    if (!force) throw ValidationError("dataset root " + root.string() + " is not empty; pass --force to regenerate");
    clear_dataset(root, m);
  }
  fs::create_directories(root);
  parallel_for(static_cast<int>(m.executions.size()), cfg.jobs, [&](int i) {
    const ExecutionEntry& e = m.executions[i];
    synth::ScenarioConfig sc;
    sc.seed = e.seed;
    sc.T = cfg.dataset.T;
    sc.image_side = cfg.dataset.image_side;
    sc.anomaly = synth::anomaly_from_string(e.kind);
    sc.anomaly_onset = e.nominal() ? 0 : e.onset;
    sc.depth = cfg.depth;
    sc.id = e.id;
    write_execution(synth::generate(sc), root / e.id);
  });
  // Written last: a manifest means every execution directory is complete.
  write_manifest(m, root);
  log::info("gen: wrote " + std::to_string(m.executions.size()) + " executions to " + root.string());
  return {static_cast<int>(m.executions.size())};
}

}  // namespace motad::pipeline
