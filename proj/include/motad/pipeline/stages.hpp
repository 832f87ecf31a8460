#pragma once
// The six pipeline commands. Each reads the manifest, touches only the splits
// it needs, and writes its artifacts under the dataset root:
//
//   models/<variant>_A<a>_B<b>.pun (+ .json)   checkpoint and training log
//   models/hmm.json                            HMM baseline
//   scores/<tag>/traces/<id>.csv               per-execution traces
//   scores/<tag>/thresholds.json
//   scores/hmm/traces/<id>.csv                 HMM baseline traces
//   eval/<tag>/metrics.json, curves.png, traces/<id>.png
//   sweep/sweep_<variant>_M<m>.csv
//
// with <tag> = <variant>_A<a>_B<b>_M<m>.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "motad/hmm/gaussian_hmm.hpp"
#include "motad/pipeline/config.hpp"
#include "motad/pipeline/dataset.hpp"
#include "motad/scoring/metrics.hpp"

namespace motad::pipeline {

// ---- artifact names ---------------------------------------------------------

std::string checkpoint_tag(const PipelineConfig& cfg);
std::string score_tag(const PipelineConfig& cfg);
std::filesystem::path checkpoint_path(const PipelineConfig& cfg);
std::filesystem::path score_dir(const PipelineConfig& cfg);
std::filesystem::path eval_dir(const PipelineConfig& cfg);

/// Opens cfg.access_log for `command`, or returns null when logging is off.
std::unique_ptr<AccessLog> open_access_log(const PipelineConfig& cfg, const std::string& command);

// ---- gen --------------------------------------------------------------------

/// Onset for an anomalous execution of length T: falling objects late (after
/// the book is placed), the other kinds in the middle third.
int draw_onset(std::string_view kind, int T, std::mt19937_64& rng);

/// The manifest gen would write for this config (ids, splits, kinds, onsets, seeds).
Manifest plan_dataset(const PipelineConfig& cfg);

struct GenReport {
  int executions = 0;
};
/// Writes the synthetic dataset. A non-empty root needs force; with force the
/// executions and derived directories of an existing dataset are removed
/// first. Throws ValidationError.
GenReport cmd_gen(const PipelineConfig& cfg, bool force);

// ---- flow -------------------------------------------------------------------

/// Network-input cache streams written per execution, besides "real" and "rendered".
inline constexpr const char* kVariantStreams[] = {"raw", "registered", "masked", "masked_registered"};

/// Body mask at the resolution of the network-input caches: the union of the
/// masks of both frames of the pair, computed on resized renderings.
Mask cache_mask(const Image& rendered_prev, const Image& rendered_next, const PipelineConfig& cfg);

struct FlowReport {
  int processed = 0;
  int up_to_date = 0;
  std::size_t files_written = 0;
  std::vector<std::pair<std::string, std::string>> skipped;  // id, reason
};
/// Computes every flow stream, the per-frame registration and HMM features.
/// Executions whose outputs are newer than their frames and were produced by
/// the same settings are left alone unless force. Unreadable executions are
/// skipped and listed in <root>/flow_report.json. Throws MissingStage("gen").
FlowReport cmd_flow(const PipelineConfig& cfg, bool force);

/// Observed similarity per flow index t (frame t-1 to t), origin-referenced.
struct RegistrationRow {
  int frame = 0;
  SimilarityTransform transform;
  double peak = 0.0;
  bool low_confidence = false;
};
std::vector<RegistrationRow> read_registration_csv(const std::filesystem::path& path);
std::vector<hmm::FeatureVector> read_features_csv(const std::filesystem::path& path);

// ---- train ------------------------------------------------------------------

struct TrainReport {
  std::filesystem::path checkpoint;
  std::vector<double> epoch_loss;
  bool reused = false;  // an up-to-date checkpoint was already present
  int sequences = 0;
  std::optional<std::filesystem::path> hmm_model;
};
/// Trains on the train split. Throws MissingStage("flow").
TrainReport cmd_train(const PipelineConfig& cfg, bool force);

void save_hmm(const hmm::GaussianHmm& model, const std::filesystem::path& path);
hmm::GaussianHmm load_hmm(const std::filesystem::path& path);

// ---- score ------------------------------------------------------------------

/// Camera and body errors for flow indices 1..n-1 of one execution.
struct KinematicErrors {
  std::vector<double> e_c;
  std::vector<double> e_b;
};
KinematicErrors kinematic_errors(const Dataset& ds, const ExecutionEntry& e, const PipelineConfig& cfg);

struct ScoreReport {
  scoring::Thresholds thresholds;
  int executions = 0;
  std::filesystem::path dir;
};
/// Thresholds from the train split, traces for the val and test splits.
/// Throws MissingStage("train") without a checkpoint.
ScoreReport cmd_score(const PipelineConfig& cfg);

// ---- eval -------------------------------------------------------------------

struct MetricPair {
  double auc_roc = 0.0;
  double auc_pr = 0.0;
};

struct EvalReport {
  MetricPair fused;
  MetricPair of_only;
  std::optional<MetricPair> hmm;
  /// Nominal test executions plus those of one anomaly kind.
  std::map<std::string, MetricPair> fused_by_kind;
  std::map<std::string, MetricPair> of_only_by_kind;
  std::size_t frames = 0;
  std::size_t anomalous_frames = 0;
  int executions = 0;
  double nominal_threshold_fraction = 0.0;  // nominal test frames in the threshold branch
  double e_o_above_one_fraction = 0.0;
  std::optional<double> alarm_level;        // largest validation e_o
};
/// Pools the scored test frames. Throws MissingStage("score") and
/// SingleClassError when the test split lacks one class.
EvalReport evaluate(const PipelineConfig& cfg);
/// evaluate, then writes metrics.json, curves.png and one trace plot per test execution.
EvalReport cmd_eval(const PipelineConfig& cfg);

// ---- sweep ------------------------------------------------------------------

struct SweepCell {
  int A = 0;
  int B = 0;
  MetricPair fused;
  MetricPair of_only;
};
/// Trains (when absent), scores and evaluates every (A, B) of cfg.sweep and
/// writes the grid as CSV. Returns the cells in row-major order over A then B.
std::vector<SweepCell> cmd_sweep(const PipelineConfig& cfg);
std::filesystem::path sweep_path(const PipelineConfig& cfg);

}  // namespace motad::pipeline
