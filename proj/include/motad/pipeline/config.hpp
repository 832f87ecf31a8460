#pragma once
// Pipeline configuration: one JSON document, every key optional, unknown keys
// rejected. Command-line flags are applied on top of the parsed file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "motad/flow/tvl1.hpp"
#include "motad/kinematics/expectation.hpp"
#include "motad/neural/prob_unet.hpp"
#include "motad/neural/training.hpp"
#include "motad/neural/variants.hpp"

namespace motad::pipeline {

struct DatasetConfig {
  int T = 100;
  int image_side = 64;
  int n_train = 48;
  int n_val = 6;
  int n_test_nominal = 7;
  int n_anomalous_per_kind = 15;
};

struct FlowConfig {
  flow::TvL1Params tvl1;
  /// true: flow on native frames, then resized to the model side; false: flow
  /// on frames resized first. Only the network-input caches are affected.
  bool native_resolution = true;
  float mask_threshold = 0.5f;
  int mask_dilation = 2;  // native pixels; scaled for smaller caches
};

struct TrainingConfig {
  int epochs = 10;
  int batch = 32;
  double lr = 1e-4;
};

enum class ThresholdPolicy { train_max, fixed };

struct ThresholdConfig {
  ThresholdPolicy policy = ThresholdPolicy::train_max;
  double e_c = 0.0;  // used by the fixed policy
  double e_b = 0.0;
};

struct HmmConfig {
  bool enabled = true;
  int n_states = 5;
  int max_iters = 100;
  double tol = 1e-6;
  double var_floor = 1e-6;
};

struct SweepConfig {
  std::vector<int> A{1, 3, 5, 7};
  std::vector<int> B{0, 2, 4};
};

struct PipelineConfig {
  std::filesystem::path root = "motad_data";
  std::uint64_t seed = 0;
  nn::Variant variant = nn::Variant::masked;
  nn::RangeConfig range;
  nn::ProbUNetConfig model = nn::ProbUNetConfig::desk();
  TrainingConfig train;
  FlowConfig flow;
  ThresholdConfig thresholds;
  HmmConfig hmm;
  DatasetConfig dataset;
  SweepConfig sweep;
  double depth = 2.0;                                     // metres, scene plane
  std::optional<kinematics::CameraIntrinsics> intrinsics; // overrides camera.csv
  kinematics::CameraErrorWeights camera_weights;
  bool include_warmup = false;
  int jobs = 1;
  /// When set, every dataset read is appended here (command, split, execution, artifact).
  std::optional<std::filesystem::path> access_log;

  /// Throws ValidationError naming the offending field.
  void validate() const;
};

/// Parses and validates. Throws ValidationError on syntax errors, unknown
/// keys, wrong types or invalid values.
PipelineConfig parse_config(std::string_view json_text);
/// Throws ValidationError when the file cannot be read.
PipelineConfig load_config(const std::filesystem::path& path);
/// Every field, so the output parses back to an equal configuration.
std::string to_json(const PipelineConfig& cfg);

/// Stable 64-bit FNV-1a hash, used to tag artifacts with the settings that
/// produced them.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace motad::pipeline
