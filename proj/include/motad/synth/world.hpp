#pragma once
// Procedural stand-in for a recorded robot execution: a textured scene seen
// by a panning camera, an articulated arm carrying a book, the matching
// silhouette-only rendering, and frame-level anomaly labels.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "motad/imaging/types.hpp"
#include "motad/kinematics/expectation.hpp"

namespace motad::synth {

enum class AnomalyKind { none, falling_object, occlusion, camera_shake, arm_deviation };

std::string_view to_string(AnomalyKind k);
/// Throws InvalidArgument for unknown names.
AnomalyKind anomaly_from_string(std::string_view name);

struct ScenarioConfig {
  std::uint64_t seed = 0;
  int T = 100;
  int image_side = 64;
  AnomalyKind anomaly = AnomalyKind::none;
  int anomaly_onset = 50;
  double texture_complexity = 1.0;  // 1.0 = four noise octaves
  double pan_speed = 0.3;           // background drift, px/frame
  double pan_wobble = 1.0;          // amplitude of the slow sinusoidal pan component, px
  std::optional<double> pan_angle;  // radians; drawn from the seed when unset
  double depth = 2.0;               // metres, background plane
  std::string id;                   // defaults to "exec_<seed>"

  /// T >= 2, even side >= 16, onset in [0, T) for anomalous scenarios,
  /// positive depth and complexity. Throws InvalidArgument.
  void validate() const;
};

using JointState = std::array<double, 3>;

/// World-to-camera extrinsics, X_cam = R X_world + t.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();
};

struct Execution {
  std::string id;
  std::vector<Image> frames_real;      // RGB
  std::vector<Image> frames_rendered;  // gray silhouette of the arm and the book
  std::vector<JointState> joints;      // commanded (scripted) joint angles
  kinematics::CameraIntrinsics intrinsics;
  std::vector<CameraPose> camera;      // reported poses, disturbances excluded
  std::vector<bool> labels;
  double depth = 2.0;
  double rate_hz = 10.0;

  int length() const { return static_cast<int>(frames_real.size()); }
};

/// Deterministic in the config: equal configs give identical executions.
Execution generate(const ScenarioConfig& cfg);

/// Frame t of the real stream. With include_robot false the arm and the book
/// are left out while the rest of the scene (including an occluder or shake)
/// is kept; the difference locates what the rendered stream models.
Image render_real_frame(const ScenarioConfig& cfg, int t, bool include_robot = true);

/// Relative motion from the camera at frame t-1 to frame t, from the reported
/// poses. Requires 1 <= t < T.
kinematics::RelativeCameraMotion ground_truth_camera_motion(const Execution& exec, int t);

/// Continuous value-noise field; sampling at shifted coordinates gives exactly
/// shifted images.
class ValueNoise {
 public:
  ValueNoise(std::uint64_t seed, int octaves, double base_period);
  double operator()(double x, double y) const;  // in [0, 1]

 private:
  double lattice(std::int64_t ix, std::int64_t iy, int octave) const;
  std::uint64_t seed_;
  int octaves_;
  double base_period_;
};

}  // namespace motad::synth
