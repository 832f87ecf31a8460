#pragma once
// On-disk dataset layout and the only sanctioned way to read it.
//
//   <root>/manifest.json                     split membership
//   <root>/<id>/rgb/%06d.png                 real frames, 0-based
//   <root>/<id>/rendered/%06d.png            robot-model renderings
//   <root>/<id>/joints.csv                   frame,q1,q2,q3
//   <root>/<id>/camera.csv                   frame,fx,fy,cx,cy,r11..r33 with t as 3x4 row-major
//   <root>/<id>/labels.csv                   frame,is_anomaly
//   <root>/<id>/flow/<stream>/%06d.flo       file t holds the flow from frame t-1 to t

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "motad/imaging/types.hpp"
#include "motad/kinematics/expectation.hpp"

namespace motad::pipeline {

enum class Split { train, val, test };
std::string_view to_string(Split s);
/// Throws FormatError.
Split split_from_string(std::string_view s);

struct ExecutionEntry {
  std::string id;
  Split split = Split::train;
  std::string kind = "none";  // anomaly kind; "none" for nominal executions
  int onset = -1;             // first anomalous frame, -1 when nominal
  std::uint64_t seed = 0;     // generator seed (0 for recorded data)

  bool nominal() const { return kind == "none"; }
};

struct Manifest {
  int version = 1;
  std::uint64_t seed = 0;
  int T = 0;
  int image_side = 0;
  std::vector<ExecutionEntry> executions;

  std::vector<const ExecutionEntry*> in_split(Split s) const;
  /// Throws InvalidArgument for an unknown id.
  const ExecutionEntry& find(std::string_view id) const;
};

std::filesystem::path manifest_path(const std::filesystem::path& root);
/// Deterministic bytes for equal manifests.
void write_manifest(const Manifest& m, const std::filesystem::path& root);
/// Throws MissingStage("gen") when absent and FormatError when malformed.
Manifest read_manifest(const std::filesystem::path& root);

struct CameraRecord {
  kinematics::CameraIntrinsics intrinsics;
  Eigen::Matrix<double, 3, 4> pose = Eigen::Matrix<double, 3, 4>::Zero();  // [R | t], world to camera
};

/// Relative motion from camera a to camera b: X_b = R X_a + t.
kinematics::RelativeCameraMotion relative_motion(const CameraRecord& a, const CameraRecord& b);

void write_joints_csv(const std::vector<std::array<double, 3>>& q, const std::filesystem::path& path);
void write_camera_csv(const std::vector<CameraRecord>& cams, const std::filesystem::path& path);
void write_labels_csv(const std::vector<bool>& labels, const std::filesystem::path& path);
std::vector<std::array<double, 3>> read_joints_csv(const std::filesystem::path& path);
std::vector<CameraRecord> read_camera_csv(const std::filesystem::path& path);
std::vector<bool> read_labels_csv(const std::filesystem::path& path);

enum class FrameStream { rgb, rendered };

std::filesystem::path frame_path(const std::filesystem::path& exec_dir, FrameStream s, int frame);
/// stream is "real", "rendered" or a variant name.
std::filesystem::path flow_path(const std::filesystem::path& exec_dir, std::string_view stream, int t);
/// Number of consecutive frames 000000.png, 000001.png, ... in the rgb directory.
int count_frames(const std::filesystem::path& exec_dir);

/// Appends one tab-separated line per read: command, split, execution, artifact.
class AccessLog {
 public:
  AccessLog(const std::filesystem::path& path, std::string command);
  void record(Split split, std::string_view exec_id, std::string_view artifact);

 private:
  std::string command_;
  std::mutex mu_;
  std::ofstream os_;
};

struct AccessRecord {
  std::string command;
  Split split;
  std::string execution;
  std::string artifact;
};
/// Throws FormatError.
std::vector<AccessRecord> read_access_log(const std::filesystem::path& path);

/// Read access to the executions of a manifest, each read attributed to the
/// execution's split. Thread-safe.
class Dataset {
 public:
  Dataset(std::filesystem::path root, Manifest manifest, AccessLog* log = nullptr);

  const std::filesystem::path& root() const { return root_; }
  const Manifest& manifest() const { return manifest_; }
  std::filesystem::path exec_dir(std::string_view id) const { return root_ / std::string(id); }

  Image frame(const ExecutionEntry& e, FrameStream s, int t) const;
  std::vector<CameraRecord> camera(const ExecutionEntry& e) const;
  std::vector<bool> labels(const ExecutionEntry& e) const;
  /// Flows 1..n of a stream, so element i holds the flow from frame i to i+1.
  /// Throws MissingStage("flow") when any file is absent.
  std::vector<FlowField> flows(const ExecutionEntry& e, std::string_view stream, int n) const;
  /// Path of an execution-level derived file (e.g. flow/registration.csv); logs the access.
  std::filesystem::path derived(const ExecutionEntry& e, std::string_view relative) const;
  /// Logs a read of an artifact stored outside the execution directory.
  void note(const ExecutionEntry& e, std::string_view artifact) const;

 private:
  std::filesystem::path root_;
  Manifest manifest_;
  AccessLog* log_;
};

}  // namespace motad::pipeline
