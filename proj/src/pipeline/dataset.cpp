#include "motad/pipeline/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "common.hpp"
#include "motad/errors.hpp"
#include "motad/imaging/io.hpp"

namespace motad::pipeline {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw InvalidArgument("cannot write " + path.string());
  return os;
}

const char* kJointsHeader = "frame,q1,q2,q3";
const char* kCameraHeader = "frame,fx,fy,cx,cy,r11,r12,r13,t1,r21,r22,r23,t2,r31,r32,r33,t3";
const char* kLabelsHeader = "frame,is_anomaly";

}  // namespace

std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + std::string(s) + "'");
}

std::vector<const ExecutionEntry*> Manifest::in_split(Split s) const {
  std::vector<const ExecutionEntry*> out;
  for (const auto& e : executions) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

const ExecutionEntry& Manifest::find(std::string_view id) const {
  for (const auto& e : executions) {
    if (e.id == id) return e;
  }
  throw InvalidArgument("execution '" + std::string(id) + "' is not in the manifest");
}

fs::path manifest_path(const fs::path& root) { return root / "manifest.json"; }

void write_manifest(const Manifest& m, const fs::path& root) {
  using nlohmann::json;
  json execs = json::array();
  json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  for (const auto& e : m.executions) {
    execs.push_back({{"id", e.id},
                     {"split", std::string(to_string(e.split))},
                     {"kind", e.kind},
                     {"onset", e.onset},
                     {"seed", e.seed}});
    splits[std::string(to_string(e.split))].push_back(e.id);
  }
  const json j = {{"version", m.version}, {"seed", m.seed},     {"T", m.T},
                  {"image_side", m.image_side}, {"splits", splits}, {"executions", execs}};
  auto os = open_out(manifest_path(root));
  os << j.dump(2) << '\n';
}

Manifest read_manifest(const fs::path& root) {
  const fs::path p = manifest_path(root);
  if (!fs::exists(p)) {
    throw MissingStage("gen", "no dataset manifest at " + p.string() + "; run `motad gen` first");
  }
  std::ifstream is(p);
  Manifest m;
  try {
    const auto j = nlohmann::json::parse(is);
    m.version = j.at("version").get<int>();
    if (m.version != 1) throw FormatError("unsupported manifest version " + std::to_string(m.version));
    m.seed = j.at("seed").get<std::uint64_t>();
    m.T = j.at("T").get<int>();
    m.image_side = j.at("image_side").get<int>();
    std::set<std::string> seen;
    for (const auto& e : j.at("executions")) {
      ExecutionEntry x;
      x.id = e.at("id").get<std::string>();
      x.split = split_from_string(e.at("split").get<std::string>());
      x.kind = e.at("kind").get<std::string>();
      x.onset = e.at("onset").get<int>();
      x.seed = e.at("seed").get<std::uint64_t>();
      if (x.id.empty() || x.id.find('/') != std::string::npos || x.id.front() == '.') {
        throw FormatError("invalid execution id '" + x.id + "'");
      }
      if (!seen.insert(x.id).second) throw FormatError("duplicate execution id '" + x.id + "'");
      m.executions.push_back(std::move(x));
    }
    // The splits block mirrors the executions; a disagreement means a hand edit went wrong.
    for (const auto& [name, ids] : j.at("splits").items()) {
      const Split s = split_from_string(name);
      for (const auto& id : ids) {
        if (m.find(id.get<std::string>()).split != s) throw FormatError("split lists disagree for " + id.dump());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
  return m;
}

kinematics::RelativeCameraMotion relative_motion(const CameraRecord& a, const CameraRecord& b) {
  const Eigen::Matrix3d ra = a.pose.leftCols<3>(), rb = b.pose.leftCols<3>();
  const Eigen::Vector3d ta = a.pose.col(3), tb = b.pose.col(3);
  kinematics::RelativeCameraMotion m;
  m.rotation = rb * ra.transpose();
  m.translation = tb - m.rotation * ta;
  return m;
}

void write_joints_csv(const std::vector<std::array<double, 3>>& q, const fs::path& path) {
  auto os = open_out(path);
  os << kJointsHeader << '\n';
  for (std::size_t t = 0; t < q.size(); ++t) {
    os << t << ',' << detail::num(q[t][0]) << ',' << detail::num(q[t][1]) << ',' << detail::num(q[t][2]) << '\n';
  }
}

void write_camera_csv(const std::vector<CameraRecord>& cams, const fs::path& path) {
  auto os = open_out(path);
  os << kCameraHeader << '\n';
  for (std::size_t t = 0; t < cams.size(); ++t) {
    const auto& c = cams[t];
    os << t;
    for (double v : {c.intrinsics.fx, c.intrinsics.fy, c.intrinsics.cx, c.intrinsics.cy}) os << ',' << detail::num(v);
    for (int r = 0; r < 3; ++r) {
      for (int k = 0; k < 4; ++k) os << ',' << detail::num(c.pose(r, k));
    }
    os << '\n';
  }
}

void write_labels_csv(const std::vector<bool>& labels, const fs::path& path) {
  auto os = open_out(path);
  os << kLabelsHeader << '\n';
  for (std::size_t t = 0; t < labels.size(); ++t) os << t << ',' << (labels[t] ? 1 : 0) << '\n';
}

std::vector<std::array<double, 3>> read_joints_csv(const fs::path& path) {
  std::vector<std::array<double, 3>> q;
  for (const auto& r : detail::read_numeric_csv(path, kJointsHeader, 0)) q.push_back({r[1], r[2], r[3]});
  return q;
}

std::vector<CameraRecord> read_camera_csv(const fs::path& path) {
  std::vector<CameraRecord> out;
  for (const auto& r : detail::read_numeric_csv(path, kCameraHeader, 0)) {
    CameraRecord c;
    c.intrinsics = {r[1], r[2], r[3], r[4]};
    for (int i = 0; i < 3; ++i) {
      for (int k = 0; k < 4; ++k) c.pose(i, k) = r[5 + 4 * i + k];
    }
    out.push_back(c);
  }
  return out;
}

std::vector<bool> read_labels_csv(const fs::path& path) {
  std::vector<bool> out;
  for (const auto& r : detail::read_numeric_csv(path, kLabelsHeader, 0)) {
    if (r[1] != 0.0 && r[1] != 1.0) throw FormatError(path.string() + ": is_anomaly must be 0 or 1");
    out.push_back(r[1] == 1.0);
  }
  return out;
}

fs::path frame_path(const fs::path& exec_dir, FrameStream s, int frame) {
  char name[16];
  std::snprintf(name, sizeof name, "%06d.png", frame);
  return exec_dir / (s == FrameStream::rgb ? "rgb" : "rendered") / name;
}

fs::path flow_path(const fs::path& exec_dir, std::string_view stream, int t) {
  char name[16];
  std::snprintf(name, sizeof name, "%06d.flo", t);
  return exec_dir / "flow" / std::string(stream) / name;
}

int count_frames(const fs::path& exec_dir) {
  int n = 0;
  while (fs::exists(frame_path(exec_dir, FrameStream::rgb, n))) ++n;
  return n;
}

AccessLog::AccessLog(const fs::path& path, std::string command)
    : command_(std::move(command)), os_(path, std::ios::app) {
  if (!os_) throw InvalidArgument("cannot open access log " + path.string());
}

void AccessLog::record(Split split, std::string_view exec_id, std::string_view artifact) {
  std::lock_guard lock(mu_);
  os_ << command_ << '\t' << to_string(split) << '\t' << exec_id << '\t' << artifact << '\n';
  os_.flush();
}

std::vector<AccessRecord> read_access_log(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open access log " + path.string());
  std::vector<AccessRecord> out;
  for (std::string line; std::getline(is, line);) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, '\t');) f.push_back(cell);
    if (f.size() != 4) throw FormatError("access log: malformed line '" + line + "'");
    out.push_back({f[0], split_from_string(f[1]), f[2], f[3]});
  }
  return out;
}

Dataset::Dataset(fs::path root, Manifest manifest, AccessLog* log)
    : root_(std::move(root)), manifest_(std::move(manifest)), log_(log) {}

void Dataset::note(const ExecutionEntry& e, std::string_view artifact) const {
  if (log_) log_->record(e.split, e.id, artifact);
}

Image Dataset::frame(const ExecutionEntry& e, FrameStream s, int t) const {
  const fs::path p = frame_path(exec_dir(e.id), s, t);
  note(e, fs::relative(p, exec_dir(e.id)).generic_string());
  return read_png(p);
}

std::vector<CameraRecord> Dataset::camera(const ExecutionEntry& e) const {
  note(e, "camera.csv");
  return read_camera_csv(exec_dir(e.id) / "camera.csv");
}

std::vector<bool> Dataset::labels(const ExecutionEntry& e) const {
  note(e, "labels.csv");
  return read_labels_csv(exec_dir(e.id) / "labels.csv");
}

std::vector<FlowField> Dataset::flows(const ExecutionEntry& e, std::string_view stream, int n) const {
  note(e, "flow/" + std::string(stream));
  std::vector<FlowField> out;
  out.reserve(n);
  for (int t = 1; t <= n; ++t) {
    const fs::path p = flow_path(exec_dir(e.id), stream, t);
    if (!fs::exists(p)) {
      throw MissingStage("flow", "missing " + p.string() + "; run `motad flow` first");
    }
    out.push_back(read_flo(p));
  }
  return out;
}

fs::path Dataset::derived(const ExecutionEntry& e, std::string_view relative) const {
  note(e, relative);
  return exec_dir(e.id) / std::string(relative);
}

}  // namespace motad::pipeline
