#include "motad/synth/world.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "motad/errors.hpp"

namespace motad::synth {

namespace {

using Vec2 = Eigen::Vector2d;
constexpr double kPi = std::numbers::pi;

constexpr double kGravity = 0.4;             // px / frame^2, falling book
constexpr double kShakeAmplitude = 3.0;      // px, per-frame uniform jitter
constexpr double kDeviationAmplitude = 0.15; // rad on the shoulder joint
constexpr double kDeviationPeriod = 12.0;    // frames
constexpr double kReleaseAt = 0.48;          // fraction of the execution

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent generator per aspect of the scene so that anomalous and
// nominal executions with the same seed share background and script.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  return std::mt19937_64(splitmix(seed ^ splitmix(tag)));
}

double quintic(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double smooth_step(double t) { return 0.5 - 0.5 * std::cos(kPi * std::clamp(t, 0.0, 1.0)); }

struct Keyframe {
  double s;
  JointState q;
};

// Rest, approach over the shelf, short lowering for the release, lift, retract.
constexpr std::array<Keyframe, 6> kScript{{
    {0.00, {-0.85, 1.50, 0.45}},
    {0.03, {-0.86, 1.47, 0.44}},
    {0.40, {-1.25, 0.95, 0.25}},
    {0.48, {-1.12, 0.96, 0.30}},
    {0.60, {-1.25, 1.00, 0.22}},
    {1.00, {-0.80, 1.70, 0.55}},
}};

JointState scripted_joints(double s) {
  s = std::clamp(s, 0.0, 1.0);
  std::size_t k = 0;
  while (k + 2 < kScript.size() && s > kScript[k + 1].s) ++k;
  const auto& a = kScript[k];
  const auto& b = kScript[k + 1];
  const double w = smooth_step((s - a.s) / (b.s - a.s));
  JointState q{};
  for (int i = 0; i < 3; ++i) q[i] = a.q[i] + w * (b.q[i] - a.q[i]);
  return q;
}

struct ArmPose {
  std::array<Vec2, 4> joints;  // base, elbow, wrist, tip
  Vec2 book;                   // centre of a held book
};

double capsule_coverage(const Vec2& p, const Vec2& a, const Vec2& b, double r) {
  const Vec2 ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  const double d = (p - (a + t * ab)).norm();
  return std::clamp(r + 0.5 - d, 0.0, 1.0);
}

double rect_coverage(const Vec2& p, const Vec2& c, const Vec2& half) {
  const double cx = std::clamp(half.x() + 0.5 - std::fabs(p.x() - c.x()), 0.0, 1.0);
  const double cy = std::clamp(half.y() + 0.5 - std::fabs(p.y() - c.y()), 0.0, 1.0);
  return cx * cy;
}

using Rgb = std::array<double, 3>;

Rgb blend(const Rgb& under, const Rgb& over, double alpha) {
  return {under[0] + alpha * (over[0] - under[0]), under[1] + alpha * (over[1] - under[1]),
          under[2] + alpha * (over[2] - under[2])};
}

class Scene {
 public:
  explicit Scene(const ScenarioConfig& cfg)
      : cfg_(cfg),
        scale_(cfg.image_side / 64.0),
        texture_(splitmix(cfg.seed ^ 0x7e47u),
                 std::max(1, static_cast<int>(std::lround(4.0 * cfg.texture_complexity))),
                 16.0 * scale_),
        chroma_(splitmix(cfg.seed ^ 0xc4a0u), 2, 24.0 * scale_),
        occluder_noise_(splitmix(cfg.seed ^ 0x0cc1u), 2, 20.0 * scale_) {
    auto rng = stream(cfg.seed, 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double angle = cfg.pan_angle ? *cfg.pan_angle : 2.0 * kPi * u01(rng);
    pan_dir_ = {std::cos(angle), std::sin(angle)};
    wobble_phase_ = {2.0 * kPi * u01(rng), 2.0 * kPi * u01(rng)};
    for (double& c : tint_) c = 0.8 + 0.4 * u01(rng);

    release_ = static_cast<int>(std::lround(kReleaseAt * (cfg.T - 1)));
    const Vec2 held = arm_pose(commanded(release_)).book;
    book_world_ = held - background_shift(release_);

    shake_.assign(static_cast<std::size_t>(cfg.T), Vec2::Zero());
    if (cfg.anomaly == AnomalyKind::camera_shake) {
      auto srng = stream(cfg.seed, 2);
      std::uniform_real_distribution<double> j(-kShakeAmplitude, kShakeAmplitude);
      for (int t = cfg.anomaly_onset; t < cfg.T; ++t) shake_[t] = {j(srng), j(srng)};
    }
    auto orng = stream(cfg.seed, 3);
    occluder_centre_ = Vec2(cfg.image_side / 2.0 + (u01(orng) - 0.5) * 8.0 * scale_,
                            cfg.image_side / 2.0 + (u01(orng) - 0.5) * 8.0 * scale_);
    occluder_phase_ = {2.0 * kPi * u01(orng), 2.0 * kPi * u01(orng)};
  }

  bool anomalous(int t) const { return cfg_.anomaly != AnomalyKind::none && t >= cfg_.anomaly_onset; }

  Vec2 background_shift(int t) const {
    const double w1 = 2.0 * kPi / 40.0;
    const double w2 = 2.0 * kPi / 55.0;
    const Vec2 wobble(std::sin(w1 * t + wobble_phase_.x()) - std::sin(wobble_phase_.x()),
                      0.6 * (std::sin(w2 * t + wobble_phase_.y()) - std::sin(wobble_phase_.y())));
    return cfg_.pan_speed * t * pan_dir_ + cfg_.pan_wobble * wobble;
  }

  JointState commanded(int t) const {
    return scripted_joints(cfg_.T > 1 ? static_cast<double>(t) / (cfg_.T - 1) : 0.0);
  }

  JointState actual(int t) const {
    JointState q = commanded(t);
    if (cfg_.anomaly == AnomalyKind::arm_deviation && anomalous(t)) {
      const int k = t - cfg_.anomaly_onset;
      q[0] += kDeviationAmplitude * std::sin(2.0 * kPi * (k + 1.5) / kDeviationPeriod);
    }
    return q;
  }

  static constexpr std::array<double, 3> kRadius{4.5, 4.0, 3.0};

  ArmPose arm_pose(const JointState& q) const {
    static constexpr std::array<double, 3> kLength{22.0, 18.0, 6.0};
    ArmPose p;
    p.joints[0] = Vec2(6.0, 58.0) * scale_;
    double a = 0.0;
    for (int i = 0; i < 3; ++i) {
      a += q[i];
      p.joints[i + 1] = p.joints[i] + kLength[i] * scale_ * Vec2(std::cos(a), std::sin(a));
    }
    p.book = p.joints[3] + Vec2(0.0, 4.0) * scale_;
    return p;
  }

  double arm_coverage(const ArmPose& pose, const Vec2& p) const {
    double c = 0.0;
    for (int i = 0; i < 3; ++i) {
      c = std::max(c, capsule_coverage(p, pose.joints[i], pose.joints[i + 1], kRadius[i] * scale_));
    }
    return c;
  }

  // Painted bands across each link, in [0.6, 1]; they give both the real and
  // the rendered arm texture along its length.
  double arm_marking(const ArmPose& pose, const Vec2& p) const {
    double best = 1e30;
    double shade = 1.0;
    for (int i = 0; i < 3; ++i) {
      const Vec2 ab = pose.joints[i + 1] - pose.joints[i];
      const double len = ab.norm();
      const double s = std::clamp((p - pose.joints[i]).dot(ab) / (len * len), 0.0, 1.0);
      const double d = (p - (pose.joints[i] + s * ab)).norm() - kRadius[i] * scale_;
      if (d < best) {
        best = d;
        shade = 0.8 + 0.2 * std::cos(2.0 * kPi * s * len / (5.0 * scale_));
      }
    }
    return shade;
  }

  Vec2 book_half() const { return Vec2(5.0, 3.0) * scale_; }

  bool held_nominally(int t) const { return t < release_; }

  // Centre of the real book at frame t.
  Vec2 real_book(int t) const {
    const bool falling = cfg_.anomaly == AnomalyKind::falling_object && anomalous(t);
    if (!falling) {
      return held_nominally(t) ? arm_pose(actual(t)).book : book_world_ + background_shift(t);
    }
    const int onset = cfg_.anomaly_onset;
    const Vec2 start = held_nominally(onset) ? arm_pose(actual(onset)).book
                                             : book_world_ + background_shift(onset);
    const double k = t - onset;
    return start + background_shift(t) - background_shift(onset) + Vec2(0.0, 0.5 * kGravity * k * k);
  }

  Rgb background(const Vec2& p, int t) const {
    const Vec2 w = p - background_shift(t);
    const double n = std::clamp(0.5 + 1.8 * (texture_(w.x(), w.y()) - 0.5), 0.0, 1.0);
    const double lum = 0.12 + 0.5 * n;
    const double c = 0.15 * (chroma_(w.x(), w.y()) - 0.5);
    Rgb rgb{lum * tint_[0] * (1.0 + c), lum * tint_[1], lum * tint_[2] * (1.0 - c)};
    const Vec2 shelf_centre = book_world_ + Vec2(0.0, book_half().y() + 1.5 * scale_);
    const double shelf = rect_coverage(w, shelf_centre, Vec2(16.0, 1.5) * scale_);
    return blend(rgb, {0.42, 0.28, 0.14}, shelf);
  }

  Rgb real_pixel(const Vec2& p, int t, bool with_robot) const {
    Rgb px = background(p, t);
    static constexpr Rgb kBookColour{0.85, 0.2, 0.15};
    if (with_robot) px = blend(px, kBookColour, rect_coverage(p, real_book(t), book_half()));
    if (with_robot) {
      const ArmPose pose = arm_pose(actual(t));
      const double m = arm_marking(pose, p);
      px = blend(px, {0.93 * m, 0.9 * m, 0.85 * m}, arm_coverage(pose, p));
    }
    if (cfg_.anomaly == AnomalyKind::occlusion && anomalous(t)) {
      const Vec2 c = occluder_centre(t);
      const double a = 0.52 * cfg_.image_side;
      const double b = 0.47 * cfg_.image_side;
      const Vec2 d = p - c;
      const double rho = std::hypot(d.x() / a, d.y() / b);
      const double alpha = std::clamp(0.5 - (rho - 1.0) * b, 0.0, 1.0);
      const double shade = 0.9 + 0.2 * occluder_noise_(d.x(), d.y());
      px = blend(px, {0.22 * shade, 0.2 * shade, 0.18 * shade}, alpha);
    }
    return px;
  }

  Vec2 occluder_centre(int t) const {
    const double k = t - cfg_.anomaly_onset;
    return occluder_centre_ + 5.0 * scale_ *
                                  Vec2(std::sin(2.0 * kPi * k / 16.0 + occluder_phase_.x()),
                                       std::cos(2.0 * kPi * k / 13.0 + occluder_phase_.y()));
  }

  Image render_real(int t, bool with_robot) const {
    const int n = cfg_.image_side;
    Image img(n, n, 3);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        // Shake displaces everything the camera sees.
        const Vec2 p = Vec2(x, y) - shake_[t];
        const Rgb c = real_pixel(p, t, with_robot);
        for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = static_cast<float>(std::clamp(c[ch], 0.0, 1.0));
      }
    }
    return img;
  }

  // The robot model (arm with its markings, plus the book) shaded in gray on
  // black; fully covered pixels are at least 0.54.
  Image render_model(int t) const {
    const int n = cfg_.image_side;
    Image img(n, n, 1);
    const ArmPose pose = arm_pose(commanded(t));
    // After the release the book is drawn where the robot placed it, seen
    // from the reported camera pose.
    const Vec2 book = held_nominally(t) ? pose.book : book_world_ + background_shift(t);
    for (int y = 0; y < n; ++y) {
      for (int x = 0; x < n; ++x) {
        const Vec2 p(x, y);
        double v = 0.6 * rect_coverage(p, book, book_half());
        v += arm_coverage(pose, p) * (0.9 * arm_marking(pose, p) - v);
        img.at(x, y) = static_cast<float>(v);
      }
    }
    return img;
  }

 private:
  ScenarioConfig cfg_;
  double scale_;
  ValueNoise texture_;
  ValueNoise chroma_;
  ValueNoise occluder_noise_;
  Vec2 pan_dir_;
  Vec2 wobble_phase_;
  Rgb tint_{};
  int release_ = 0;
  Vec2 book_world_;
  std::vector<Vec2> shake_;
  Vec2 occluder_centre_;
  Vec2 occluder_phase_;
};

}  // namespace

std::string_view to_string(AnomalyKind k) {
  switch (k) {
    case AnomalyKind::none: return "none";
    case AnomalyKind::falling_object: return "falling_object";
    case AnomalyKind::occlusion: return "occlusion";
    case AnomalyKind::camera_shake: return "camera_shake";
    case AnomalyKind::arm_deviation: return "arm_deviation";
  }
  return "none";
}

AnomalyKind anomaly_from_string(std::string_view name) {
  for (auto k : {AnomalyKind::none, AnomalyKind::falling_object, AnomalyKind::occlusion,
                 AnomalyKind::camera_shake, AnomalyKind::arm_deviation}) {
    if (to_string(k) == name) return k;
  }
  throw InvalidArgument("unknown anomaly kind '" + std::string(name) + "'");
}

void ScenarioConfig::validate() const {
  if (T < 2) throw InvalidArgument("scenario needs at least 2 frames");
  if (image_side < 16 || image_side % 2 != 0) throw InvalidArgument("image_side must be even and >= 16");
  if (anomaly != AnomalyKind::none && (anomaly_onset < 0 || anomaly_onset >= T)) {
    throw InvalidArgument("anomaly_onset must lie in [0, T)");
  }
  if (!(texture_complexity > 0.0)) throw InvalidArgument("texture_complexity must be positive");
  if (!(depth > 0.0)) throw InvalidArgument("depth must be positive");
  if (!(pan_speed >= 0.0) || !std::isfinite(pan_speed) || !std::isfinite(pan_wobble)) {
    throw InvalidArgument("pan parameters must be finite, speed non-negative");
  }
}

ValueNoise::ValueNoise(std::uint64_t seed, int octaves, double base_period)
    : seed_(seed), octaves_(octaves), base_period_(base_period) {
  if (octaves < 1 || !(base_period > 0.0)) throw InvalidArgument("bad value-noise parameters");
}

double ValueNoise::lattice(std::int64_t ix, std::int64_t iy, int octave) const {
  std::uint64_t h = splitmix(seed_ + static_cast<std::uint64_t>(octave));
  h = splitmix(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix(h ^ static_cast<std::uint64_t>(iy));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double ValueNoise::operator()(double x, double y) const {
  double sum = 0.0;
  double norm = 0.0;
  double amp = 1.0;
  double period = base_period_;
  for (int o = 0; o < octaves_; ++o) {
    const double fx = x / period;
    const double fy = y / period;
    const double x0 = std::floor(fx);
    const double y0 = std::floor(fy);
    const auto ix = static_cast<std::int64_t>(x0);
    const auto iy = static_cast<std::int64_t>(y0);
    const double sx = quintic(fx - x0);
    const double sy = quintic(fy - y0);
    const double top = lattice(ix, iy, o) + sx * (lattice(ix + 1, iy, o) - lattice(ix, iy, o));
    const double bot =
        lattice(ix, iy + 1, o) + sx * (lattice(ix + 1, iy + 1, o) - lattice(ix, iy + 1, o));
    sum += amp * (top + sy * (bot - top));
    norm += amp;
    amp *= 0.6;
    period *= 0.5;
  }
  return sum / norm;
}

Execution generate(const ScenarioConfig& cfg) {
  cfg.validate();
  const Scene scene(cfg);
  Execution ex;
  ex.id = cfg.id.empty() ? "exec_" + std::to_string(cfg.seed) : cfg.id;
  ex.depth = cfg.depth;
  const double f = 80.0 * cfg.image_side / 64.0;
  ex.intrinsics = {f, f, cfg.image_side / 2.0, cfg.image_side / 2.0};
  for (int t = 0; t < cfg.T; ++t) {
    ex.frames_real.push_back(scene.render_real(t, true));
    ex.frames_rendered.push_back(scene.render_model(t));
    ex.joints.push_back(scene.commanded(t));
    const Vec2 s = scene.background_shift(t);
    CameraPose pose;
    // Content shifts by f * dt / Z in the image when the camera frame moves by dt.
    pose.translation = {s.x() * cfg.depth / ex.intrinsics.fx, s.y() * cfg.depth / ex.intrinsics.fy, 0.0};
    ex.camera.push_back(pose);
    ex.labels.push_back(scene.anomalous(t));
  }
  return ex;
}

Image render_real_frame(const ScenarioConfig& cfg, int t, bool include_robot) {
  cfg.validate();
  if (t < 0 || t >= cfg.T) throw InvalidArgument("frame index out of range");
  return Scene(cfg).render_real(t, include_robot);
}

kinematics::RelativeCameraMotion ground_truth_camera_motion(const Execution& exec, int t) {
  if (t < 1 || t >= static_cast<int>(exec.camera.size())) {
    throw InvalidArgument("camera motion needs 1 <= t < T");
  }
  const CameraPose& a = exec.camera[t - 1];
  const CameraPose& b = exec.camera[t];
  kinematics::RelativeCameraMotion m;
  m.rotation = b.rotation * a.rotation.transpose();
  m.translation = b.translation - m.rotation * a.translation;
  return m;
}

}  // namespace motad::synth
