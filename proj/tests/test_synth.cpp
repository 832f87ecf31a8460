#include <doctest.h>

#include <cmath>
#include <numeric>

#include "motad/errors.hpp"
#include "motad/flow/tvl1.hpp"
#include "motad/imaging/ops.hpp"
#include "motad/kinematics/expectation.hpp"
#include "motad/registration/fourier_mellin.hpp"
#include "motad/synth/world.hpp"

using namespace motad;
using namespace motad::synth;

namespace {

ScenarioConfig scenario(std::uint64_t seed, AnomalyKind kind = AnomalyKind::none, int onset = 50) {
  ScenarioConfig c;
  c.seed = seed;
  c.anomaly = kind;
  c.anomaly_onset = onset;
  return c;
}

struct Centroid {
  double x = 0.0, y = 0.0, n = 0.0;
};

template <class Pred>
Centroid centroid(int w, int h, Pred pred) {
  Centroid c;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!pred(x, y)) continue;
      c.x += x;
      c.y += y;
      c.n += 1.0;
    }
  }
  if (c.n > 0) {
    c.x /= c.n;
    c.y /= c.n;
  }
  return c;
}

bool is_book_red(const Image& rgb, int x, int y) {
  return rgb.at(x, y, 0) > 0.6f && rgb.at(x, y, 1) < 0.35f && rgb.at(x, y, 2) < 0.35f;
}

}  // namespace

TEST_CASE("same config gives byte-identical executions") {
  const auto cfg = scenario(11, AnomalyKind::camera_shake, 30);
  const auto a = generate(cfg);
  const auto b = generate(cfg);
  CHECK(a.frames_real == b.frames_real);
  CHECK(a.frames_rendered == b.frames_rendered);
  CHECK(a.joints == b.joints);
  CHECK(a.labels == b.labels);
  for (std::size_t t = 0; t < a.camera.size(); ++t) {
    CHECK(a.camera[t].translation == b.camera[t].translation);
  }
  const auto c = generate(scenario(12, AnomalyKind::camera_shake, 30));
  CHECK(a.frames_real != c.frames_real);
}

TEST_CASE("execution shape and id") {
  auto cfg = scenario(3);
  cfg.T = 12;
  const auto ex = generate(cfg);
  CHECK(ex.id == "exec_3");
  CHECK(ex.length() == 12);
  CHECK(ex.frames_rendered.size() == 12);
  CHECK(ex.joints.size() == 12);
  CHECK(ex.camera.size() == 12);
  CHECK(ex.labels.size() == 12);
  CHECK(ex.rate_hz == 10.0);
  CHECK(ex.frames_real[0].channels() == 3);
  CHECK(ex.frames_rendered[0].channels() == 1);
  CHECK(ex.frames_real[0].width() == 64);
  cfg.id = "custom";
  CHECK(generate(cfg).id == "custom");
}

TEST_CASE("nominal labels are all false") {
  const auto ex = generate(scenario(4));
  CHECK(std::none_of(ex.labels.begin(), ex.labels.end(), [](bool b) { return b; }));
}

TEST_CASE("labels switch on at the onset and stay on") {
  const auto ex = generate(scenario(5, AnomalyKind::camera_shake, 50));
  for (int t = 0; t < 100; ++t) CHECK(ex.labels[t] == (t >= 50));
  for (auto kind : {AnomalyKind::falling_object, AnomalyKind::occlusion, AnomalyKind::arm_deviation}) {
    auto cfg = scenario(6, kind, 37);
    cfg.T = 60;
    const auto labels = generate(cfg).labels;
    CHECK(std::is_sorted(labels.begin(), labels.end()));
    CHECK(labels.front() == false);
    CHECK(labels.back() == true);
  }
}

TEST_CASE("anomaly names round-trip") {
  for (auto k : {AnomalyKind::none, AnomalyKind::falling_object, AnomalyKind::occlusion,
                 AnomalyKind::camera_shake, AnomalyKind::arm_deviation}) {
    CHECK(anomaly_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(anomaly_from_string("meteor"), InvalidArgument);
}

TEST_CASE("invalid scenarios are rejected") {
  auto cfg = scenario(1);
  cfg.T = 1;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = scenario(1);
  cfg.image_side = 63;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = scenario(1, AnomalyKind::occlusion, 100);
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = scenario(1);
  cfg.depth = 0.0;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
  cfg = scenario(1);
  cfg.texture_complexity = 0.0;
  CHECK_THROWS_AS(generate(cfg), InvalidArgument);
}

TEST_CASE("robot in the real frames sits where the rendering puts it") {
  auto cfg = scenario(21);
  const auto ex = generate(cfg);
  for (int t = 0; t < cfg.T; t += 3) {
    const Image full = to_gray(ex.frames_real[t]);
    const Image scene = to_gray(render_real_frame(cfg, t, false));
    const Image& rend = ex.frames_rendered[t];
    const auto real_c = centroid(64, 64, [&](int x, int y) { return full.at(x, y) != scene.at(x, y); });
    const auto rend_c = centroid(64, 64, [&](int x, int y) { return rend.at(x, y) > 0.f; });
    REQUIRE(rend_c.n > 0);
    CHECK(std::hypot(real_c.x - rend_c.x, real_c.y - rend_c.y) < 1.0);
  }
}

TEST_CASE("rendered frames have a black background and a bright model") {
  const auto ex = generate(scenario(8));
  for (int t : {0, 40, 80}) {
    const Image& r = ex.frames_rendered[t];
    const auto mask = kinematics::body_mask(r, 0.5f, 0);
    CHECK(mask.count() > 150);
    CHECK(r.at(63, 0) == 0.f);
  }
}

TEST_CASE("static camera reports identity motion") {
  auto cfg = scenario(2);
  cfg.pan_speed = 0.0;
  cfg.pan_wobble = 0.0;
  cfg.T = 10;
  const auto ex = generate(cfg);
  for (int t = 1; t < cfg.T; ++t) {
    const auto m = ground_truth_camera_motion(ex, t);
    CHECK(m.rotation == Eigen::Matrix3d::Identity());
    CHECK(m.translation.norm() == 0.0);
  }
}

TEST_CASE("scripted 0.2 px pan projects to (0.2, 0)") {
  auto cfg = scenario(2);
  cfg.pan_speed = 0.2;
  cfg.pan_wobble = 0.0;
  cfg.pan_angle = 0.0;
  cfg.T = 10;
  const auto ex = generate(cfg);
  for (int t = 1; t < cfg.T; ++t) {
    const auto m = ground_truth_camera_motion(ex, t);
    // Independent route: pure-translation projection by hand, x' - x = f t / Z.
    CHECK(ex.intrinsics.fx * m.translation.x() / ex.depth == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(std::fabs(m.translation.y()) < 1e-15);
    const auto tf = kinematics::expected_transform(ex.intrinsics, m, kinematics::DepthModel::uniform(ex.depth), 64, 64);
    CHECK(tf.tx == doctest::Approx(0.2).epsilon(1e-9));
    CHECK(std::fabs(tf.ty) < 1e-9);
  }
  CHECK_THROWS_AS(ground_truth_camera_motion(ex, 0), InvalidArgument);
  CHECK_THROWS_AS(ground_truth_camera_motion(ex, cfg.T), InvalidArgument);
}

TEST_CASE("camera shake is not part of the reported trajectory") {
  const auto nominal = generate(scenario(9));
  const auto shaken = generate(scenario(9, AnomalyKind::camera_shake, 20));
  for (int t = 1; t < 100; ++t) {
    CHECK(ground_truth_camera_motion(shaken, t).translation == ground_truth_camera_motion(nominal, t).translation);
  }
  CHECK(nominal.frames_real[10] == shaken.frames_real[10]);
  // The jitter itself: bounded by the amplitude, roughly zero mean.
  double mx = 0.0;
  double my = 0.0;
  int n = 0;
  for (int t = 20; t < 100; t += 4) {
    const auto r = registration::register_similarity(to_gray(nominal.frames_real[t]), to_gray(shaken.frames_real[t]));
    CHECK(std::fabs(r.transform.tx) < 3.3);
    CHECK(std::fabs(r.transform.ty) < 3.3);
    mx += r.transform.tx;
    my += r.transform.ty;
    ++n;
  }
  CHECK(std::fabs(mx / n) < 1.0);
  CHECK(std::fabs(my / n) < 1.0);
}

TEST_CASE("occluder covers at least 60 percent of the frame") {
  const auto nominal = generate(scenario(13));
  const auto occluded = generate(scenario(13, AnomalyKind::occlusion, 30));
  CHECK(nominal.frames_real[29] == occluded.frames_real[29]);
  for (int t = 30; t < 100; t += 7) {
    std::size_t changed = 0;
    auto a = nominal.frames_real[t].data();
    auto b = occluded.frames_real[t].data();
    for (std::size_t i = 0; i < a.size(); i += 3) {
      if (a[i] != b[i] || a[i + 1] != b[i + 1] || a[i + 2] != b[i + 2]) ++changed;
    }
    CHECK(static_cast<double>(changed) / (64 * 64) >= 0.6);
  }
}

TEST_CASE("falling book accelerates at 0.4 px per frame squared") {
  auto cfg = scenario(14, AnomalyKind::falling_object, 88);
  cfg.pan_speed = 0.0;
  cfg.pan_wobble = 0.0;
  const auto ex = generate(cfg);
  std::vector<double> ys;
  for (int t = 88; t < 94; ++t) {
    const Image& f = ex.frames_real[t];
    const auto c = centroid(64, 64, [&](int x, int y) { return is_book_red(f, x, y); });
    REQUIRE(c.n > 30);
    ys.push_back(c.y);
  }
  for (std::size_t i = 1; i + 1 < ys.size(); ++i) {
    CHECK(ys[i + 1] - 2 * ys[i] + ys[i - 1] == doctest::Approx(0.4).epsilon(0.15));
  }
  // The robot still believes the book is on the shelf.
  auto nominal_cfg = cfg;
  nominal_cfg.anomaly = AnomalyKind::none;
  CHECK(ex.frames_rendered == generate(nominal_cfg).frames_rendered);
}

TEST_CASE("arm deviation changes the real arm only") {
  const auto nominal = generate(scenario(15));
  const auto dev = generate(scenario(15, AnomalyKind::arm_deviation, 40));
  CHECK(dev.frames_rendered == nominal.frames_rendered);
  CHECK(dev.joints == nominal.joints);
  CHECK(dev.frames_real[39] == nominal.frames_real[39]);
  for (int t = 40; t < 100; t += 5) CHECK(dev.frames_real[t] != nominal.frames_real[t]);
}

TEST_CASE("nominal executions: registration agrees with the expected camera motion, body error small") {
  for (std::uint64_t seed : {31u, 32u}) {
    const auto ex = generate(scenario(seed));
    const auto depth = kinematics::DepthModel::uniform(ex.depth);
    for (int t = 1; t < ex.length(); ++t) {
      const Image a = to_gray(ex.frames_real[t - 1]);
      const Image b = to_gray(ex.frames_real[t]);
      const Mask prev = kinematics::body_mask(ex.frames_rendered[t - 1], 0.5f);
      const Mask both = prev | kinematics::body_mask(ex.frames_rendered[t], 0.5f);
      const auto reg = registration::register_similarity(a, b, &both);
      const auto expected = kinematics::expected_transform(ex.intrinsics, ground_truth_camera_motion(ex, t), depth, 64, 64);
      CHECK(std::fabs(reg.transform.tx - expected.tx) < 0.5);
      CHECK(std::fabs(reg.transform.ty - expected.ty) < 0.5);
      const auto observed = flow::compute_flow(a, b);
      const auto rendered = flow::compute_flow(ex.frames_rendered[t - 1], ex.frames_rendered[t]);
      CHECK(kinematics::body_error(observed, rendered, prev) < 0.5);
    }
  }
}

TEST_CASE("value noise is continuous and bounded") {
  const ValueNoise n(5, 4, 16.0);
  for (double x = -40.0; x < 40.0; x += 0.37) {
    const double v = n(x, 0.5 * x);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(std::fabs(n(x + 1e-6, 0.5 * x) - v) < 1e-4);
  }
  CHECK_THROWS_AS(ValueNoise(1, 0, 4.0), InvalidArgument);
}
