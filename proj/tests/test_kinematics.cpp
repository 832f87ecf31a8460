#include <doctest.h>

#include <Eigen/Geometry>
#include <cmath>
#include <random>

#include "motad/errors.hpp"
#include "motad/kinematics/expectation.hpp"
#include "support/oracles.hpp"

using namespace motad;
using namespace motad::kinematics;

namespace {

const CameraIntrinsics kCam{100, 100, 32, 32};

Eigen::Matrix3d rot(double ax, double ay, double az) {
  return (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) * Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
          Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
      .toRotationMatrix();
}

}  // namespace

TEST_CASE("pure translation shifts every point by f t / Z") {
  RelativeCameraMotion m;
  m.translation = {0.1, 0, 0};
  const auto pts = interior_grid(64, 64);
  const auto pairs = expected_correspondences(kCam, m, DepthModel::uniform(2.0), pts);
  for (const auto& c : pairs) {
    CHECK(c.to.x - c.from.x == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(c.to.y - c.from.y == doctest::Approx(0.0));
  }
  const auto tf = fit_similarity(pairs);
  CHECK(tf.tx == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(std::fabs(tf.ty) < 1e-12);
  CHECK(tf.sigma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::fabs(tf.theta) < 1e-12);
}

TEST_CASE("general form reduces to the translation form at machine precision") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const auto pts = interior_grid(64, 64);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d t(u(rng), u(rng), u(rng) * 0.1);
    const double z = 1.5 + std::fabs(u(rng)) * 5;
    RelativeCameraMotion pure;
    pure.translation = t;
    // A rotation equal to identity but not bitwise identical forces the
    // general path through K R K^-1.
    RelativeCameraMotion general = pure;
    general.rotation = rot(1e-300, 0, 0);
    REQUIRE(!general.is_pure_translation());
    const auto a = expected_correspondences(kCam, pure, DepthModel::uniform(z), pts);
    const auto b = expected_correspondences(kCam, general, DepthModel::uniform(z), pts);
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(std::fabs(a[k].to.x - b[k].to.x) < 1e-12);
      CHECK(std::fabs(a[k].to.y - b[k].to.y) < 1e-12);
    }
  }
}

TEST_CASE("fit_similarity recovers constructed transforms") {
  std::mt19937 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 200; ++i) {
    const SimilarityTransform truth{u(rng) * 10, u(rng) * 10, std::exp(u(rng) * 0.5), u(rng) * 3};
    std::vector<Correspondence> pairs;
    const int n = 2 + static_cast<int>(rng() % 30);
    for (int k = 0; k < n; ++k) {
      Correspondence c{{u(rng) * 50, u(rng) * 50}, {}};
      truth.apply(c.from.x, c.from.y, c.to.x, c.to.y);
      pairs.push_back(c);
    }
    const auto fit = fit_similarity(pairs);
    CHECK(std::fabs(fit.tx - truth.tx) < 1e-9);
    CHECK(std::fabs(fit.ty - truth.ty) < 1e-9);
    CHECK(std::fabs(fit.sigma - truth.sigma) < 1e-9);
    CHECK(std::fabs(wrap_angle(fit.theta - truth.theta)) < 1e-9);
  }
  std::vector<Correspondence> same(3, Correspondence{{1, 1}, {2, 2}});
  CHECK_THROWS_AS(fit_similarity(same), DegenerateConfiguration);
  CHECK_THROWS_AS(fit_similarity(std::vector<Correspondence>(1)), InvalidArgument);
}

TEST_CASE("rotation about the optical axis maps to an in-plane rotation") {
  RelativeCameraMotion m;
  m.rotation = rot(0, 0, 0.05);
  const auto tf = expected_transform(kCam, m, DepthModel::uniform(2.0), 64, 64);
  CHECK(tf.theta == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(tf.sigma == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("invalid camera inputs") {
  RelativeCameraMotion m;
  m.rotation(0, 0) = 2;
  const auto pts = interior_grid(8, 8, 2);
  CHECK_THROWS_AS(expected_correspondences(kCam, m, DepthModel::uniform(1), pts), InvalidArgument);
  CHECK_THROWS_AS(DepthModel::uniform(0), InvalidArgument);
  CHECK_THROWS_AS(expected_correspondences({0, 1, 0, 0}, {}, DepthModel::uniform(1), pts), InvalidArgument);
  CHECK_THROWS_AS(expected_correspondences(kCam, {}, DepthModel::per_point({1, 2}), pts), InvalidArgument);
}

TEST_CASE("camera_error examples") {
  const SimilarityTransform e{1.0, 2.0, 1.0, 0.0};
  const SimilarityTransform o{1.5, 1.8, 1.1, 0.0};
  CHECK(camera_error(e, o) == doctest::Approx(0.7));
  CHECK(camera_error(e, o, {1.0, 10.0, 0.0}) == doctest::Approx(1.7));
  CHECK(camera_error({0, 0, 1, 0}, {0, 0, 1.1, 0}, {1.0, 10.0, 0.0}) == doctest::Approx(1.0));
  CHECK(camera_error(e, e) == 0.0);
}

TEST_CASE("body_mask fills enclosed holes and dilates") {
  SUBCASE("square without dilation") {
    Image img(20, 20);
    for (int y = 5; y < 15; ++y) {
      for (int x = 5; x < 15; ++x) img.at(x, y) = 1.f;
    }
    CHECK(body_mask(img, 0.5f, 0).count() == 100);
    // Disk of radius 2 adds a band around the square.
    const Mask d = body_mask(img, 0.5f, 2);
    CHECK(d.get(3, 10));
    CHECK(!d.get(2, 10));
    CHECK(!d.get(3, 3));
  }
  SUBCASE("random blobs match the flood-fill oracle") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const int w = 8 + static_cast<int>(rng() % 20), h = 8 + static_cast<int>(rng() % 20);
      Image img(w, h);
      std::vector<std::uint8_t> fg(static_cast<std::size_t>(w) * h);
      // Rings and random pixels so there are enclosed holes.
      const double cx = w / 2.0, cy = h / 2.0, r = 2 + rng() % 3;
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const double d = std::hypot(x - cx, y - cy);
          const bool on = std::fabs(d - r) < 0.8 || rng() % 5 == 0;
          img.at(x, y) = on ? 0.9f : 0.1f;
          fg[static_cast<std::size_t>(y) * w + x] = on;
        }
      }
      const auto expect = oracle::flood_fill_holes(fg, w, h);
      const Mask got = body_mask(img, 0.5f, 0);
      for (std::size_t i = 0; i < expect.size(); ++i) CHECK(got[i] == (expect[i] != 0));
    }
  }
  SUBCASE("annulus interior is filled") {
    Image img(32, 32);
    std::vector<std::uint8_t> fg(32 * 32);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double d = std::hypot(x - 15.5, y - 15.5);
        const bool on = d >= 6 && d <= 9;
        img.at(x, y) = on ? 1.f : 0.f;
        fg[static_cast<std::size_t>(y) * 32 + x] = on;
      }
    }
    const Mask m = body_mask(img, 0.5f, 0);
    CHECK(m.get(15, 15));
    const auto expect = oracle::flood_fill_holes(fg, 32, 32);
    for (std::size_t i = 0; i < expect.size(); ++i) CHECK(m[i] == (expect[i] != 0));
  }
  SUBCASE("empty render gives an empty mask") { CHECK(!body_mask(Image(8, 8), 0.5f).any()); }
}

TEST_CASE("body_error examples") {
  FlowField obs(4, 4), ren(4, 4);
  for (auto& v : obs.dx_plane()) v = 3.f;
  for (auto& v : obs.dy_plane()) v = 1.f;
  for (auto& v : ren.dx_plane()) v = 1.f;
  for (auto& v : ren.dy_plane()) v = 0.f;
  Mask m(4, 4);
  m.set(1, 1, true);
  m.set(2, 2, true);
  CHECK(body_error(obs, ren, m) == doctest::Approx(3.0));
  CHECK(body_error(obs, ren, Mask(4, 4)) == 0.0);
  CHECK_THROWS_AS(body_error(obs, ren, Mask(3, 4)), InvalidArgument);
}
