#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "motad/errors.hpp"
#include "motad/flow/tvl1.hpp"
#include "motad/log.hpp"
#include "support/oracles.hpp"

using namespace motad;
using motad::flow::compute_flow;
using motad::flow::TvL1Params;

namespace {

double interior_epe(const FlowField& f, double ex, double ey, int border = 8) {
  double s = 0.0;
  int n = 0;
  for (int y = border; y < f.height() - border; ++y) {
    for (int x = border; x < f.width() - border; ++x) {
      s += std::hypot(f.dx(x, y) - ex, f.dy(x, y) - ey);
      ++n;
    }
  }
  return s / n;
}

}  // namespace

TEST_CASE("static pair gives near-zero flow") {
  const oracle::PeriodicTexture tex(3);
  const Image img = tex.render();
  const FlowField f = compute_flow(img, img);
  float worst = 0.f;
  for (std::size_t i = 0; i < f.pixel_count(); ++i) {
    worst = std::max(worst, std::hypot(f.dx_plane()[i], f.dy_plane()[i]));
  }
  CHECK(worst < 0.05f);
}

TEST_CASE("translated periodic texture is recovered") {
  for (std::uint32_t seed : {1u, 2u, 3u, 4u}) {
    CAPTURE(seed);
    const oracle::PeriodicTexture tex(seed);
    const Image a = tex.render();
    const Image b1 = tex.render(1, 0);
    const Image b2 = tex.render(3, 2);
    const FlowField f1 = compute_flow(a, b1);
    const FlowField f2 = compute_flow(a, b2);
    CHECK(interior_epe(f1, 1, 0) < 0.3);
    CHECK(interior_epe(f2, 3, 2) < 0.5);

    const FlowField r1 = compute_flow(b1, a);
    double s = 0.0;
    for (std::size_t i = 0; i < f1.pixel_count(); ++i) {
      s += std::hypot(f1.dx_plane()[i] + r1.dx_plane()[i], f1.dy_plane()[i] + r1.dy_plane()[i]);
    }
    CHECK(s / f1.pixel_count() < 0.2);
  }
}

TEST_CASE("energy does not increase over inner iterations at the finest level") {
  for (std::uint32_t seed : {5u, 6u, 7u}) {
    const oracle::PeriodicTexture tex(seed);
    flow::TvL1Diagnostics diag;
    compute_flow(tex.render(), tex.render(1.5, -0.5), {}, &diag);
    REQUIRE(!diag.finest_energy.empty());
    for (const auto& warp : diag.finest_energy) {
      for (std::size_t i = 1; i < warp.size(); ++i) {
        CAPTURE(i);
        CHECK(warp[i] <= warp[i - 1] + 1e-6 * std::max(1.0, std::fabs(warp[i - 1])));
      }
    }
  }
}

TEST_CASE("small images reduce the pyramid with a warning") {
  std::vector<std::string> warnings;
  log::set_sink([&](log::Level l, std::string_view m) {
    if (l == log::Level::warn) warnings.emplace_back(m);
  });
  const oracle::PeriodicTexture tex(9, 16);
  flow::TvL1Diagnostics diag;
  const FlowField f = compute_flow(tex.render(), tex.render(1, 0), {}, &diag);
  log::set_sink({});
  CHECK(diag.scales_used < 5);
  CHECK(diag.scales_used >= 1);
  CHECK(!warnings.empty());
  CHECK(f.all_finite());
}

TEST_CASE("argument validation") {
  CHECK_THROWS_AS(compute_flow(Image(8, 8), Image(8, 9)), InvalidArgument);
  CHECK_THROWS_AS(compute_flow(Image(8, 8, 3), Image(8, 8, 3)), InvalidArgument);
  TvL1Params p;
  p.zoom = 1.0;
  CHECK_THROWS_AS(p.validate(), InvalidArgument);
  p = {};
  p.lambda = 0;
  CHECK_THROWS_AS(compute_flow(Image(8, 8), Image(8, 8), p), InvalidArgument);
}

TEST_CASE("deterministic and finite on random inputs") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  log::set_level(log::Level::error);
  for (int trial = 0; trial < 12; ++trial) {
    const int w = 4 + static_cast<int>(rng() % 40);
    const int h = 4 + static_cast<int>(rng() % 40);
    Image a(w, h);
    Image b(w, h);
    const int mode = trial % 3;
    for (auto& v : a.data()) v = mode == 0 ? 0.5f : u(rng);
    for (auto& v : b.data()) v = mode == 1 ? 1.f : u(rng);
    const FlowField f = compute_flow(a, b);
    CHECK(f.all_finite());
    CHECK(compute_flow(a, b) == f);
  }
  log::set_level(log::Level::info);
}
