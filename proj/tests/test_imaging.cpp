#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <numbers>
#include <random>

#include "motad/errors.hpp"
#include "motad/imaging/io.hpp"
#include "motad/imaging/ops.hpp"
#include "support/oracles.hpp"

using namespace motad;

namespace {

Image random_image(int w, int h, std::uint32_t seed, int c = 1) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Image img(w, h, c);
  for (auto& v : img.data()) v = u(rng);
  return img;
}

FlowField random_flow(int w, int h, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<float> n(0.f, 3.f);
  FlowField f(w, h);
  for (auto& v : f.dx_plane()) v = n(rng);
  for (auto& v : f.dy_plane()) v = n(rng);
  return f;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("motad_test_" + name);
}

}  // namespace

TEST_CASE("image construction validates shape and range") {
  CHECK_THROWS_AS(Image(0, 4), InvalidArgument);
  CHECK_THROWS_AS(Image(4, 4, 2), InvalidArgument);
  CHECK_THROWS_AS(Image(2, 2, 1, std::vector<float>{0.f, 0.5f, 1.f}), InvalidArgument);
  CHECK_THROWS_AS(Image(1, 2, 1, std::vector<float>{0.f, 1.5f}), InvalidArgument);
  CHECK_THROWS_AS(Image(1, 1, 1, std::vector<float>{NAN}), InvalidArgument);
  const Image ok(1, 2, 1, std::vector<float>{0.f, 1.f});
  CHECK(ok.at(0, 1) == 1.f);
}

TEST_CASE("resize_center_crop geometry") {
  SUBCASE("same size is identity") {
    const Image img = random_image(64, 64, 1);
    CHECK(resize_center_crop(img, 64) == img);
  }
  SUBCASE("128x64 crops columns 32..96") {
    const Image img = random_image(128, 64, 2);
    const Image out = resize_center_crop(img, 64);
    REQUIRE(out.width() == 64);
    REQUIRE(out.height() == 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) CHECK(out.at(x, y) == img.at(x + 32, y));
    }
  }
  SUBCASE("640x480 resizes to 85x64 and crops columns 10..74") {
    const Image img = random_image(640, 480, 3);
    const Image resized = resize_bilinear(img, 85, 64);
    const Image out = resize_center_crop(img, 64);
    REQUIRE(out.width() == 64);
    for (int y = 0; y < 64; ++y) {
      for (int x = 0; x < 64; ++x) CHECK(out.at(x, y) == resized.at(x + 10, y));
    }
  }
  SUBCASE("bad sides") {
    const Image img = random_image(32, 16, 4);
    CHECK_THROWS_AS(resize_center_crop(img, 0), InvalidArgument);
    CHECK_THROWS_AS(resize_center_crop(img, 15), InvalidArgument);
  }
  SUBCASE("flow magnitudes follow the resize factor") {
    FlowField f(128, 128);
    for (auto& v : f.dx_plane()) v = 2.f;
    for (auto& v : f.dy_plane()) v = -4.f;
    const FlowField out = resize_center_crop(f, 64);
    CHECK(out.dx(10, 10) == doctest::Approx(1.0));
    CHECK(out.dy(40, 3) == doctest::Approx(-2.0));
  }
}

TEST_CASE("masked_median examples") {
  FlowField f(4, 1);
  Mask m(4, 1, true);
  SUBCASE("uniform field") {
    for (auto& v : f.dx_plane()) v = 2.f;
    for (auto& v : f.dy_plane()) v = 3.f;
    const auto [mx, my] = masked_median(f, m);
    CHECK(mx == 2.f);
    CHECK(my == 3.f);
  }
  SUBCASE("odd count ignores the outlier") {
    f.dx(0, 0) = 1.f;
    f.dx(1, 0) = 100.f;
    f.dx(2, 0) = 2.f;
    m.set(3, 0, false);
    CHECK(masked_median(f, m).first == 2.f);
  }
  SUBCASE("even count takes the lower median") {
    const float vals[] = {3.f, 100.f, 1.f, 2.f};
    for (int i = 0; i < 4; ++i) f.dx(i, 0) = vals[i];
    CHECK(masked_median(f, m).first == 2.f);
    CHECK(oracle::sorted_lower_median({3.f, 100.f, 1.f, 2.f}) == 2.f);
  }
  SUBCASE("empty selection") {
    CHECK_THROWS_AS(masked_median(f, Mask(4, 1)), EmptySelection);
  }
}

TEST_CASE("masked_median matches the sort oracle and is permutation invariant") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 9);
    const int h = 1 + static_cast<int>(rng() % 7);
    FlowField f = random_flow(w, h, rng());
    Mask m(w, h);
    std::vector<float> xs;
    std::vector<float> ys;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (rng() % 3 != 0) {
          m.set(x, y, true);
          xs.push_back(f.dx(x, y));
          ys.push_back(f.dy(x, y));
        }
      }
    }
    if (xs.empty()) continue;
    const auto [mx, my] = masked_median(f, m);
    CHECK(mx == oracle::sorted_lower_median(xs));
    CHECK(my == oracle::sorted_lower_median(ys));

    // Permute selected values among selected pixels.
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < m.pixel_count(); ++i) {
      if (m[i]) idx.push_back(i);
    }
    std::vector<std::size_t> perm = idx;
    std::shuffle(perm.begin(), perm.end(), rng);
    FlowField g = f;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      g.dx_plane()[perm[k]] = f.dx_plane()[idx[k]];
      g.dy_plane()[perm[k]] = f.dy_plane()[idx[k]];
    }
    CHECK(masked_median(g, m) == masked_median(f, m));

    // One outlier moves the median by at most one order statistic.
    if (xs.size() >= 3) {
      std::vector<float> sorted = xs;
      std::sort(sorted.begin(), sorted.end());
      const std::size_t k = (sorted.size() - 1) / 2;
      g = f;
      g.dx_plane()[idx[rng() % idx.size()]] = 1e6f;
      const float moved = masked_median(g, m).first;
      CHECK(moved >= sorted[k]);
      CHECK(moved <= sorted[k + 1]);
    }
  }
}

TEST_CASE("warp_by_similarity") {
  const Image img = random_image(32, 24, 5);
  SUBCASE("identity") { CHECK(warp_by_similarity(img, SimilarityTransform::identity()) == img); }
  SUBCASE("shift there and back") {
    const Image there = warp_by_similarity(img, SimilarityTransform::translation(1, 0));
    CHECK(there.at(5, 5) == img.at(4, 5));
    const Image back = warp_by_similarity(there, SimilarityTransform::translation(-1, 0));
    for (int y = 2; y < 22; ++y) {
      for (int x = 2; x < 30; ++x) CHECK(std::fabs(back.at(x, y) - img.at(x, y)) < 1e-6);
    }
  }
  SUBCASE("quarter turn leaves a symmetric cross unchanged") {
    Image cross(33, 33);
    for (int i = 0; i < 33; ++i) {
      for (int k = 14; k <= 18; ++k) {
        cross.at(i, k) = 1.f;
        cross.at(k, i) = 1.f;
      }
    }
    const auto tf = SimilarityTransform::from_about({0, 0, 1.0, std::numbers::pi / 2}, 16, 16);
    const Image turned = warp_by_similarity(cross, tf);
    for (int y = 0; y < 33; ++y) {
      for (int x = 0; x < 33; ++x) CHECK(std::fabs(turned.at(x, y) - cross.at(x, y)) < 1e-3);
    }
  }
  SUBCASE("transform then inverse restores the interior") {
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> u(-1, 1);
    // Double bilinear interpolation blurs; use a slowly varying image so the
    // residual is interpolation error only.
    const Image smooth = oracle::PlaneWaveTexture(7, 0.025).render(48, 48);
    for (int trial = 0; trial < 20; ++trial) {
      const auto tf = SimilarityTransform::from_about({u(rng), u(rng), 1.0 + 0.05 * u(rng), 0.2 * u(rng)},
                                                      23.5, 23.5);
      const Image back = warp_by_similarity(warp_by_similarity(smooth, tf), tf.inverse());
      double worst = 0.0;
      for (int y = 12; y < 36; ++y) {
        for (int x = 12; x < 36; ++x) worst = std::max(worst, double(std::fabs(back.at(x, y) - smooth.at(x, y))));
      }
      CHECK(worst < 1e-3);
    }
    for (int trial = 0; trial < 10; ++trial) {
      const auto tf = SimilarityTransform::translation(std::round(u(rng) * 3), std::round(u(rng) * 3));
      const Image back = warp_by_similarity(warp_by_similarity(smooth, tf), tf.inverse());
      for (int y = 8; y < 40; ++y) {
        for (int x = 8; x < 40; ++x) CHECK(std::fabs(back.at(x, y) - smooth.at(x, y)) < 1e-3);
      }
    }
  }
}

TEST_CASE("similarity transform algebra") {
  std::mt19937 rng(8);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    const SimilarityTransform a{u(rng), u(rng), std::exp(u(rng) / 10), wrap_angle(u(rng))};
    const SimilarityTransform id = a.compose(a.inverse());
    CHECK(std::fabs(id.tx) < 1e-9);
    CHECK(std::fabs(id.ty) < 1e-9);
    CHECK(std::fabs(id.sigma - 1) < 1e-9);
    CHECK(std::fabs(id.theta) < 1e-9);
    const auto c = a.about(5, -2);
    const auto back = SimilarityTransform::from_about(c, 5, -2);
    CHECK(back.tx == doctest::Approx(a.tx).epsilon(1e-12));
    CHECK(back.ty == doctest::Approx(a.ty).epsilon(1e-12));
  }
  CHECK(wrap_angle(std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(wrap_angle(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
}

TEST_CASE("flo files") {
  SUBCASE("hand-assembled 2x1 layout") {
    FlowField f(2, 1, {1.f, 0.5f}, {-1.f, 0.f});
    const auto bytes = encode_flo(f);
    REQUIRE(bytes.size() == 28);
    auto f32 = [](float v) {
      std::uint32_t u;
      std::memcpy(&u, &v, 4);
      return std::vector<std::uint8_t>{std::uint8_t(u), std::uint8_t(u >> 8), std::uint8_t(u >> 16),
                                       std::uint8_t(u >> 24)};
    };
    std::vector<std::uint8_t> expect;
    for (auto part : {f32(202021.25f), std::vector<std::uint8_t>{2, 0, 0, 0},
                      std::vector<std::uint8_t>{1, 0, 0, 0}, f32(1.f), f32(-1.f), f32(0.5f), f32(0.f)}) {
      expect.insert(expect.end(), part.begin(), part.end());
    }
    CHECK(bytes == expect);
    // 202021.25 is 0x48454C4C... little-endian bytes spell "PIEH".
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PIEH");
  }
  SUBCASE("random round trips are bit exact") {
    for (std::uint32_t s = 0; s < 20; ++s) {
      const FlowField f = random_flow(1 + s % 7, 1 + s % 5, s);
      const auto path = temp_file("rt.flo");
      write_flo(f, path);
      const FlowField g = read_flo(path);
      CHECK(encode_flo(g) == encode_flo(f));
      CHECK(g == f);
    }
  }
  SUBCASE("bad magic and truncation") {
    auto bytes = encode_flo(FlowField(3, 2));
    auto bad = bytes;
    bad[0] ^= 1;
    CHECK_THROWS_AS(decode_flo(bad), FormatError);
    bytes.pop_back();
    CHECK_THROWS_AS(decode_flo(bytes), FormatError);
    CHECK_THROWS_AS(decode_flo({1, 2, 3}), FormatError);
  }
}

TEST_CASE("png and pgm round trips at 8-bit precision") {
  for (int c : {1, 3}) {
    Image img = random_image(13, 7, 9 + c, c);
    for (auto& v : img.data()) v = std::round(v * 255.f) / 255.f;
    const auto path = temp_file(c == 1 ? "g.png" : "c.png");
    write_png(img, path);
    CHECK(read_png(path) == img);
  }
  Image g = random_image(9, 4, 12);
  for (auto& v : g.data()) v = std::round(v * 255.f) / 255.f;
  const auto p = temp_file("g.pgm");
  write_image(g, p);
  CHECK(read_image(p) == g);
  CHECK_THROWS_AS(read_png(temp_file("missing.png")), FormatError);
}

TEST_CASE("gray conversion uses luma weights") {
  Image rgb(1, 1, 3);
  rgb.at(0, 0, 0) = 1.f;
  rgb.at(0, 0, 1) = 0.5f;
  rgb.at(0, 0, 2) = 0.25f;
  CHECK(to_gray(rgb).at(0, 0) == doctest::Approx(0.299 + 0.587 * 0.5 + 0.114 * 0.25));
}
