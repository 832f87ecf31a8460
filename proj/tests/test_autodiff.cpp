#include <doctest.h>

#include <cmath>
#include <random>

#include "motad/errors.hpp"
#include "motad/neural/tensor.hpp"
#include "support/gradcheck.hpp"

using namespace motad;
using nn::Tensor;

namespace {

constexpr int kCasesPerOp = 25;

// Direct 7-loop convolution with zero padding.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3), o = w.dim(0), k = w.dim(2);
  std::vector<double> out(static_cast<std::size_t>(n) * o * h * wd);
  for (int s = 0; s < n; ++s)
    for (int oc = 0; oc < o; ++oc)
      for (int y = 0; y < h; ++y)
        for (int xx = 0; xx < wd; ++xx) {
          double acc = b.data()[oc];
          for (int ic = 0; ic < c; ++ic)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int sy = y + ky - k / 2, sx = xx + kx - k / 2;
                if (sy < 0 || sy >= h || sx < 0 || sx >= wd) continue;
                acc += w.data()[((oc * c + ic) * k + ky) * k + kx] * x.data()[((s * c + ic) * h + sy) * wd + sx];
              }
          out[((s * o + oc) * h + y) * wd + xx] = acc;
        }
  return out;
}

}  // namespace

TEST_CASE("every op matches central finite differences on randomized small tensors") {
  std::mt19937_64 rng(2024);
  for (const auto& op : testing::op_cases()) {
    for (int i = 0; i < kCasesPerOp; ++i) {
      const auto res = op.run(rng);
      INFO(op.op << " case " << i << ": " << res.detail);
      CHECK(res.ok);
    }
  }
}

TEST_CASE("conv2d forward equals a direct loop") {
  std::mt19937_64 rng(7);
  for (int k : {1, 3, 5}) {
    const Tensor x = testing::random_tensor({2, 3, 6, 5}, rng, 1.0, false);
    const Tensor w = testing::random_tensor({4, 3, k, k}, rng, 1.0, false);
    const Tensor b = testing::random_tensor({4}, rng, 1.0, false);
    const auto want = naive_conv(x, w, b);
    const Tensor y = nn::conv2d(x, w, b);
    REQUIRE(y.numel() == want.size());
    for (std::size_t i = 0; i < want.size(); ++i) CHECK(y.data()[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
}

TEST_CASE("pool, upsample and global pool forward values") {
  const Tensor x = Tensor::from({1, 1, 2, 4}, {1, 2, 3, 4, 5, 6, 7, 8});
  const Tensor p = nn::avg_pool2(x);
  CHECK(p.shape() == nn::Shape{1, 1, 1, 2});
  CHECK(p.data()[0] == 3.5);
  CHECK(p.data()[1] == 5.5);
  const Tensor u = nn::upsample2(p);
  CHECK(u.shape() == nn::Shape{1, 1, 2, 4});
  CHECK(u.data()[0] == 3.5);
  CHECK(u.data()[5] == 3.5);
  CHECK(u.data()[7] == 5.5);
  CHECK(nn::global_avg_pool(x).item() == 4.5);
}

TEST_CASE("kl_diag closed forms") {
  auto kl1 = [](double mq, double sq, double mp, double sp) {
    return nn::kl_diag(Tensor::from({1, 1}, {mq}), Tensor::from({1, 1}, {std::log(sq)}), Tensor::from({1, 1}, {mp}),
                       Tensor::from({1, 1}, {std::log(sp)}))
        .item();
  };
  CHECK(std::fabs(kl1(0, 1, 0, 1)) <= 1e-12);
  CHECK(kl1(1, 1, 0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(kl1(0, 2, 0, 1) == doctest::Approx(std::log(0.5) + 2.0 - 0.5).epsilon(1e-12));
  // Sum over D, mean over N.
  const Tensor z = Tensor::zeros({2, 3});
  const Tensor m = Tensor::from({2, 3}, {1, 1, 1, 1, 1, 1});
  CHECK(nn::kl_diag(m, z, z, z).item() == doctest::Approx(1.5));
}

TEST_CASE("a tensor used twice accumulates both gradient paths") {
  const Tensor x = Tensor::from({1, 3}, {1.0, -2.0, 0.5}, true);
  const Tensor y = nn::add(nn::scale(x, 3.0), nn::exp(x));
  const std::vector<double> ones(3, 1.0);
  nn::weighted_sum(y, ones).backward();
  for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(3.0 + std::exp(x.data()[i])));
}

TEST_CASE("NoGradGuard records no graph") {
  const Tensor x = Tensor::from({1, 2}, {1.0, 2.0}, true);
  Tensor y;
  {
    nn::NoGradGuard g;
    CHECK_FALSE(nn::grad_enabled());
    y = nn::scale(x, 2.0);
  }
  CHECK(nn::grad_enabled());
  CHECK_FALSE(y.requires_grad());
  CHECK(y.node()->parents.empty());
}

TEST_CASE("shape errors are reported") {
  const Tensor a = Tensor::zeros({2, 3});
  const Tensor b = Tensor::zeros({3, 2});
  CHECK_THROWS_AS(nn::add(a, b), InvalidArgument);
  CHECK_THROWS_AS(nn::kl_diag(a, a, a, b), InvalidArgument);
  CHECK_THROWS_AS(nn::avg_pool2(Tensor::zeros({1, 1, 3, 4})), InvalidArgument);
  CHECK_THROWS_AS(nn::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1})),
                  InvalidArgument);
  CHECK_THROWS_AS(nn::slice_columns(a, 2, 2), InvalidArgument);
  CHECK_THROWS_AS(a.backward(), InvalidArgument);
  CHECK_THROWS_AS(Tensor::from({2}, {1.0}), InvalidArgument);
}
