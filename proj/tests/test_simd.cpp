#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "motad/simd/kernels.hpp"

using namespace motad::simd;

namespace {

std::vector<float> randf(std::size_t n, std::mt19937& rng, float scale = 1.f) {
  std::normal_distribution<float> d(0.f, scale);
  std::vector<float> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

std::vector<double> randd(std::size_t n, std::mt19937& rng) {
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

void check_close(const std::vector<float>& a, const std::vector<float>& b, float tol = 1e-5f) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::fabs(a[i] - b[i]) <= tol * (1.f + std::fabs(a[i])));
  }
}

// Lengths straddling vector widths and tails.
const std::size_t kLengths[] = {0, 1, 3, 7, 8, 9, 15, 16, 17, 31, 64, 100, 257};

}  // namespace

TEST_CASE("scalar table is always available") {
  REQUIRE(table_for(Backend::scalar) != nullptr);
  CHECK(table_for(Backend::scalar)->backend == Backend::scalar);
  CHECK(backend_name(Backend::scalar) == "scalar");
}

TEST_CASE("avx2 kernels agree with the scalar reference") {
  const KernelTable* ref = table_for(Backend::scalar);
  const KernelTable* vec = table_for(Backend::avx2);
  if (vec == nullptr) {
    MESSAGE("AVX2 unavailable on this CPU/build; equivalence not exercised");
    return;
  }
  std::mt19937 rng(1234);
  for (std::size_t n : kLengths) {
    CAPTURE(n);
    {
      const auto x = randf(n, rng);
      auto y1 = randf(n, rng);
      auto y2 = y1;
      ref->axpy_f(0.7f, x.data(), y1.data(), n);
      vec->axpy_f(0.7f, x.data(), y2.data(), n);
      check_close(y1, y2);
    }
    {
      const auto rho = randf(n, rng, 3.f);
      const auto gx = randf(n, rng);
      auto gy = randf(n, rng);
      if (n > 2) gy[1] = 0.f;
      std::vector<float> g2(n);
      for (std::size_t i = 0; i < n; ++i) g2[i] = gx[i] * gx[i] + gy[i] * gy[i];
      if (n > 2) g2[2] = 0.f;
      const auto u1 = randf(n, rng);
      const auto u2 = randf(n, rng);
      std::vector<float> a1(n), a2(n), b1(n), b2(n);
      ref->tvl1_threshold(rho.data(), gx.data(), gy.data(), g2.data(), u1.data(), u2.data(), a1.data(),
                          a2.data(), 0.45f, n);
      vec->tvl1_threshold(rho.data(), gx.data(), gy.data(), g2.data(), u1.data(), u2.data(), b1.data(),
                          b2.data(), 0.45f, n);
      check_close(a1, b1, 1e-4f);
      check_close(a2, b2, 1e-4f);
    }
    {
      const auto v1 = randf(n, rng);
      const auto v2 = randf(n, rng);
      const auto d1 = randf(n, rng);
      const auto d2 = randf(n, rng);
      auto u1 = randf(n, rng);
      auto u2 = randf(n, rng);
      auto w1 = u1;
      auto w2 = u2;
      const double e1 = ref->tvl1_primal(v1.data(), v2.data(), d1.data(), d2.data(), u1.data(), u2.data(), 0.3f, n);
      const double e2 = vec->tvl1_primal(v1.data(), v2.data(), d1.data(), d2.data(), w1.data(), w2.data(), 0.3f, n);
      CHECK(e1 == doctest::Approx(e2).epsilon(1e-5));
      check_close(u1, w1);
      check_close(u2, w2);
    }
    {
      const auto a = randf(n, rng), b = randf(n, rng), c = randf(n, rng), d = randf(n, rng);
      auto p = randf(n, rng), q = randf(n, rng), r = randf(n, rng), s = randf(n, rng);
      auto p2 = p, q2 = q, r2 = r, s2 = s;
      ref->tvl1_dual(a.data(), b.data(), c.data(), d.data(), p.data(), q.data(), r.data(), s.data(), 0.83f, n);
      vec->tvl1_dual(a.data(), b.data(), c.data(), d.data(), p2.data(), q2.data(), r2.data(), s2.data(), 0.83f, n);
      check_close(p, p2);
      check_close(q, q2);
      check_close(r, r2);
      check_close(s, s2);
    }
    {
      const auto u = randf(n, rng);
      std::vector<float> d1(n, 9.f), d2(n, 9.f);
      ref->forward_diff(u.data(), d1.data(), n);
      vec->forward_diff(u.data(), d2.data(), n);
      check_close(d1, d2, 0.f);
      const auto w = randf(n, rng);
      ref->sub_f(u.data(), w.data(), d1.data(), n);
      vec->sub_f(u.data(), w.data(), d2.data(), n);
      check_close(d1, d2, 0.f);
    }
    {
      const auto p1 = randf(n, rng), p2 = randf(n, rng), prev = randf(n, rng);
      std::vector<float> a(n), b(n);
      for (const float* pp : {prev.data(), static_cast<const float*>(nullptr)}) {
        ref->divergence_row(p1.data(), p2.data(), pp, a.data(), n);
        vec->divergence_row(p1.data(), p2.data(), pp, b.data(), n);
        check_close(a, b);
      }
    }
    {
      const auto x = randd(n, rng);
      auto y1 = randd(n, rng);
      auto y2 = y1;
      ref->axpy_d(-1.3, x.data(), y1.data(), n);
      vec->axpy_d(-1.3, x.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
      CHECK(ref->dot_d(x.data(), y1.data(), n) == doctest::Approx(vec->dot_d(x.data(), y1.data(), n)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gemm variants agree on ragged shapes with leading dimensions") {
  const KernelTable* ref = table_for(Backend::scalar);
  const KernelTable* vec = table_for(Backend::avx2);
  std::mt19937 rng(77);
  const std::size_t dims[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 33};
  for (std::size_t m : dims) {
    for (std::size_t n : dims) {
      for (std::size_t k : {std::size_t{1}, std::size_t{6}, std::size_t{19}}) {
        const std::size_t lda = k + 2, ldb = n + 3, ldc = n + 1;
        const auto a = randd(m * lda, rng);
        const auto b = randd(k * ldb, rng);
        const auto c0 = randd(m * ldc, rng);
        // Naive oracle.
        std::vector<double> expect = c0;
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t p = 0; p < k; ++p) s += a[i * lda + p] * b[p * ldb + j];
            expect[i * ldc + j] += s;
          }
        }
        for (const KernelTable* t : {ref, vec}) {
          if (t == nullptr) continue;
          auto c = c0;
          t->gemm_nn(m, n, k, a.data(), lda, b.data(), ldb, c.data(), ldc);
          for (std::size_t i = 0; i < c.size(); ++i) CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-12));
        }
      }
    }
  }
}

TEST_CASE("forcing the scalar backend switches the active table") {
  const Backend before = kernels().backend;
  force_backend(Backend::scalar);
  CHECK(kernels().backend == Backend::scalar);
  force_backend(before);
  CHECK(kernels().backend == before);
}
