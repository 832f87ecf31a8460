// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma and
// must only be entered after the runtime CPU check in dispatch.cpp.

#include "kernels_impl.hpp"

#include <immintrin.h>

#include <cmath>

namespace motad::simd::avx2 {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

}  // namespace

void axpy_f(float a, const float* x, float* y, std::size_t n) {
  const __m256 va = _mm256_set1_ps(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i),
                                            _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void tvl1_threshold(const float* rho_c, const float* gx, const float* gy,
                    const float* grad2, const float* u1, const float* u2,
                    float* v1, float* v2, float lt, std::size_t n) {
  const __m256 vlt = _mm256_set1_ps(lt);
  const __m256 vnlt = _mm256_set1_ps(-lt);
  const __m256 zero = _mm256_setzero_ps();
  const __m256 eps = _mm256_set1_ps(kGradIsZero);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 x = _mm256_loadu_ps(gx + i);
    const __m256 y = _mm256_loadu_ps(gy + i);
    const __m256 g2 = _mm256_loadu_ps(grad2 + i);
    const __m256 a = _mm256_loadu_ps(u1 + i);
    const __m256 b = _mm256_loadu_ps(u2 + i);
    const __m256 rho = _mm256_fmadd_ps(
        y, b, _mm256_fmadd_ps(x, a, _mm256_loadu_ps(rho_c + i)));
    const __m256 bound = _mm256_mul_ps(vlt, g2);
    const __m256 lo = _mm256_cmp_ps(rho, _mm256_sub_ps(zero, bound), _CMP_LT_OQ);
    const __m256 hi = _mm256_cmp_ps(rho, bound, _CMP_GT_OQ);
    const __m256 nz = _mm256_cmp_ps(g2, eps, _CMP_GT_OQ);

    const __m256 f = _mm256_div_ps(_mm256_sub_ps(zero, rho), g2);
    __m256 d1 = _mm256_and_ps(nz, _mm256_mul_ps(f, x));
    __m256 d2 = _mm256_and_ps(nz, _mm256_mul_ps(f, y));
    d1 = _mm256_blendv_ps(d1, _mm256_mul_ps(vlt, x), lo);
    d2 = _mm256_blendv_ps(d2, _mm256_mul_ps(vlt, y), lo);
    d1 = _mm256_blendv_ps(d1, _mm256_mul_ps(vnlt, x), hi);
    d2 = _mm256_blendv_ps(d2, _mm256_mul_ps(vnlt, y), hi);
    _mm256_storeu_ps(v1 + i, _mm256_add_ps(a, d1));
    _mm256_storeu_ps(v2 + i, _mm256_add_ps(b, d2));
  }
  if (i < n) {
    scalar::tvl1_threshold(rho_c + i, gx + i, gy + i, grad2 + i, u1 + i,
                           u2 + i, v1 + i, v2 + i, lt, n - i);
  }
}

double tvl1_primal(const float* v1, const float* v2, const float* div1,
                   const float* div2, float* u1, float* u2, float theta,
                   std::size_t n) {
  const __m256 vt = _mm256_set1_ps(theta);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 a = _mm256_fmadd_ps(vt, _mm256_loadu_ps(div1 + i),
                                     _mm256_loadu_ps(v1 + i));
    const __m256 b = _mm256_fmadd_ps(vt, _mm256_loadu_ps(div2 + i),
                                     _mm256_loadu_ps(v2 + i));
    const __m256 d1 = _mm256_sub_ps(a, _mm256_loadu_ps(u1 + i));
    const __m256 d2 = _mm256_sub_ps(b, _mm256_loadu_ps(u2 + i));
    const __m256 e = _mm256_fmadd_ps(d2, d2, _mm256_mul_ps(d1, d1));
    acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_castps256_ps128(e)));
    acc = _mm256_add_pd(acc, _mm256_cvtps_pd(_mm256_extractf128_ps(e, 1)));
    _mm256_storeu_ps(u1 + i, a);
    _mm256_storeu_ps(u2 + i, b);
  }
  double err = hsum(acc);
  if (i < n) {
    err += scalar::tvl1_primal(v1 + i, v2 + i, div1 + i, div2 + i, u1 + i,
                               u2 + i, theta, n - i);
  }
  return err;
}

void tvl1_dual(const float* u1x, const float* u1y, const float* u2x,
               const float* u2y, float* p11, float* p12, float* p21,
               float* p22, float taut, std::size_t n) {
  const __m256 vt = _mm256_set1_ps(taut);
  const __m256 one = _mm256_set1_ps(1.f);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 ax = _mm256_loadu_ps(u1x + i);
    const __m256 ay = _mm256_loadu_ps(u1y + i);
    const __m256 bx = _mm256_loadu_ps(u2x + i);
    const __m256 by = _mm256_loadu_ps(u2y + i);
    const __m256 g1 = _mm256_fmadd_ps(
        vt, _mm256_sqrt_ps(_mm256_fmadd_ps(ay, ay, _mm256_mul_ps(ax, ax))), one);
    const __m256 g2 = _mm256_fmadd_ps(
        vt, _mm256_sqrt_ps(_mm256_fmadd_ps(by, by, _mm256_mul_ps(bx, bx))), one);
    _mm256_storeu_ps(p11 + i, _mm256_div_ps(_mm256_fmadd_ps(vt, ax, _mm256_loadu_ps(p11 + i)), g1));
    _mm256_storeu_ps(p12 + i, _mm256_div_ps(_mm256_fmadd_ps(vt, ay, _mm256_loadu_ps(p12 + i)), g1));
    _mm256_storeu_ps(p21 + i, _mm256_div_ps(_mm256_fmadd_ps(vt, bx, _mm256_loadu_ps(p21 + i)), g2));
    _mm256_storeu_ps(p22 + i, _mm256_div_ps(_mm256_fmadd_ps(vt, by, _mm256_loadu_ps(p22 + i)), g2));
  }
  if (i < n) {
    scalar::tvl1_dual(u1x + i, u1y + i, u2x + i, u2y + i, p11 + i, p12 + i,
                      p21 + i, p22 + i, taut, n - i);
  }
}

void forward_diff(const float* u, float* dx, std::size_t n) {
  if (n == 0) return;
  std::size_t i = 0;
  for (; i + 8 < n; i += 8) {
    _mm256_storeu_ps(dx + i, _mm256_sub_ps(_mm256_loadu_ps(u + i + 1),
                                           _mm256_loadu_ps(u + i)));
  }
  for (; i + 1 < n; ++i) dx[i] = u[i + 1] - u[i];
  dx[n - 1] = 0.f;
}

void sub_f(const float* a, const float* b, float* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(out + i,
                     _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

void divergence_row(const float* p1, const float* p2, const float* p2_prev,
                    float* div, std::size_t n) {
  if (n == 0) return;
  div[0] = p1[0] + p2[0] - (p2_prev ? p2_prev[0] : 0.f);
  std::size_t i = 1;
  if (p2_prev) {
    for (; i + 8 <= n; i += 8) {
      const __m256 dp1 = _mm256_sub_ps(_mm256_loadu_ps(p1 + i), _mm256_loadu_ps(p1 + i - 1));
      const __m256 dp2 = _mm256_sub_ps(_mm256_loadu_ps(p2 + i), _mm256_loadu_ps(p2_prev + i));
      _mm256_storeu_ps(div + i, _mm256_add_ps(dp1, dp2));
    }
    for (; i < n; ++i) div[i] = (p1[i] - p1[i - 1]) + (p2[i] - p2_prev[i]);
  } else {
    for (; i + 8 <= n; i += 8) {
      const __m256 dp1 = _mm256_sub_ps(_mm256_loadu_ps(p1 + i), _mm256_loadu_ps(p1 + i - 1));
      _mm256_storeu_ps(div + i, _mm256_add_ps(dp1, _mm256_loadu_ps(p2 + i)));
    }
    for (; i < n; ++i) div[i] = (p1[i] - p1[i - 1]) + p2[i];
  }
}

namespace {

// 4x8 register block: C[i..i+4, j..j+8] += A[i..i+4, :] * B[:, j..j+8]
inline void block_4x8(std::size_t k, const double* a, std::size_t lda,
                      const double* b, std::size_t ldb, double* c,
                      std::size_t ldc) {
  __m256d c00 = _mm256_setzero_pd(), c01 = _mm256_setzero_pd();
  __m256d c10 = _mm256_setzero_pd(), c11 = _mm256_setzero_pd();
  __m256d c20 = _mm256_setzero_pd(), c21 = _mm256_setzero_pd();
  __m256d c30 = _mm256_setzero_pd(), c31 = _mm256_setzero_pd();
  for (std::size_t p = 0; p < k; ++p) {
    const __m256d b0 = _mm256_loadu_pd(b + p * ldb);
    const __m256d b1 = _mm256_loadu_pd(b + p * ldb + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  auto flush = [](double* dst, __m256d lo, __m256d hi) {
    _mm256_storeu_pd(dst, _mm256_add_pd(_mm256_loadu_pd(dst), lo));
    _mm256_storeu_pd(dst + 4, _mm256_add_pd(_mm256_loadu_pd(dst + 4), hi));
  };
  flush(c, c00, c01);
  flush(c + ldc, c10, c11);
  flush(c + 2 * ldc, c20, c21);
  flush(c + 3 * ldc, c30, c31);
}

// One output row, 8-wide then 4-wide then scalar columns from j0.
inline void row_tail(std::size_t j0, std::size_t n, std::size_t k,
                     const double* arow, const double* b, std::size_t ldb,
                     double* crow) {
  std::size_t j = j0;
  for (; j + 8 <= n; j += 8) {
    __m256d c0 = _mm256_setzero_pd(), c1 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_broadcast_sd(arow + p);
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), c1);
    }
    _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), c0));
    _mm256_storeu_pd(crow + j + 4, _mm256_add_pd(_mm256_loadu_pd(crow + j + 4), c1));
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_setzero_pd();
    for (std::size_t p = 0; p < k; ++p) {
      c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(arow + p),
                           _mm256_loadu_pd(b + p * ldb + j), c0);
    }
    _mm256_storeu_pd(crow + j, _mm256_add_pd(_mm256_loadu_pd(crow + j), c0));
  }
  for (; j < n; ++j) {
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += arow[p] * b[p * ldb + j];
    crow[j] += s;
  }
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      block_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
    if (j < n) {
      for (std::size_t r = 0; r < 4; ++r) {
        row_tail(j, n, k, a + (i + r) * lda, b, ldb, c + (i + r) * ldc);
      }
    }
  }
  for (; i < m; ++i) row_tail(0, n, k, a + i * lda, b, ldb, c + i * ldc);
}

void axpy_d(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_d(const double* x, const double* y, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace motad::simd::avx2
