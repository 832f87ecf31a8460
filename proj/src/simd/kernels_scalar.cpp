#include "kernels_impl.hpp"

#include <cmath>

namespace motad::simd::scalar {

void axpy_f(float a, const float* x, float* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void tvl1_threshold(const float* rho_c, const float* gx, const float* gy,
                    const float* grad2, const float* u1, const float* u2,
                    float* v1, float* v2, float lt, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float rho = rho_c[i] + gx[i] * u1[i] + gy[i] * u2[i];
    const float bound = lt * grad2[i];
    float d1 = 0.f;
    float d2 = 0.f;
    if (rho < -bound) {
      d1 = lt * gx[i];
      d2 = lt * gy[i];
    } else if (rho > bound) {
      d1 = -lt * gx[i];
      d2 = -lt * gy[i];
    } else if (grad2[i] > kGradIsZero) {
      const float f = -rho / grad2[i];
      d1 = f * gx[i];
      d2 = f * gy[i];
    }
    v1[i] = u1[i] + d1;
    v2[i] = u2[i] + d2;
  }
}

double tvl1_primal(const float* v1, const float* v2, const float* div1,
                   const float* div2, float* u1, float* u2, float theta,
                   std::size_t n) {
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const float a = v1[i] + theta * div1[i];
    const float b = v2[i] + theta * div2[i];
    const float d1 = a - u1[i];
    const float d2 = b - u2[i];
    err += static_cast<double>(d1 * d1 + d2 * d2);
    u1[i] = a;
    u2[i] = b;
  }
  return err;
}

void tvl1_dual(const float* u1x, const float* u1y, const float* u2x,
               const float* u2y, float* p11, float* p12, float* p21,
               float* p22, float taut, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const float g1 = 1.f + taut * std::sqrt(u1x[i] * u1x[i] + u1y[i] * u1y[i]);
    const float g2 = 1.f + taut * std::sqrt(u2x[i] * u2x[i] + u2y[i] * u2y[i]);
    p11[i] = (p11[i] + taut * u1x[i]) / g1;
    p12[i] = (p12[i] + taut * u1y[i]) / g1;
    p21[i] = (p21[i] + taut * u2x[i]) / g2;
    p22[i] = (p22[i] + taut * u2y[i]) / g2;
  }
}

void forward_diff(const float* u, float* dx, std::size_t n) {
  if (n == 0) return;
  for (std::size_t i = 0; i + 1 < n; ++i) dx[i] = u[i + 1] - u[i];
  dx[n - 1] = 0.f;
}

void sub_f(const float* a, const float* b, float* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void divergence_row(const float* p1, const float* p2, const float* p2_prev,
                    float* div, std::size_t n) {
  if (n == 0) return;
  div[0] = p1[0];
  for (std::size_t i = 1; i < n; ++i) div[i] = p1[i] - p1[i - 1];
  if (p2_prev) {
    for (std::size_t i = 0; i < n; ++i) div[i] += p2[i] - p2_prev[i];
  } else {
    for (std::size_t i = 0; i < n; ++i) div[i] += p2[i];
  }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,
             std::size_t lda, const double* b, std::size_t ldb, double* c,
             std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * lda + p];
      if (av == 0.0) continue;
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy_d(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_d(const double* x, const double* y, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

}  // namespace motad::simd::scalar
