#pragma once
// Internal declarations of the per-backend kernel sets.

#include <cstddef>

namespace motad::simd {

inline constexpr float kGradIsZero = 1e-10f;

#define MOTAD_DECLARE_KERNELS                                                 \
  void axpy_f(float a, const float* x, float* y, std::size_t n);              \
  void tvl1_threshold(const float* rho_c, const float* gx, const float* gy,   \
                      const float* grad2, const float* u1, const float* u2,   \
                      float* v1, float* v2, float lt, std::size_t n);         \
  double tvl1_primal(const float* v1, const float* v2, const float* div1,     \
                     const float* div2, float* u1, float* u2, float theta,    \
                     std::size_t n);                                          \
  void tvl1_dual(const float* u1x, const float* u1y, const float* u2x,        \
                 const float* u2y, float* p11, float* p12, float* p21,        \
                 float* p22, float taut, std::size_t n);                      \
  void forward_diff(const float* u, float* dx, std::size_t n);                \
  void sub_f(const float* a, const float* b, float* out, std::size_t n);      \
  void divergence_row(const float* p1, const float* p2, const float* p2_prev, \
                      float* div, std::size_t n);                             \
  void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* a,  \
               std::size_t lda, const double* b, std::size_t ldb, double* c,  \
               std::size_t ldc);                                              \
  void axpy_d(double a, const double* x, double* y, std::size_t n);           \
  double dot_d(const double* x, const double* y, std::size_t n);

namespace scalar {
MOTAD_DECLARE_KERNELS
}

#if defined(MOTAD_HAVE_AVX2)
namespace avx2 {
MOTAD_DECLARE_KERNELS
}
#endif

#undef MOTAD_DECLARE_KERNELS

}  // namespace motad::simd
