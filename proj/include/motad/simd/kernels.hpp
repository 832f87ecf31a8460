#pragma once
// Data-parallel inner loops used by the flow solver and the neural layers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2/FMA variant. The active table is chosen once at startup from CPUID;
// setting MOTAD_SIMD=scalar in the environment forces the reference path.

#include <cstddef>
#include <string_view>

namespace motad::simd {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);

struct KernelTable {
  Backend backend;

  // y += a * x
  void (*axpy_f)(float a, const float* x, float* y, std::size_t n);

  // TV-L1 thresholding of the linearized data term. For each pixel,
  // rho = rho_c + gx*u1 + gy*u2 and v is u moved towards rho == 0 by at
  // most lt*|g|.
  void (*tvl1_threshold)(const float* rho_c, const float* gx, const float* gy,
                         const float* grad2, const float* u1, const float* u2,
                         float* v1, float* v2, float lt, std::size_t n);

  // u = v + theta * div. Returns the summed squared change of (u1, u2).
  double (*tvl1_primal)(const float* v1, const float* v2, const float* div1,
                        const float* div2, float* u1, float* u2, float theta,
                        std::size_t n);

  // Projected dual ascent: p = (p + taut*grad) / (1 + taut*|grad|), applied
  // to both flow components.
  void (*tvl1_dual)(const float* u1x, const float* u1y, const float* u2x,
                    const float* u2y, float* p11, float* p12, float* p21,
                    float* p22, float taut, std::size_t n);

  // dx[i] = u[i+1] - u[i], dx[n-1] = 0
  void (*forward_diff)(const float* u, float* dx, std::size_t n);

  // out = a - b
  void (*sub_f)(const float* a, const float* b, float* out, std::size_t n);

  // div[i] = p1[i] - p1[i-1] + p2[i] - p2_prev[i]; p1[-1] = 0 and a null
  // p2_prev is read as zeros (first row).
  void (*divergence_row)(const float* p1, const float* p2,
                         const float* p2_prev, float* div, std::size_t n);

  // C[MxN] += A[MxK] * B[KxN], all row-major with explicit leading dims.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                  std::size_t lda, const double* b, std::size_t ldb, double* c,
                  std::size_t ldc);

  void (*axpy_d)(double a, const double* x, double* y, std::size_t n);
  double (*dot_d)(const double* x, const double* y, std::size_t n);
};

/// The table selected for this process.
const KernelTable& kernels();

/// A specific table, or nullptr when the CPU or build lacks it.
const KernelTable* table_for(Backend b);

/// Overrides the process-wide selection. Intended for tests and benchmarks;
/// call before any worker threads start.
void force_backend(Backend b);

bool cpu_has_avx2();

}  // namespace motad::simd
