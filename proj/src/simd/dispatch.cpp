#include "motad/simd/kernels.hpp"

#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace motad::simd {

namespace {

#define MOTAD_TABLE(ns, tag)                                                  \
  KernelTable {                                                               \
    tag, &ns::axpy_f, &ns::tvl1_threshold, &ns::tvl1_primal, &ns::tvl1_dual,  \
        &ns::forward_diff, &ns::sub_f, &ns::divergence_row, &ns::gemm_nn,     \
        &ns::axpy_d, &ns::dot_d                                               \
  }

const KernelTable kScalar = MOTAD_TABLE(scalar, Backend::scalar);
#if defined(MOTAD_HAVE_AVX2)
const KernelTable kAvx2 = MOTAD_TABLE(avx2, Backend::avx2);
#endif

#undef MOTAD_TABLE

const KernelTable* select_default() {
  const char* env = std::getenv("MOTAD_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) return &kScalar;
  if (const KernelTable* t = table_for(Backend::avx2)) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{select_default()};
  return table;
}

}  // namespace

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::scalar: return &kScalar;
    case Backend::avx2:
#if defined(MOTAD_HAVE_AVX2)
      if (cpu_has_avx2()) return &kAvx2;
#endif
      return nullptr;
  }
  return nullptr;
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

void force_backend(Backend b) {
  if (const KernelTable* t = table_for(b)) active().store(t, std::memory_order_release);
}

}  // namespace motad::simd
