#include <atomic>
#include <cstdlib>
#include <cstring>

#include "icebench/cpu_features.hpp"
#include "icebench/kernels.hpp"

namespace icebench::kernels {

namespace {

constexpr KernelTable kScalarTable = {
    &scalar::block_mean_f32,   &scalar::block_max_f32,        &scalar::standardize_f32,
    &scalar::window_moments_f32, &scalar::label_histogram_u8, &scalar::count_nonfinite_f32,
    &scalar::box3_mean_f32,    &scalar::affine_f64,           &scalar::axpy_f64,
};

#ifdef ICEBENCH_HAVE_AVX2
constexpr KernelTable kAvx2Table = {
    &avx2::block_mean_f32,   &avx2::block_max_f32,        &avx2::standardize_f32,
    &avx2::window_moments_f32, &avx2::label_histogram_u8, &avx2::count_nonfinite_f32,
    &avx2::box3_mean_f32,    &avx2::affine_f64,           &avx2::axpy_f64,
};
#endif

struct Dispatch {
  const KernelTable* table;
  Backend backend;
};

Dispatch resolve_initial() {
  bool want_avx2 = avx2_available();
  if (const char* env = std::getenv("ICEBENCH_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) want_avx2 = false;
    // "avx2" requests it but cannot conjure unsupported hardware.
  }
#ifdef ICEBENCH_HAVE_AVX2
  if (want_avx2) return {&kAvx2Table, Backend::avx2};
#endif
  return {&kScalarTable, Backend::scalar};
}

std::atomic<const KernelTable*> g_table{nullptr};
std::atomic<Backend> g_backend{Backend::scalar};

void ensure_init() {
  if (g_table.load(std::memory_order_acquire) == nullptr) {
    Dispatch d = resolve_initial();
    g_backend.store(d.backend, std::memory_order_relaxed);
    g_table.store(d.table, std::memory_order_release);
  }
}

}  // namespace

bool avx2_available() {
#ifdef ICEBENCH_HAVE_AVX2
  return cpu_has_avx2_fma();
#else
  return false;
#endif
}

const KernelTable& table() {
  ensure_init();
  return *g_table.load(std::memory_order_acquire);
}

Backend active_backend() {
  ensure_init();
  return g_backend.load(std::memory_order_relaxed);
}

const char* backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool set_backend(Backend b) {
  if (b == Backend::avx2) {
#ifdef ICEBENCH_HAVE_AVX2
    if (!cpu_has_avx2_fma()) return false;
    g_backend.store(Backend::avx2, std::memory_order_relaxed);
    g_table.store(&kAvx2Table, std::memory_order_release);
    return true;
#else
    return false;
#endif
  }
  g_backend.store(Backend::scalar, std::memory_order_relaxed);
  g_table.store(&kScalarTable, std::memory_order_release);
  return true;
}

}  // namespace icebench::kernels
