#pragma once

#include <cstddef>
#include <cstdint>

// Data-parallel inner loops behind the pipeline: block-reduce downscaling,
// standardization, window moments, label histograms, 3x3 box means, and the
// f64 affine used by the linear models. Scalar reference implementations are
// the semantics; the AVX2 variants must agree with them (bit-exact where the
// equivalence tests say so, tolerance elsewhere) and are selected at runtime.

namespace icebench::kernels {

struct Moments {
  double sum = 0.0;
  double sum_sq = 0.0;
  long long finite = 0;
};

enum class Backend { scalar = 0, avx2 = 1 };

// dst is dst_h x dst_w contiguous; block (i, j) covers src rows
// [i*block_h, (i+1)*block_h) and cols [j*block_w, ...) at row stride src_stride.
using BlockReduceFn = void (*)(const float* src, int src_stride, int block_h, int block_w,
                               float* dst, int dst_h, int dst_w);
using StandardizeFn = void (*)(const float* x, size_t n, float mean, float inv_std, float* dst);
using MomentsFn = Moments (*)(const float* src, int src_stride, int h, int w);
using HistFn = void (*)(const uint8_t* src, int src_stride, int h, int w, uint64_t counts[7]);
using CountNonFiniteFn = long long (*)(const float* src, int src_stride, int h, int w);
using Box3Fn = void (*)(const float* src, int h, int w, float* dst);
using AffineFn = void (*)(const double* weights, const double* bias, const double* x, int n_out,
                          int dim, double* out);
using AxpyFn = void (*)(double a, const double* x, double* y, size_t n);

struct KernelTable {
  BlockReduceFn block_mean_f32;
  BlockReduceFn block_max_f32;
  StandardizeFn standardize_f32;
  MomentsFn window_moments_f32;
  HistFn label_histogram_u8;
  CountNonFiniteFn count_nonfinite_f32;
  Box3Fn box3_mean_f32;
  AffineFn affine_f64;
  AxpyFn axpy_f64;
};

// Active table. Resolved once: AVX2 when compiled in and the CPU has avx2+fma,
// unless ICEBENCH_KERNELS=scalar|avx2 overrides.
const KernelTable& table();
Backend active_backend();
const char* backend_name(Backend b);
// Swaps the active table (tests, env override). False if b is unavailable.
bool set_backend(Backend b);
bool avx2_available();

// Finite-mean over each block; blocks with no finite member get quiet NaN.
inline void block_mean_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh,
                           int dw) {
  table().block_mean_f32(src, src_stride, bh, bw, dst, dh, dw);
}
// Finite-max over each block; empty blocks get quiet NaN.
inline void block_max_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh,
                          int dw) {
  table().block_max_f32(src, src_stride, bh, bw, dst, dh, dw);
}
// dst[i] = (x[i] - mean) * inv_std; non-finite values propagate.
inline void standardize_f32(const float* x, size_t n, float mean, float inv_std, float* dst) {
  table().standardize_f32(x, n, mean, inv_std, dst);
}
// Sum, sum of squares, and count over the finite values of an h x w window.
inline Moments window_moments_f32(const float* src, int src_stride, int h, int w) {
  return table().window_moments_f32(src, src_stride, h, w);
}
// counts[0..5] = class pixels, counts[6] = ignore (255). Other byte values are not counted.
inline void label_histogram_u8(const uint8_t* src, int src_stride, int h, int w,
                               uint64_t counts[7]) {
  table().label_histogram_u8(src, src_stride, h, w, counts);
}
inline long long count_nonfinite_f32(const float* src, int src_stride, int h, int w) {
  return table().count_nonfinite_f32(src, src_stride, h, w);
}
// Finite-mean of the 3x3 neighborhood, edges replicated; all-NaN neighborhoods get NaN.
inline void box3_mean_f32(const float* src, int h, int w, float* dst) {
  table().box3_mean_f32(src, h, w, dst);
}
// out[i] = dot(weights[i*dim ..], x) + bias[i]
inline void affine_f64(const double* weights, const double* bias, const double* x, int n_out,
                       int dim, double* out) {
  table().affine_f64(weights, bias, x, n_out, dim, out);
}
// y[i] += a * x[i]
inline void axpy_f64(double a, const double* x, double* y, size_t n) {
  table().axpy_f64(a, x, y, n);
}

namespace scalar {
void block_mean_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw);
void block_max_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw);
void standardize_f32(const float* x, size_t n, float mean, float inv_std, float* dst);
Moments window_moments_f32(const float* src, int src_stride, int h, int w);
void label_histogram_u8(const uint8_t* src, int src_stride, int h, int w, uint64_t counts[7]);
long long count_nonfinite_f32(const float* src, int src_stride, int h, int w);
void box3_mean_f32(const float* src, int h, int w, float* dst);
void affine_f64(const double* weights, const double* bias, const double* x, int n_out, int dim,
                double* out);
void axpy_f64(double a, const double* x, double* y, size_t n);
}  // namespace scalar

#ifdef ICEBENCH_HAVE_AVX2
namespace avx2 {
void block_mean_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw);
void block_max_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw);
void standardize_f32(const float* x, size_t n, float mean, float inv_std, float* dst);
Moments window_moments_f32(const float* src, int src_stride, int h, int w);
void label_histogram_u8(const uint8_t* src, int src_stride, int h, int w, uint64_t counts[7]);
long long count_nonfinite_f32(const float* src, int src_stride, int h, int w);
void box3_mean_f32(const float* src, int h, int w, float* dst);
void affine_f64(const double* weights, const double* bias, const double* x, int n_out, int dim,
                double* out);
void axpy_f64(double a, const double* x, double* y, size_t n);
}  // namespace avx2
#endif

}  // namespace icebench::kernels
