#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "icebench/kernels.hpp"

// Accumulation order inside a block / 3x3 neighborhood matches the scalar
// kernel lane-for-lane (each output cell owns one lane), so block_mean,
// block_max, box3, standardize, axpy, histogram and counts are bit-exact
// against the scalar reference. window_moments and affine combine lane
// partials at the end and are tolerance-tested instead.

namespace icebench::kernels::avx2 {

namespace {

constexpr float kQNaN = std::numeric_limits<float>::quiet_NaN();

inline __m256 finite_mask(__m256 v) {
  const __m256 abs_mask = _mm256_castsi256_ps(_mm256_set1_epi32(0x7fffffff));
  const __m256 inf = _mm256_set1_ps(std::numeric_limits<float>::infinity());
  return _mm256_cmp_ps(_mm256_and_ps(v, abs_mask), inf, _CMP_LT_OQ);
}

inline float block_mean_cell(const float* block, int src_stride, int bh, int bw) {
  float sum = 0.0f;
  int cnt = 0;
  for (int p = 0; p < bh; ++p) {
    const float* row = block + static_cast<size_t>(p) * src_stride;
    for (int q = 0; q < bw; ++q) {
      float v = row[q];
      if (std::isfinite(v)) {
        sum += v;
        ++cnt;
      }
    }
  }
  return cnt ? sum / static_cast<float>(cnt) : kQNaN;
}

inline float block_max_cell(const float* block, int src_stride, int bh, int bw) {
  float best = -std::numeric_limits<float>::infinity();
  int cnt = 0;
  for (int p = 0; p < bh; ++p) {
    const float* row = block + static_cast<size_t>(p) * src_stride;
    for (int q = 0; q < bw; ++q) {
      float v = row[q];
      if (std::isfinite(v)) {
        if (v > best) best = v;
        ++cnt;
      }
    }
  }
  return cnt ? best : kQNaN;
}

inline float box3_cell(const float* src, int h, int w, int r, int c) {
  float sum = 0.0f;
  int cnt = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    int rr = r + dr;
    rr = rr < 0 ? 0 : (rr >= h ? h - 1 : rr);
    const float* row = src + static_cast<size_t>(rr) * w;
    for (int dc = -1; dc <= 1; ++dc) {
      int cc = c + dc;
      cc = cc < 0 ? 0 : (cc >= w ? w - 1 : cc);
      float v = row[cc];
      if (std::isfinite(v)) {
        sum += v;
        ++cnt;
      }
    }
  }
  return cnt ? sum / static_cast<float>(cnt) : kQNaN;
}

inline double hsum_pd(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

void block_mean_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw) {
  const __m256i vidx = _mm256_mullo_epi32(_mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7),
                                          _mm256_set1_epi32(bw));
  const __m256 qnan = _mm256_set1_ps(kQNaN);
  const __m256i zero = _mm256_setzero_si256();
  for (int i = 0; i < dh; ++i) {
    int j = 0;
    for (; j + 8 <= dw; j += 8) {
      const float* base =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
      __m256 sum = _mm256_setzero_ps();
      __m256i cnt = zero;
      for (int p = 0; p < bh; ++p) {
        const float* row = base + static_cast<size_t>(p) * src_stride;
        for (int q = 0; q < bw; ++q) {
          __m256 v = _mm256_i32gather_ps(row + q, vidx, 4);
          __m256 fin = finite_mask(v);
          sum = _mm256_add_ps(sum, _mm256_and_ps(fin, v));
          cnt = _mm256_sub_epi32(cnt, _mm256_castps_si256(fin));
        }
      }
      __m256 mean = _mm256_div_ps(sum, _mm256_cvtepi32_ps(cnt));
      __m256 empty = _mm256_castsi256_ps(_mm256_cmpeq_epi32(cnt, zero));
      mean = _mm256_blendv_ps(mean, qnan, empty);
      _mm256_storeu_ps(dst + static_cast<size_t>(i) * dw + j, mean);
    }
    for (; j < dw; ++j) {
      const float* block =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
      dst[static_cast<size_t>(i) * dw + j] = block_mean_cell(block, src_stride, bh, bw);
    }
  }
}

void block_max_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw) {
  const __m256i vidx = _mm256_mullo_epi32(_mm256_setr_epi32(0, 1, 2, 3, 4, 5, 6, 7),
                                          _mm256_set1_epi32(bw));
  const __m256 qnan = _mm256_set1_ps(kQNaN);
  const __m256 neg_inf = _mm256_set1_ps(-std::numeric_limits<float>::infinity());
  const __m256i zero = _mm256_setzero_si256();
  for (int i = 0; i < dh; ++i) {
    int j = 0;
    for (; j + 8 <= dw; j += 8) {
      const float* base =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
      __m256 best = neg_inf;
      __m256i cnt = zero;
      for (int p = 0; p < bh; ++p) {
        const float* row = base + static_cast<size_t>(p) * src_stride;
        for (int q = 0; q < bw; ++q) {
          __m256 v = _mm256_i32gather_ps(row + q, vidx, 4);
          __m256 fin = finite_mask(v);
          best = _mm256_max_ps(best, _mm256_blendv_ps(neg_inf, v, fin));
          cnt = _mm256_sub_epi32(cnt, _mm256_castps_si256(fin));
        }
      }
      __m256 empty = _mm256_castsi256_ps(_mm256_cmpeq_epi32(cnt, zero));
      best = _mm256_blendv_ps(best, qnan, empty);
      _mm256_storeu_ps(dst + static_cast<size_t>(i) * dw + j, best);
    }
    for (; j < dw; ++j) {
      const float* block =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
      dst[static_cast<size_t>(i) * dw + j] = block_max_cell(block, src_stride, bh, bw);
    }
  }
}

void standardize_f32(const float* x, size_t n, float mean, float inv_std, float* dst) {
  const __m256 vm = _mm256_set1_ps(mean);
  const __m256 vs = _mm256_set1_ps(inv_std);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256 v = _mm256_loadu_ps(x + i);
    _mm256_storeu_ps(dst + i, _mm256_mul_ps(_mm256_sub_ps(v, vm), vs));
  }
  for (; i < n; ++i) dst[i] = (x[i] - mean) * inv_std;
}

Moments window_moments_f32(const float* src, int src_stride, int h, int w) {
  __m256d vsum_lo = _mm256_setzero_pd();
  __m256d vsum_hi = _mm256_setzero_pd();
  __m256d vsq_lo = _mm256_setzero_pd();
  __m256d vsq_hi = _mm256_setzero_pd();
  long long finite = 0;
  double tail_sum = 0.0, tail_sq = 0.0;
  for (int r = 0; r < h; ++r) {
    const float* row = src + static_cast<size_t>(r) * src_stride;
    int c = 0;
    for (; c + 8 <= w; c += 8) {
      __m256 v = _mm256_loadu_ps(row + c);
      __m256 fin = finite_mask(v);
      __m256 masked = _mm256_and_ps(fin, v);
      finite += __builtin_popcount(static_cast<unsigned>(_mm256_movemask_ps(fin)));
      __m256d lo = _mm256_cvtps_pd(_mm256_castps256_ps128(masked));
      __m256d hi = _mm256_cvtps_pd(_mm256_extractf128_ps(masked, 1));
      vsum_lo = _mm256_add_pd(vsum_lo, lo);
      vsum_hi = _mm256_add_pd(vsum_hi, hi);
      vsq_lo = _mm256_fmadd_pd(lo, lo, vsq_lo);
      vsq_hi = _mm256_fmadd_pd(hi, hi, vsq_hi);
    }
    for (; c < w; ++c) {
      float v = row[c];
      if (std::isfinite(v)) {
        double d = v;
        tail_sum += d;
        tail_sq += d * d;
        ++finite;
      }
    }
  }
  Moments m;
  m.sum = hsum_pd(_mm256_add_pd(vsum_lo, vsum_hi)) + tail_sum;
  m.sum_sq = hsum_pd(_mm256_add_pd(vsq_lo, vsq_hi)) + tail_sq;
  m.finite = finite;
  return m;
}

void label_histogram_u8(const uint8_t* src, int src_stride, int h, int w, uint64_t counts[7]) {
  for (int i = 0; i < 7; ++i) counts[i] = 0;
  const __m256i targets[7] = {_mm256_set1_epi8(0),  _mm256_set1_epi8(1), _mm256_set1_epi8(2),
                              _mm256_set1_epi8(3),  _mm256_set1_epi8(4), _mm256_set1_epi8(5),
                              _mm256_set1_epi8(-1)};
  for (int r = 0; r < h; ++r) {
    const uint8_t* row = src + static_cast<size_t>(r) * src_stride;
    int c = 0;
    for (; c + 32 <= w; c += 32) {
      __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(row + c));
      for (int t = 0; t < 7; ++t) {
        __m256i eq = _mm256_cmpeq_epi8(v, targets[t]);
        counts[t] += __builtin_popcount(static_cast<unsigned>(_mm256_movemask_epi8(eq)));
      }
    }
    for (; c < w; ++c) {
      uint8_t v = row[c];
      if (v < 6)
        ++counts[v];
      else if (v == 255)
        ++counts[6];
    }
  }
}

long long count_nonfinite_f32(const float* src, int src_stride, int h, int w) {
  long long n = 0;
  for (int r = 0; r < h; ++r) {
    const float* row = src + static_cast<size_t>(r) * src_stride;
    int c = 0;
    for (; c + 8 <= w; c += 8) {
      __m256 v = _mm256_loadu_ps(row + c);
      unsigned fin = static_cast<unsigned>(_mm256_movemask_ps(finite_mask(v)));
      n += __builtin_popcount(~fin & 0xffu);
    }
    for (; c < w; ++c)
      if (!std::isfinite(row[c])) ++n;
  }
  return n;
}

void box3_mean_f32(const float* src, int h, int w, float* dst) {
  const __m256 qnan = _mm256_set1_ps(kQNaN);
  const __m256i zero = _mm256_setzero_si256();
  if (h >= 3 && w >= 3) {
    for (int r = 1; r + 1 < h; ++r) {
      int c = 1;
      for (; c + 8 <= w - 1; c += 8) {
        __m256 sum = _mm256_setzero_ps();
        __m256i cnt = zero;
        for (int dr = -1; dr <= 1; ++dr) {
          const float* row = src + static_cast<size_t>(r + dr) * w;
          for (int dc = -1; dc <= 1; ++dc) {
            __m256 v = _mm256_loadu_ps(row + c + dc);
            __m256 fin = finite_mask(v);
            sum = _mm256_add_ps(sum, _mm256_and_ps(fin, v));
            cnt = _mm256_sub_epi32(cnt, _mm256_castps_si256(fin));
          }
        }
        __m256 mean = _mm256_div_ps(sum, _mm256_cvtepi32_ps(cnt));
        __m256 empty = _mm256_castsi256_ps(_mm256_cmpeq_epi32(cnt, zero));
        mean = _mm256_blendv_ps(mean, qnan, empty);
        _mm256_storeu_ps(dst + static_cast<size_t>(r) * w + c, mean);
      }
      for (; c + 1 < w; ++c) dst[static_cast<size_t>(r) * w + c] = box3_cell(src, h, w, r, c);
      dst[static_cast<size_t>(r) * w] = box3_cell(src, h, w, r, 0);
      dst[static_cast<size_t>(r) * w + (w - 1)] = box3_cell(src, h, w, r, w - 1);
    }
    for (int c = 0; c < w; ++c) {
      dst[c] = box3_cell(src, h, w, 0, c);
      dst[static_cast<size_t>(h - 1) * w + c] = box3_cell(src, h, w, h - 1, c);
    }
  } else {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c) dst[static_cast<size_t>(r) * w + c] = box3_cell(src, h, w, r, c);
  }
}

void affine_f64(const double* weights, const double* bias, const double* x, int n_out, int dim,
                double* out) {
  for (int k = 0; k < n_out; ++k) {
    const double* wk = weights + static_cast<size_t>(k) * dim;
    __m256d acc = _mm256_setzero_pd();
    int j = 0;
    for (; j + 4 <= dim; j += 4)
      acc = _mm256_fmadd_pd(_mm256_loadu_pd(wk + j), _mm256_loadu_pd(x + j), acc);
    double s = hsum_pd(acc);
    for (; j < dim; ++j) s += wk[j] * x[j];
    out[k] = s + bias[k];
  }
}

void axpy_f64(double a, const double* x, double* y, size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace icebench::kernels::avx2
