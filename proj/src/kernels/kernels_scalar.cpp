#include <cmath>
#include <cstdint>
#include <limits>

#include "icebench/kernels.hpp"

namespace icebench::kernels::scalar {

namespace {
constexpr float kQNaN = std::numeric_limits<float>::quiet_NaN();
}

void block_mean_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw) {
  for (int i = 0; i < dh; ++i) {
    for (int j = 0; j < dw; ++j) {
      const float* block =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
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
      dst[static_cast<size_t>(i) * dw + j] = cnt ? sum / static_cast<float>(cnt) : kQNaN;
    }
  }
}

void block_max_f32(const float* src, int src_stride, int bh, int bw, float* dst, int dh, int dw) {
  for (int i = 0; i < dh; ++i) {
    for (int j = 0; j < dw; ++j) {
      const float* block =
          src + static_cast<size_t>(i) * bh * src_stride + static_cast<size_t>(j) * bw;
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
      dst[static_cast<size_t>(i) * dw + j] = cnt ? best : kQNaN;
    }
  }
}

void standardize_f32(const float* x, size_t n, float mean, float inv_std, float* dst) {
  for (size_t i = 0; i < n; ++i) dst[i] = (x[i] - mean) * inv_std;
}

Moments window_moments_f32(const float* src, int src_stride, int h, int w) {
  Moments m;
  for (int r = 0; r < h; ++r) {
    const float* row = src + static_cast<size_t>(r) * src_stride;
    for (int c = 0; c < w; ++c) {
      float v = row[c];
      if (std::isfinite(v)) {
        double d = v;
        m.sum += d;
        m.sum_sq += d * d;
        ++m.finite;
      }
    }
  }
  return m;
}

void label_histogram_u8(const uint8_t* src, int src_stride, int h, int w, uint64_t counts[7]) {
  for (int i = 0; i < 7; ++i) counts[i] = 0;
  for (int r = 0; r < h; ++r) {
    const uint8_t* row = src + static_cast<size_t>(r) * src_stride;
    for (int c = 0; c < w; ++c) {
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
    for (int c = 0; c < w; ++c)
      if (!std::isfinite(row[c])) ++n;
  }
  return n;
}

void box3_mean_f32(const float* src, int h, int w, float* dst) {
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
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
      dst[static_cast<size_t>(r) * w + c] = cnt ? sum / static_cast<float>(cnt) : kQNaN;
    }
  }
}

void affine_f64(const double* weights, const double* bias, const double* x, int n_out, int dim,
                double* out) {
  for (int k = 0; k < n_out; ++k) {
    const double* wk = weights + static_cast<size_t>(k) * dim;
    double acc = 0.0;
    for (int j = 0; j < dim; ++j) acc += wk[j] * x[j];
    out[k] = acc + bias[k];
  }
}

void axpy_f64(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace icebench::kernels::scalar
