#pragma once

// Brute-force reference implementations for the test suite. Deliberately
// structured differently from the library code: metrics come from raw label
// vectors instead of a confusion matrix, IoU is set-theoretic instead of
// derived from F1, and the geometry filters scan every pixel.

#include <cmath>
#include <cstdint>
#include <vector>

#include "icebench/metrics.hpp"
#include "icebench/models.hpp"
#include "icebench/preprocess.hpp"
#include "icebench/raster.hpp"
#include "icebench/rng.hpp"

namespace oracle {

constexpr int kClasses = icebench::kNumClasses;

struct NaiveMetrics {
  double accuracy = 0.0;
  double precision_w = 0.0;
  double recall_w = 0.0;
  double f1_w = 0.0;
  double iou_w = 0.0;
  double per_class_recall[kClasses] = {};
  double per_class_f1[kClasses] = {};
  long long total = 0;
};

inline double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Weighted metrics straight from the label vectors. Truth 255 is skipped;
// prediction 255 counts against the true class only (a miss, not anyone's
// false positive).
inline NaiveMetrics naive_metrics(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  NaiveMetrics m;
  long long tp[kClasses] = {}, fp[kClasses] = {}, fn[kClasses] = {}, support[kClasses] = {};
  for (size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    if (t == 255) continue;
    support[t] += 1;
    m.total += 1;
    if (p == t) {
      tp[t] += 1;
    } else {
      fn[t] += 1;
      if (p != 255) fp[p] += 1;
    }
  }
  long long correct = 0;
  for (int c = 0; c < kClasses; ++c) correct += tp[c];
  m.accuracy = safe_div(static_cast<double>(correct), static_cast<double>(m.total));
  for (int c = 0; c < kClasses; ++c) {
    double w = safe_div(static_cast<double>(support[c]), static_cast<double>(m.total));
    double prec = safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fp[c]));
    double rec = safe_div(static_cast<double>(tp[c]), static_cast<double>(support[c]));
    double f1 = safe_div(2.0 * prec * rec, prec + rec);
    // Set-theoretic intersection over union, not the F1 identity.
    double iou =
        safe_div(static_cast<double>(tp[c]), static_cast<double>(tp[c] + fp[c] + fn[c]));
    m.precision_w += w * prec;
    m.recall_w += w * rec;
    m.f1_w += w * f1;
    m.iou_w += w * iou;
    m.per_class_recall[c] = rec;
    m.per_class_f1[c] = f1;
  }
  return m;
}

// Chebyshev distance from pixel (r, c) to the axis-aligned rectangle
// [r0, r0+size) x [c0, c0+size).
inline int cheb_to_rect(int r, int c, int r0, int c0, int size) {
  int r1 = r0 + size - 1, c1 = c0 + size - 1;
  int dr = r < r0 ? r0 - r : (r > r1 ? r - r1 : 0);
  int dc = c < c0 ? c0 - c : (c > c1 ? c - c1 : 0);
  return dr > dc ? dr : dc;
}

// Full-raster scan: accept the window unless a valid pixel of another class
// lies within distance d of it.
inline bool border_ok_brute(const icebench::LabelRaster& labels, int r0, int c0, int size, int cls,
                            int d) {
  for (int r = 0; r < labels.height(); ++r)
    for (int c = 0; c < labels.width(); ++c) {
      uint8_t v = labels.at(r, c);
      if (v >= kClasses || v == cls) continue;
      if (cheb_to_rect(r, c, r0, c0, size) <= d) return false;
    }
  return true;
}

// Finite-mean of one block, double accumulation, element order by rows.
inline double block_mean_brute(const icebench::Raster<float>& src, int r0, int c0, int bh, int bw,
                               long long* finite_out = nullptr) {
  double sum = 0.0;
  long long n = 0;
  for (int r = r0; r < r0 + bh; ++r)
    for (int c = c0; c < c0 + bw; ++c) {
      float v = src.at(r, c);
      if (std::isfinite(v)) {
        sum += v;
        ++n;
      }
    }
  if (finite_out) *finite_out = n;
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

// Mean over every finite pixel of a raster.
inline double raster_mean_brute(const icebench::Raster<float>& r) {
  double sum = 0.0;
  long long n = 0;
  for (float v : r.storage())
    if (std::isfinite(v)) {
      sum += v;
      ++n;
    }
  return sum / static_cast<double>(n);
}

struct NaivePhase {
  double max_mem_gb = 0.0;
  double avg_mem_gb = 0.0;
  double wall_hours = 0.0;
  double mean_busy = 0.0;
  double core_hours = 0.0;
};

// Time-weighted averages via explicit segment loop (not the library's running
// accumulation). Requires at least two samples spanning positive time.
inline NaivePhase naive_phase(const std::vector<icebench::ResourceSample>& s, int units) {
  NaivePhase p;
  double span = s.back().t_seconds - s.front().t_seconds;
  double mem_area = 0.0, busy_area = 0.0;
  for (size_t i = 1; i < s.size(); ++i) {
    double dt = s[i].t_seconds - s[i - 1].t_seconds;
    mem_area += 0.5 * (s[i].rss_bytes + s[i - 1].rss_bytes) * dt;
    double b0 = std::min(1.0, std::max(0.0, s[i - 1].cpu_busy));
    double b1 = std::min(1.0, std::max(0.0, s[i].cpu_busy));
    busy_area += 0.5 * (b0 + b1) * dt;
  }
  for (const auto& x : s) p.max_mem_gb = std::max(p.max_mem_gb, x.rss_bytes);
  p.max_mem_gb /= 1e9;
  p.avg_mem_gb = mem_area / span / 1e9;
  p.wall_hours = span / 3600.0;
  p.mean_busy = busy_area / span;
  p.core_hours = p.mean_busy * p.wall_hours * units;
  return p;
}

// Central finite differences of the mean cross entropy in every coordinate.
inline void fd_gradient(const std::vector<double>& weights, const std::vector<double>& bias,
                        int n_classes, int dim, const std::vector<icebench::PatchSample>& samples,
                        double eps, std::vector<double>* gw, std::vector<double>* gb) {
  auto loss_at = [&](const std::vector<double>& w, const std::vector<double>& b) {
    return icebench::ce_loss_and_grad(w, b, n_classes, dim, samples.data(), samples.size(),
                                      nullptr, nullptr);
  };
  gw->assign(weights.size(), 0.0);
  gb->assign(bias.size(), 0.0);
  std::vector<double> w = weights;
  for (size_t i = 0; i < w.size(); ++i) {
    double keep = w[i];
    w[i] = keep + eps;
    double up = loss_at(w, bias);
    w[i] = keep - eps;
    double dn = loss_at(w, bias);
    w[i] = keep;
    (*gw)[i] = (up - dn) / (2.0 * eps);
  }
  std::vector<double> b = bias;
  for (size_t i = 0; i < b.size(); ++i) {
    double keep = b[i];
    b[i] = keep + eps;
    double up = loss_at(weights, b);
    b[i] = keep - eps;
    double dn = loss_at(weights, b);
    b[i] = keep;
    (*gb)[i] = (up - dn) / (2.0 * eps);
  }
}

// ---------------------------------------------------------------------------
// test data builders

inline icebench::Raster<float> random_raster(int h, int w, uint64_t key, double nan_fraction = 0.0,
                                             double lo = -10.0, double hi = 10.0) {
  icebench::RngStream rng(key);
  icebench::Raster<float> r(h, w);
  for (float& v : r.storage()) {
    if (nan_fraction > 0.0 && rng.next_bernoulli(nan_fraction))
      v = std::numeric_limits<float>::quiet_NaN();
    else
      v = static_cast<float>(rng.next_uniform(lo, hi));
  }
  return r;
}

inline icebench::LabelRaster random_labels(int h, int w, uint64_t key,
                                           double ignore_fraction = 0.1) {
  icebench::RngStream rng(key);
  icebench::LabelRaster r(h, w);
  for (uint8_t& v : r.storage())
    v = rng.next_bernoulli(ignore_fraction)
            ? icebench::kIgnoreLabel
            : static_cast<uint8_t>(rng.next_below(kClasses));
  return r;
}

inline icebench::FeatureStack make_stack(std::vector<icebench::Raster<float>> channels,
                                         std::vector<std::string> names) {
  icebench::FeatureStack s;
  s.height = channels.front().height();
  s.width = channels.front().width();
  s.channels = std::move(channels);
  s.names = std::move(names);
  return s;
}

}  // namespace oracle
