#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "icebench/jsonio.hpp"
#include "icebench/raster.hpp"

namespace icebench {

// Rows are true classes; columns 0..5 predicted classes, column 6 abstentions
// (prediction 255 against a valid truth). True 255 never enters the matrix.
struct ConfusionMatrix {
  static constexpr int kAbstainCol = kNumClasses;
  std::array<std::array<uint64_t, kNumClasses + 1>, kNumClasses> counts{};

  void add(uint8_t truth, uint8_t pred, uint64_t n = 1);
  void add_rasters(const LabelRaster& truth, const LabelRaster& pred);
  void merge(const ConfusionMatrix& other);
  uint64_t total_support() const;
  uint64_t row_total(int c) const;
  uint64_t col_total(int c) const;  // predicted-as-c, abstentions excluded
  uint64_t diagonal() const;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double iou = 0.0;
  uint64_t support = 0;
};

struct MetricsReport {
  double accuracy = 0.0;
  double precision_w = 0.0;
  double recall_w = 0.0;  // equals accuracy by construction
  double f1_w = 0.0;
  double iou_w = 0.0;
  std::array<ClassMetrics, kNumClasses> per_class{};
  uint64_t total_support = 0;
};

// Support-weighted scores; 0/0 ratios resolve to 0. Empty support is an error.
MetricsReport compute_metrics(const ConfusionMatrix& cm);

json metrics_to_json(const MetricsReport& report);
json confusion_to_json(const ConfusionMatrix& cm);
MetricsReport metrics_from_json(const json& j);

// usage_fraction in [0,1], wall_hours >= 0, units >= 1; exact product.
double core_hours(double usage_fraction, double wall_hours, int units);

struct ResourceSample {
  double t_seconds = 0.0;   // monotonic, relative to phase start
  double rss_bytes = 0.0;
  double cpu_busy = 0.0;    // busy core fraction of one unit, may exceed 1 with threads
};

struct PhaseStats {
  double max_mem_gb = 0.0;
  double avg_mem_gb = 0.0;   // time-weighted
  double wall_hours = 0.0;
  double mean_busy = 0.0;    // time-weighted busy fraction, clipped to [0,1]
  double core_hours = 0.0;
  bool no_samples = false;
};

PhaseStats summarize_phase(const std::vector<ResourceSample>& samples, int units);

struct EfficiencyReport {
  PhaseStats train;
  PhaseStats inference;
  int computing_units = 1;
  int epochs = 0;
  double train_wall_hours = 0.0;      // authoritative wall clock, not sample span
  double inference_wall_minutes = 0.0;
};

// Field names are the report vocabulary: MaxMT/AvgMT/MaxMI/AvgMI in GB,
// TotCT/TotCI in core-hours, AvgET in minutes, TotTT in hours, TotTI in minutes.
json efficiency_to_json(const EfficiencyReport& report);

class ResourceMonitor {
 public:
  explicit ResourceMonitor(double interval_seconds = 0.05);
  ~ResourceMonitor();
  ResourceMonitor(const ResourceMonitor&) = delete;
  ResourceMonitor& operator=(const ResourceMonitor&) = delete;

  std::vector<ResourceSample> stop();  // idempotent; returns collected samples
  double elapsed_seconds() const;

 private:
  struct Impl;
  Impl* impl_;
};

}  // namespace icebench
