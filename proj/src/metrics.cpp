#include "icebench/metrics.hpp"

#include <cmath>

#include "icebench/error.hpp"

namespace icebench {

void ConfusionMatrix::add(uint8_t truth, uint8_t pred, uint64_t n) {
  if (truth == kIgnoreLabel) return;
  if (truth >= kNumClasses) fail(Err::DomainError, "true label out of range");
  if (pred == kIgnoreLabel) {
    counts[truth][kAbstainCol] += n;
    return;
  }
  if (pred >= kNumClasses) fail(Err::DomainError, "predicted label out of range");
  counts[truth][pred] += n;
}

void ConfusionMatrix::add_rasters(const LabelRaster& truth, const LabelRaster& pred) {
  if (!truth.same_shape(pred)) fail(Err::ShapeMismatch, "confusion rasters differ in shape");
  const uint8_t* t = truth.data();
  const uint8_t* p = pred.data();
  const size_t n = truth.size();
  for (size_t i = 0; i < n; ++i) add(t[i], p[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  for (int r = 0; r < kNumClasses; ++r)
    for (int c = 0; c <= kNumClasses; ++c) counts[r][c] += other.counts[r][c];
}

uint64_t ConfusionMatrix::total_support() const {
  uint64_t n = 0;
  for (int r = 0; r < kNumClasses; ++r) n += row_total(r);
  return n;
}

uint64_t ConfusionMatrix::row_total(int c) const {
  uint64_t n = 0;
  for (int j = 0; j <= kNumClasses; ++j) n += counts[c][j];
  return n;
}

uint64_t ConfusionMatrix::col_total(int c) const {
  uint64_t n = 0;
  for (int r = 0; r < kNumClasses; ++r) n += counts[r][c];
  return n;
}

uint64_t ConfusionMatrix::diagonal() const {
  uint64_t n = 0;
  for (int c = 0; c < kNumClasses; ++c) n += counts[c][c];
  return n;
}

namespace {

double ratio0(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  const uint64_t n_total = cm.total_support();
  if (n_total == 0) fail(Err::EmptySupport, "no labeled samples to score");

  MetricsReport report;
  report.total_support = n_total;
  const double n = static_cast<double>(n_total);

  double tp_sum = 0.0;
  double precision_acc = 0.0;
  double f1_acc = 0.0;
  double iou_acc = 0.0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    const double support = static_cast<double>(cm.row_total(c));
    const double predicted = static_cast<double>(cm.col_total(c));
    ClassMetrics& m = report.per_class[c];
    m.support = cm.row_total(c);
    m.precision = ratio0(tp, predicted);
    m.recall = ratio0(tp, support);
    m.f1 = ratio0(2.0 * m.precision * m.recall, m.precision + m.recall);
    m.iou = ratio0(m.f1, 2.0 - m.f1);
    tp_sum += tp;
    precision_acc += support * m.precision;
    f1_acc += support * m.f1;
    iou_acc += support * m.iou;
  }
  report.accuracy = tp_sum / n;
  report.recall_w = tp_sum / n;  // sum_c support_c * (tp_c / support_c) collapses to this
  report.precision_w = precision_acc / n;
  report.f1_w = f1_acc / n;
  report.iou_w = iou_acc / n;
  return report;
}

json metrics_to_json(const MetricsReport& report) {
  json per_class = json::array();
  for (int c = 0; c < kNumClasses; ++c) {
    const ClassMetrics& m = report.per_class[c];
    per_class.push_back({{"class", class_name(c)},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"iou", m.iou},
                         {"support", m.support}});
  }
  return json{{"accuracy", report.accuracy},
              {"precision_w", report.precision_w},
              {"recall_w", report.recall_w},
              {"f1_w", report.f1_w},
              {"iou_w", report.iou_w},
              {"total_support", report.total_support},
              {"per_class", per_class}};
}

MetricsReport metrics_from_json(const json& j) {
  MetricsReport report;
  report.accuracy = j.at("accuracy").get<double>();
  report.precision_w = j.at("precision_w").get<double>();
  report.recall_w = j.at("recall_w").get<double>();
  report.f1_w = j.at("f1_w").get<double>();
  report.iou_w = j.at("iou_w").get<double>();
  report.total_support = j.at("total_support").get<uint64_t>();
  const json& per_class = j.at("per_class");
  for (int c = 0; c < kNumClasses && c < static_cast<int>(per_class.size()); ++c) {
    const json& m = per_class[c];
    report.per_class[c].precision = m.at("precision").get<double>();
    report.per_class[c].recall = m.at("recall").get<double>();
    report.per_class[c].f1 = m.at("f1").get<double>();
    report.per_class[c].iou = m.at("iou").get<double>();
    report.per_class[c].support = m.at("support").get<uint64_t>();
  }
  return report;
}

json confusion_to_json(const ConfusionMatrix& cm) {
  json rows = json::array();
  for (int r = 0; r < kNumClasses; ++r) {
    json row = json::array();
    for (int c = 0; c <= kNumClasses; ++c) row.push_back(cm.counts[r][c]);
    rows.push_back(std::move(row));
  }
  return json{{"rows", rows}, {"abstain_col", ConfusionMatrix::kAbstainCol}};
}

double core_hours(double usage_fraction, double wall_hours, int units) {
  if (!(usage_fraction >= 0.0 && usage_fraction <= 1.0))
    fail(Err::DomainError, "usage fraction must lie in [0, 1]");
  if (!(wall_hours >= 0.0)) fail(Err::DomainError, "wall hours must be non-negative");
  if (units < 1) fail(Err::DomainError, "computing units must be at least 1");
  return usage_fraction * wall_hours * static_cast<double>(units);
}

PhaseStats summarize_phase(const std::vector<ResourceSample>& samples, int units) {
  if (units < 1) fail(Err::DomainError, "computing units must be at least 1");
  PhaseStats stats;
  if (samples.empty()) {
    stats.no_samples = true;
    return stats;
  }
  constexpr double kGb = 1e9;
  double max_mem = 0.0;
  for (const ResourceSample& s : samples) max_mem = std::max(max_mem, s.rss_bytes);
  stats.max_mem_gb = max_mem / kGb;

  const double span = samples.back().t_seconds - samples.front().t_seconds;
  if (samples.size() == 1 || !(span > 0.0)) {
    stats.avg_mem_gb = samples.front().rss_bytes / kGb;
    stats.mean_busy = std::min(1.0, std::max(0.0, samples.front().cpu_busy));
  } else {
    // Trapezoidal time weighting; uneven sampling intervals are expected.
    double mem_area = 0.0;
    double busy_area = 0.0;
    for (size_t i = 1; i < samples.size(); ++i) {
      const double dt = samples[i].t_seconds - samples[i - 1].t_seconds;
      if (!(dt > 0.0)) continue;
      mem_area += 0.5 * (samples[i].rss_bytes + samples[i - 1].rss_bytes) * dt;
      busy_area += 0.5 * (samples[i].cpu_busy + samples[i - 1].cpu_busy) * dt;
    }
    stats.avg_mem_gb = mem_area / span / kGb;
    stats.mean_busy = std::min(1.0, std::max(0.0, busy_area / span));
  }
  stats.wall_hours = std::max(0.0, span) / 3600.0;
  stats.core_hours = core_hours(stats.mean_busy, stats.wall_hours, units);
  return stats;
}

json efficiency_to_json(const EfficiencyReport& report) {
  const double tot_tt_hours =
      report.train_wall_hours > 0.0 ? report.train_wall_hours : report.train.wall_hours;
  const double tot_ti_minutes = report.inference_wall_minutes > 0.0
                                    ? report.inference_wall_minutes
                                    : report.inference.wall_hours * 60.0;
  const double avg_et =
      report.epochs > 0 ? tot_tt_hours * 60.0 / static_cast<double>(report.epochs) : 0.0;
  const double tot_ct = core_hours(report.train.mean_busy, tot_tt_hours, report.computing_units);
  const double tot_ci =
      core_hours(report.inference.mean_busy, tot_ti_minutes / 60.0, report.computing_units);
  return json{{"MaxMT", report.train.max_mem_gb},
              {"AvgMT", report.train.avg_mem_gb},
              {"MaxMI", report.inference.max_mem_gb},
              {"AvgMI", report.inference.avg_mem_gb},
              {"TotCT", tot_ct},
              {"TotCI", tot_ci},
              {"AvgET", avg_et},
              {"TotTT", tot_tt_hours},
              {"TotTI", tot_ti_minutes},
              {"computing_units", report.computing_units},
              {"epochs", report.epochs},
              {"train_busy_fraction", report.train.mean_busy},
              {"inference_busy_fraction", report.inference.mean_busy},
              {"train_no_samples", report.train.no_samples},
              {"inference_no_samples", report.inference.no_samples}};
}

}  // namespace icebench
