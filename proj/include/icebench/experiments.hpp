#pragma once

#include <optional>
#include <string>
#include <vector>

#include "icebench/chart_labels.hpp"
#include "icebench/metrics.hpp"
#include "icebench/models.hpp"
#include "icebench/partition.hpp"
#include "icebench/preprocess.hpp"
#include "icebench/sampling.hpp"

namespace icebench {

// One classification run end to end: feature choice, labeling, preparation,
// sampling, training. Serialized into every report for reproducibility.
struct PipelineConfig {
  std::string paradigm = "patch";  // "patch" | "pixel"
  std::vector<std::string> features;
  LabelingConfig labeling;
  AlignmentPolicy alignment;
  int downscale_ratio = 1;
  LandPolicy land_policy = LandPolicy::exclude;
  SamplingConfig sampling;  // patch extraction grid (patch paradigm, pools, eval tiles)
  SamplingConfig crop;      // random crop draws (pixel paradigm)
  AugmentationConfig augmentation;
  TrainConfig train;
  HoldoutSpec holdout;  // validation share drawn from the training manifest
  std::vector<std::string> allow_constant;
  uint64_t seed = 0;
};

void validate_pipeline_config(const PipelineConfig& cfg);
PipelineConfig pipeline_config_from_json(const json& j);
json pipeline_config_to_json(const PipelineConfig& cfg);

// Align, label, downscale, normalize, mask. Stats must come from the training
// split of the same pipeline.
PreparedScene prepare_scene(const Scene& raw, const PipelineConfig& cfg,
                            const NormalizationStats& stats);
std::vector<PreparedScene> prepare_scenes(const std::vector<std::string>& paths,
                                          const PipelineConfig& cfg,
                                          const NormalizationStats& stats, int workers = 1);
NormalizationStats compute_pipeline_stats(const std::vector<std::string>& train_paths,
                                          const PipelineConfig& cfg, int workers = 1);

std::vector<PatchRecord> extract_records(const std::vector<PreparedScene>& scenes,
                                         const SamplingConfig& cfg);
PatchSample sample_of(const PreparedScene& scene, const PatchRecord& rec);
std::vector<PatchSample> samples_of(const std::vector<PreparedScene>& scenes,
                                    const std::vector<PatchRecord>& records);

struct TrainedRun {
  FitResult fit;
  NormalizationStats stats;
  EfficiencyReport efficiency;
  long long n_train_samples = 0;
  long long n_val_samples = 0;
};

// Scene-level validation holdout, stats from the training side, then the
// paradigm's trainer. Efficiency covers the training phase.
TrainedRun train_pipeline(const DatasetManifest& train_manifest, const PipelineConfig& cfg,
                          int workers = 1);

// Paradigm-appropriate scoring: patch models on accepted windows, pixel models
// densely on every valid pixel.
MetricsReport evaluate_model(const ModelState& model, const std::vector<PreparedScene>& test,
                             const PipelineConfig& cfg, ConfusionMatrix* confusion = nullptr);

// Patch model applied to a full raster by non-overlapping tiling; the final
// row/column tile is clamped to the edge and overwrites the overlap.
LabelRaster tile_predict(const ModelState& model, const FeatureStack& stack, int tile);

struct CellResult {
  std::string train_key;
  std::string test_key;
  std::string value;  // sweep axis value
  bool skipped = false;
  bool errored = false;
  std::string note;  // skip reason or error text
  bool has_metrics = false;
  MetricsReport metrics;
  json extra;  // confusion, efficiency, attributions, ...
};

struct ExperimentReport {
  std::string name;
  std::string kind;  // transfer | sweep | prep_ablation | fair_compare | feature_ablation
  json provenance;
  std::vector<CellResult> cells;
};

struct TransferConfig {
  PipelineConfig pipeline;
  PartitionKind axis = PartitionKind::season;
  std::string train_manifest;
  std::string test_manifest;
  std::string climatology_path;  // axis == cryo
  std::string regions_path;      // axis == region
  bool include_all = true;       // pool of scenes with a defined axis key
  bool include_baseline = true;  // entire manifest, axis ignored
  int min_scenes = 2;
  int workers = 1;
};

// Cross-partition matrix; rows that cannot train are marked skipped and the
// run continues.
ExperimentReport run_transferability(const TransferConfig& cfg);

struct SweepConfig {
  PipelineConfig pipeline;
  std::string axis;  // "downscale" | "patch_size" | "data_size"
  std::vector<long long> values;
  std::string train_manifest;
  std::string test_manifest;
  int workers = 1;
};

ExperimentReport run_sweep(const SweepConfig& cfg);

struct PrepAblationRow {
  std::string key;
  bool augmentation = false;
  LandPolicy land_policy = LandPolicy::exclude;
  int border_distance = 0;
};

struct PrepAblationConfig {
  PipelineConfig pipeline;
  std::vector<PrepAblationRow> rows;  // empty -> base plus each single toggle
  std::string train_manifest;
  std::string test_manifest;
  int workers = 1;
};

ExperimentReport run_preparation_ablation(const PrepAblationConfig& cfg);

struct FairCompareConfig {
  PipelineConfig pipeline;  // sampling.patch_size doubles as the tile size
  std::string train_manifest;
  std::string test_manifest;
  std::string patch_model_path;  // optional pre-trained inputs, each with its stats
  std::string patch_stats_path;
  std::string pixel_model_path;
  std::string pixel_stats_path;
  int workers = 1;
};

// Both paradigms scored at pixel granularity on the same scenes.
ExperimentReport run_fair_compare(const FairCompareConfig& cfg);

struct FeatureAblationConfig {
  PipelineConfig pipeline;
  std::string train_manifest;
  std::string test_manifest;
  std::string baseline = "mean";  // "mean" | "zero"
  std::string model_path;         // optional pre-trained input with its stats
  std::string model_stats_path;
  int workers = 1;
};

// attribution(c) = score(full) - score(channel c replaced by the baseline).
ExperimentReport run_feature_ablation(const FeatureAblationConfig& cfg);

// report.json + cells.csv + plotdata/*.tsv under out_dir.
void emit_report(const ExperimentReport& report, const std::string& out_dir);
json report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(const json& j);
bool report_has_errors(const ExperimentReport& report);  // skipped cells do not count

// Content hash with volatile fields (efficiency, timestamps, wall clocks)
// stripped; equal digests mean reproducible metrics.
std::string stable_digest(const json& report_json);

json experiment_provenance(const std::string& name, const std::string& kind,
                           const PipelineConfig& cfg, const std::vector<std::string>& input_files,
                           int workers);

}  // namespace icebench
