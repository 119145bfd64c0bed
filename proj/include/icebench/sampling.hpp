#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "icebench/chart_labels.hpp"
#include "icebench/preprocess.hpp"
#include "icebench/raster.hpp"
#include "icebench/scene.hpp"

namespace icebench {

enum class SamplingMode { patch, crop };
enum class BorderMetric { chebyshev, euclidean };

struct SamplingConfig {
  SamplingMode mode = SamplingMode::patch;
  int patch_size = 224;  // crop runs typically use 256
  int stride = 100;
  double purity = 1.0;
  int border_distance = 0;  // 0 disables the border filter
  BorderMetric border_metric = BorderMetric::chebyshev;
  bool allow_land = false;
  bool reject_nonfinite = true;
  uint64_t seed = 0;
  int epoch_steps = 500;  // crop mode: steps per epoch
};

void validate_sampling_config(const SamplingConfig& cfg);

struct PatchRecord {
  std::string scene_id;
  int row = 0;
  int col = 0;
  int size = 0;
  uint8_t label = kIgnoreLabel;
};

// Borrowed view over one prepared scene's rasters. Null members disable the
// corresponding filter (no features -> no finiteness check, no land -> all sea).
struct SceneView {
  std::string scene_id;
  const FeatureStack* features = nullptr;
  const LabelRaster* labels = nullptr;
  const Raster<uint8_t>* land = nullptr;
};

// Shared purity predicate: counts[0..5] classes, counts[6] ignore. True when
// valid pixels exist and the dominant class reaches the purity fraction.
bool patch_purity_ok(const uint64_t counts[7], double purity, int* dominant_class);

// Stride-grid candidates filtered by land, non-finite, purity, and border
// distance; records in row-major origin order.
std::vector<PatchRecord> extract_patches(const SceneView& view, const SamplingConfig& cfg);
// Convenience: aligns channels in memory (default policy) and derives land.
std::vector<PatchRecord> extract_patches(const Scene& scene, const LabelRaster& labels,
                                         const SamplingConfig& cfg, double land_zone_max = 0.0);

// Stride-grid windows with at least one valid pixel; purity and border filters
// are skipped so mixed windows stay in (label records the dominant class only
// for bookkeeping). Feeds window pools for pixel-wise training.
std::vector<PatchRecord> extract_windows(const SceneView& view, const SamplingConfig& cfg);

struct Crop {
  int row = 0;
  int col = 0;
  int size = 0;
  FeatureStack features;
  LabelRaster labels;
};

// Plain window copy of features and labels at a fixed origin.
Crop copy_window(const SceneView& view, int r0, int c0, int size);

// Uniform origin keyed by (seed, scene_id, step_index); all-ignore crops are
// redrawn up to 16 times, then the step is skipped (nullopt).
std::optional<Crop> random_crop(const SceneView& view, const SamplingConfig& cfg,
                                uint64_t step_index);
std::optional<Crop> random_crop(const Scene& scene, const LabelRaster& labels,
                                const SamplingConfig& cfg, uint64_t step_index,
                                double land_zone_max = 0.0);

struct AugmentationConfig {
  bool enabled = false;
  double rotation_max_deg = 10.0;
  bool vertical_flip = true;
};

void validate_augmentation_config(const AugmentationConfig& cfg);

// Deterministic transform cores (the keyed draw lives in augment()).
void flip_vertical(FeatureStack& features, LabelRaster* labels);
// Bilinear features / nearest labels around the raster center; out-of-bounds
// sources become NaN / 255. angle_deg == 0 is an exact identity.
void rotate_about_center(FeatureStack& features, LabelRaster* labels, double angle_deg);
void augment_with(FeatureStack& features, LabelRaster* labels, bool flip, double angle_deg);
// Patch-mode callers pass labels == nullptr; the record's class is untouched.
void augment(FeatureStack& features, LabelRaster* labels, const AugmentationConfig& cfg,
             uint64_t rng_key);

struct DatasetSummary {
  long long n_samples = 0;
  std::array<long long, kNumClasses> class_counts{};
};

DatasetSummary summarize_records(const std::vector<PatchRecord>& records);
void save_patch_records(const std::vector<PatchRecord>& records, const std::string& jsonl_path);
std::vector<PatchRecord> load_patch_records(const std::string& jsonl_path);

// Extraction over a whole manifest; JSONL in manifest order, byte-identical
// for any worker count.
DatasetSummary build_patch_dataset(const DatasetManifest& manifest, const LabelingConfig& label_cfg,
                                   const SamplingConfig& sampling_cfg,
                                   const std::string& out_jsonl, int workers = 1);

}  // namespace icebench
