#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icebench/raster.hpp"
#include "icebench/scene.hpp"

namespace icebench {

enum class AlignKernel { block_average, block_max, nearest_replicate };

const char* align_kernel_name(AlignKernel k);
AlignKernel align_kernel_from_name(const std::string& name);

// Per-channel reduction kernels for co-registration. Upsampling always
// replicates the nearest source cell whatever the assigned kernel says;
// the kernel matters when a channel is an integer multiple of the grid.
struct AlignmentPolicy {
  std::map<std::string, AlignKernel> per_channel;
  AlignKernel kernel_for(const std::string& channel_name) const;
  std::string describe() const;  // stable compact form for provenance
};

struct DownscaleConfig {
  int ratio = 1;
};

struct ChannelStats {
  double mean = 0.0;
  double std = 0.0;
};

struct NormalizationStats {
  std::map<std::string, ChannelStats> channels;
  std::string id() const;  // content hash, used as provenance normalization_id
  const ChannelStats& require(const std::string& name) const;  // MissingStats
};

void save_normalization_stats(const NormalizationStats& stats, const std::string& path);
NormalizationStats load_normalization_stats(const std::string& path);

enum class LandPolicy { include, exclude };
const char* land_policy_name(LandPolicy p);
LandPolicy land_policy_from_name(const std::string& name);

// All channels brought to the scene's reference grid. Idempotent.
Scene align_scene(const Scene& scene, const AlignmentPolicy& policy);

Raster<float> downscale(const Raster<float>& raster, int ratio, AlignKernel kernel);
LabelRaster downscale_labels(const LabelRaster& labels, int ratio);
// Land survives a block if every member is land (mirrors the all-255 label rule).
Raster<uint8_t> downscale_land(const Raster<uint8_t>& land, int ratio);

// Whole-scene geometry step: aligned channels reduced by ratio, polygon raster
// by per-block majority id (ties -> smaller id, all uncharted -> -1), land by
// the AND rule. ratio == 1 is identity.
Scene downscale_scene(const Scene& aligned, int ratio, const AlignmentPolicy& policy);

// Mean/std over finite pixels of the split, accumulated in manifest order.
// Channels listed in allow_constant get std forced to 1 instead of erroring.
NormalizationStats compute_normalization(const std::vector<Scene>& scenes,
                                         const std::vector<std::string>& channels,
                                         const std::vector<std::string>& allow_constant = {});
NormalizationStats compute_normalization(const DatasetManifest& train,
                                         const std::vector<std::string>& channels,
                                         const std::vector<std::string>& allow_constant = {},
                                         int workers = 1);

/// Model-ready input: standardized channels at reference dims, in request order.
struct FeatureStack {
  std::vector<std::string> names;
  std::vector<Raster<float>> channels;
  int height = 0;
  int width = 0;
  int index_of(const std::string& name) const;  // -1 when absent
};

inline constexpr const char* kMonthFeature = "month";
// Fixed affine for the virtual month channel; no data stats involved.
inline float month_feature_value(int month) {
  return static_cast<float>((month - 6.5) / 3.45);
}

// Channels standardized to (x - mean)/std; "month" materialized as a constant.
/// exclude: land pixels zeroed after standardization and, when labels is given,
// relabeled 255. MissingStats names the channel.
FeatureStack apply_mask_and_normalize(const Scene& aligned, const NormalizationStats& stats,
                                      const std::vector<std::string>& features, LandPolicy policy,
                                      double land_zone_max = 0.0, LabelRaster* labels = nullptr);

}  // namespace icebench
