#pragma once

#include <cstdint>
#include <string>

#include "icebench/raster.hpp"
#include "icebench/scene.hpp"

namespace icebench {

struct LabelingConfig {
  double dominance_threshold = 0.65;  // fraction of total SIC a type must reach
  double open_water_sic_max = 0.0;    // total_sic <= this -> open water
  double land_zone_max = 0.0;         // distance_map <= this is land when no mask exists
};

void validate_labeling_config(const LabelingConfig& cfg);

// Stage-of-development code -> class 0..5, or -1 for codes outside the table.
int map_sigrid_code(int sod_code);
inline constexpr int kUnknownSod = -1;

// Dominance rule per polygon: open water cutoff, then normalized shares.
// Returns 0..5 or kIgnoreLabel.
uint8_t polygon_label(const IceChartPolygon& poly, const LabelingConfig& cfg);

// Per-pixel labels on the scene's reference grid; 255 on uncharted and land.
LabelRaster rasterize_labels(const Scene& scene, const LabelingConfig& cfg);

// Persisted form: <dir>/labels.u8 raw payload + <dir>/labels.json sidecar.
void save_label_raster(const LabelRaster& labels, const std::string& scene_id, double threshold,
                       const std::string& dir);
LabelRaster load_label_raster(const std::string& dir, std::string* scene_id = nullptr,
                              double* threshold = nullptr);

}  // namespace icebench
