#include "icebench/chart_labels.hpp"

#include <algorithm>
#include <filesystem>
#include <unordered_map>

#include "icebench/jsonio.hpp"

namespace icebench {

void validate_labeling_config(const LabelingConfig& cfg) {
  // threshold above 0.5 is what makes "dominant type" unique
  if (!(cfg.dominance_threshold > 0.5 && cfg.dominance_threshold <= 1.0))
    fail(Err::ConfigError, "labeling.dominance_threshold: must be in (0.5, 1.0], got " +
                               std::to_string(cfg.dominance_threshold));
  if (cfg.open_water_sic_max < 0.0 || cfg.open_water_sic_max > 100.0)
    fail(Err::ConfigError, "labeling.open_water_sic_max: must be in [0, 100]");
}

int map_sigrid_code(int sod_code) {
  switch (sod_code) {
    case 0:
    case 80:
      return 0;  // open water / ice free
    case 81:
    case 82:
      return 1;  // new ice
    case 83:
    case 84:
    case 85:
      return 2;  // young ice
    case 87:
    case 88:
    case 89:
      return 3;  // thin first-year ice
    case 86:
    case 91:
    case 93:
      return 4;  // thick first-year ice (86 groups here, not with 87-89)
    case 95:
    case 96:
    case 97:
      return 5;  // old ice
    default:
      return kUnknownSod;
  }
}

uint8_t polygon_label(const IceChartPolygon& poly, const LabelingConfig& cfg) {
  if (poly.total_sic <= cfg.open_water_sic_max) return 0;
  double best_share = -1.0;
  int best_code = kUnknownSod;
  for (const auto& part : poly.partials) {
    double share = part.concentration / poly.total_sic;
    if (share > 1.0) share = 1.0;  // rounding slack in real charts
    if (share > best_share) {
      best_share = share;
      best_code = part.sod_code;
    }
  }
  if (best_share + 1e-12 < cfg.dominance_threshold) return kIgnoreLabel;
  int cls = map_sigrid_code(best_code);
  if (cls == kUnknownSod) return kIgnoreLabel;
  return static_cast<uint8_t>(cls);
}

LabelRaster rasterize_labels(const Scene& scene, const LabelingConfig& cfg) {
  std::unordered_map<int, uint8_t> by_id;
  by_id.reserve(scene.polygons.size());
  for (const auto& p : scene.polygons) by_id[p.id] = polygon_label(p, cfg);

  Raster<uint8_t> land = land_mask_at_ref(scene, cfg.land_zone_max);
  LabelRaster out(scene.height, scene.width, kIgnoreLabel);
  for (int r = 0; r < scene.height; ++r) {
    const int32_t* ids = scene.polygon_raster.row(r);
    const uint8_t* land_row = land.row(r);
    uint8_t* dst = out.row(r);
    for (int c = 0; c < scene.width; ++c) {
      if (ids[c] < 0 || land_row[c]) continue;  // stays 255
      dst[c] = by_id.find(static_cast<int>(ids[c]))->second;
    }
  }
  return out;
}

void save_label_raster(const LabelRaster& labels, const std::string& scene_id, double threshold,
                       const std::string& dir) {
  std::filesystem::path d(dir);
  write_bytes(d / "labels.u8", labels.data(), labels.size());
  json j;
  j["scene_id"] = scene_id;
  j["height"] = labels.height();
  j["width"] = labels.width();
  j["threshold"] = threshold;
  save_json_file(j, d / "labels.json");
}

LabelRaster load_label_raster(const std::string& dir, std::string* scene_id, double* threshold) {
  std::filesystem::path d(dir);
  json j = load_json_file(d / "labels.json");
  int h = j.at("height").get<int>();
  int w = j.at("width").get<int>();
  if (scene_id) *scene_id = j.at("scene_id").get<std::string>();
  if (threshold) *threshold = j.at("threshold").get<double>();
  std::vector<uint8_t> data(static_cast<size_t>(h) * w);
  read_bytes_exact(d / "labels.u8", data.data(), data.size(), "labels");
  return LabelRaster::from_data(h, w, std::move(data));
}

}  // namespace icebench
