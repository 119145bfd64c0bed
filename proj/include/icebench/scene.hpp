#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icebench/raster.hpp"

namespace icebench {

struct Date {
  int year = 0;
  int month = 0;
  int day = 0;
};

// Strict "YYYY-MM-DD"; throws MalformedDate naming the field.
Date parse_date(const std::string& iso, std::string_view field = "acquisition_date");
std::string format_date(const Date& d);
bool is_leap_year(int year);
int days_in_month(int year, int month);
int day_of_year(const Date& d);

struct ChannelSpec {
  std::string name;
  int native_height = 0;
  int native_width = 0;
  std::string dtype = "f32";
  std::string file;
};

struct SodPartial {
  int sod_code = 0;
  double concentration = 0.0;
};

struct IceChartPolygon {
  int id = 0;
  double total_sic = 0.0;
  std::vector<SodPartial> partials;
};

// One acquisition: reference-grid rasters plus per-channel native-resolution
// payloads. Loaded scenes are immutable by convention; nothing here mutates.
struct Scene {
  std::string scene_id;
  std::string location_id;
  std::string acquisition_date;
  int height = 0;
  int width = 0;
  std::vector<ChannelSpec> channel_specs;
  std::vector<Raster<float>> channel_data;  // parallel to channel_specs
  Raster<int32_t> polygon_raster;
  std::vector<IceChartPolygon> polygons;
  std::optional<Raster<uint8_t>> land_mask;

  Date date() const { return parse_date(acquisition_date); }
  int month() const { return date().month; }

  bool has_channel(std::string_view name) const;
  int channel_index(std::string_view name) const;  // -1 when absent
  const ChannelSpec& channel_spec(std::string_view name) const;
  const Raster<float>& channel(std::string_view name) const;  // UnknownChannel
};

// channel_raster contract: native resolution, alignment is preprocess's job.
const Raster<float>& channel_raster(const Scene& scene, std::string_view name);

// Land at the reference grid: explicit mask wins; else distance_map <= land_zone_max
// (nearest-index mapped when the channel is not at reference resolution); else no land.
Raster<uint8_t> land_mask_at_ref(const Scene& scene, double land_zone_max = 0.0);

void validate_scene(const Scene& scene);
Scene load_scene(const std::string& path);
void write_scene(const Scene& scene, const std::string& path);

struct DatasetManifest {
  std::string split;  // train | validation | test
  std::vector<std::string> scenes;
};

DatasetManifest load_dataset_manifest(const std::string& path);
void save_dataset_manifest(const DatasetManifest& m, const std::string& path);
// Loads every scene; enforces unique scene_ids.
std::vector<Scene> load_scenes(const DatasetManifest& m, int workers = 1);

inline constexpr const char* kDistanceMapChannel = "distance_map";

}  // namespace icebench
