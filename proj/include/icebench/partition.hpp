#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "icebench/chart_labels.hpp"
#include "icebench/sampling.hpp"
#include "icebench/scene.hpp"

namespace icebench {

enum class Season { spring, summer, fall, winter };
const char* season_name(Season s);
Season season_from_name(const std::string& name);

// Month -> season table; meteorological boundaries by default.
struct SeasonRule {
  std::array<Season, 12> by_month;  // index 0 = January
  static SeasonRule meteorological();
};

Season conventional_season(int month, const SeasonRule& rule = SeasonRule::meteorological());
Season conventional_season(const Scene& scene,
                           const SeasonRule& rule = SeasonRule::meteorological());

enum class CryoSeason { melt, freeze, undefined };
const char* cryo_season_name(CryoSeason s);
CryoSeason cryo_season_from_name(const std::string& name);

struct ClimatologyEntry {
  int melt_doy = 0;
  int freeze_doy = 0;
};

struct MeltClimatology {
  std::map<std::string, ClimatologyEntry> by_location;
};

MeltClimatology load_climatology(const std::string& path);
void save_climatology(const MeltClimatology& clim, const std::string& path);

// doy in [melt, freeze) is melt; everything else freeze; unknown location undefined.
CryoSeason cryo_season(const Scene& scene, const MeltClimatology& clim);
CryoSeason cryo_season_of(const std::string& location_id, int doy, const MeltClimatology& clim);

enum class Region { East, West, CanadianArctic, North };
const char* region_name(Region r);
Region region_from_name(const std::string& name);

struct RegionMap {
  std::map<std::string, Region> by_location;
};

RegionMap load_region_map(const std::string& path);
void save_region_map(const RegionMap& map, const std::string& path);

Region region_of(const Scene& scene, const RegionMap& map);  // UnknownLocation
Region region_of(const std::string& location_id, const RegionMap& map);

// Cheap header-only view of a container (no payload reads).
struct SceneMeta {
  std::string path;
  std::string scene_id;
  std::string location_id;
  Date date;
};

SceneMeta load_scene_meta(const std::string& container_path);
std::vector<SceneMeta> load_scene_metas(const DatasetManifest& manifest);

struct SplitFilters {
  std::optional<Season> season;
  std::optional<CryoSeason> cryo;
  std::optional<Region> region;
};

struct HoldoutSpec {
  std::optional<int> fixed_count;
  std::optional<double> fraction;
};

struct SplitResult {
  DatasetManifest train;       // split == "train"
  DatasetManifest validation;  // split == "validation"
};

bool filters_match(const SceneMeta& meta, const SplitFilters& filters,
                   const MeltClimatology* clim, const RegionMap* regions);

// Filter then draw the holdout deterministically; both outputs keep manifest
// order. clim/regions are required only when the matching filter is set.
SplitResult make_splits(const DatasetManifest& manifest, const SplitFilters& filters,
                        const HoldoutSpec& holdout, uint64_t seed,
                        const MeltClimatology* clim = nullptr,
                        const RegionMap* regions = nullptr);

enum class Granularity { pixel, patch };
enum class PartitionKind { none, season, cryo, region };
const char* partition_kind_name(PartitionKind k);
PartitionKind partition_kind_from_name(const std::string& name);

struct DistributionRow {
  std::string key;
  std::array<double, kNumClasses> fractions{};
  long long total = 0;  // valid pixels or accepted patches
};

struct ClassDistribution {
  Granularity granularity = Granularity::pixel;
  PartitionKind kind = PartitionKind::none;
  std::vector<DistributionRow> rows;  // sorted by key; empty partitions omitted
};

// Fractions over non-255 pixels (or accepted patch records) per partition key.
ClassDistribution class_distribution(const DatasetManifest& manifest,
                                     const LabelingConfig& label_cfg, Granularity granularity,
                                     PartitionKind kind = PartitionKind::none,
                                     const MeltClimatology* clim = nullptr,
                                     const RegionMap* regions = nullptr,
                                     const SamplingConfig* patch_cfg = nullptr, int workers = 1);

}  // namespace icebench
