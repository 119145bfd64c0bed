#include "icebench/partition.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "icebench/jsonio.hpp"
#include "icebench/kernels.hpp"
#include "icebench/parallel.hpp"
#include "icebench/rng.hpp"

namespace icebench {

const char* season_name(Season s) {
  switch (s) {
    case Season::spring: return "spring";
    case Season::summer: return "summer";
    case Season::fall: return "fall";
    case Season::winter: return "winter";
  }
  return "?";
}

Season season_from_name(const std::string& name) {
  for (Season s : {Season::spring, Season::summer, Season::fall, Season::winter})
    if (name == season_name(s)) return s;
  fail(Err::InvalidArgument, "unknown season '" + name + "'");
}

SeasonRule SeasonRule::meteorological() {
  SeasonRule rule{};
  for (int m = 1; m <= 12; ++m) {
    Season s = Season::winter;
    if (m >= 3 && m <= 5) s = Season::spring;
    else if (m >= 6 && m <= 8) s = Season::summer;
    else if (m >= 9 && m <= 11) s = Season::fall;
    rule.by_month[m - 1] = s;
  }
  return rule;
}

Season conventional_season(int month, const SeasonRule& rule) {
  if (month < 1 || month > 12) fail(Err::InvalidArgument, "month out of range");
  return rule.by_month[month - 1];
}

Season conventional_season(const Scene& scene, const SeasonRule& rule) {
  return conventional_season(scene.month(), rule);
}

const char* cryo_season_name(CryoSeason s) {
  switch (s) {
    case CryoSeason::melt: return "melt";
    case CryoSeason::freeze: return "freeze";
    case CryoSeason::undefined: return "undefined";
  }
  return "?";
}

CryoSeason cryo_season_from_name(const std::string& name) {
  for (CryoSeason s : {CryoSeason::melt, CryoSeason::freeze, CryoSeason::undefined})
    if (name == cryo_season_name(s)) return s;
  fail(Err::InvalidArgument, "unknown cryo season '" + name + "'");
}

MeltClimatology load_climatology(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_object()) fail(Err::CorruptPayload, "climatology must be an object: " + path);
  MeltClimatology clim;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const json& e = it.value();
    if (!e.contains("melt_doy") || !e.contains("freeze_doy"))
      fail(Err::CorruptPayload, "climatology entry missing melt_doy/freeze_doy: " + it.key());
    ClimatologyEntry entry;
    entry.melt_doy = e.at("melt_doy").get<int>();
    entry.freeze_doy = e.at("freeze_doy").get<int>();
    if (entry.melt_doy < 1 || entry.melt_doy > 366 || entry.freeze_doy < 1 ||
        entry.freeze_doy > 366)
      fail(Err::DomainError, "climatology day-of-year out of range for " + it.key());
    clim.by_location[it.key()] = entry;
  }
  return clim;
}

void save_climatology(const MeltClimatology& clim, const std::string& path) {
  json j = json::object();
  for (const auto& [loc, e] : clim.by_location)
    j[loc] = {{"melt_doy", e.melt_doy}, {"freeze_doy", e.freeze_doy}};
  save_json_file(j, path);
}

CryoSeason cryo_season_of(const std::string& location_id, int doy, const MeltClimatology& clim) {
  auto it = clim.by_location.find(location_id);
  if (it == clim.by_location.end()) return CryoSeason::undefined;
  const ClimatologyEntry& e = it->second;
  if (doy >= e.melt_doy && doy < e.freeze_doy) return CryoSeason::melt;
  return CryoSeason::freeze;
}

CryoSeason cryo_season(const Scene& scene, const MeltClimatology& clim) {
  Date d = scene.date();
  return cryo_season_of(scene.location_id, day_of_year(d), clim);
}

const char* region_name(Region r) {
  switch (r) {
    case Region::East: return "East";
    case Region::West: return "West";
    case Region::CanadianArctic: return "CanadianArctic";
    case Region::North: return "North";
  }
  return "?";
}

Region region_from_name(const std::string& name) {
  for (Region r : {Region::East, Region::West, Region::CanadianArctic, Region::North})
    if (name == region_name(r)) return r;
  fail(Err::InvalidArgument, "unknown region '" + name + "'");
}

RegionMap load_region_map(const std::string& path) {
  json j = load_json_file(path);
  if (!j.is_object()) fail(Err::CorruptPayload, "region map must be an object: " + path);
  RegionMap map;
  for (auto it = j.begin(); it != j.end(); ++it)
    map.by_location[it.key()] = region_from_name(it.value().get<std::string>());
  return map;
}

void save_region_map(const RegionMap& map, const std::string& path) {
  json j = json::object();
  for (const auto& [loc, r] : map.by_location) j[loc] = region_name(r);
  save_json_file(j, path);
}

Region region_of(const std::string& location_id, const RegionMap& map) {
  auto it = map.by_location.find(location_id);
  if (it == map.by_location.end())
    fail(Err::UnknownLocation, "location '" + location_id + "' has no region assignment");
  return it->second;
}

Region region_of(const Scene& scene, const RegionMap& map) {
  return region_of(scene.location_id, map);
}

SceneMeta load_scene_meta(const std::string& container_path) {
  std::string manifest_path = container_path;
  if (!manifest_path.ends_with(".json")) manifest_path += "/manifest.json";
  json j = load_json_file(manifest_path);
  for (const char* field : {"scene_id", "location_id", "acquisition_date"})
    if (!j.contains(field))
      fail(Err::CorruptPayload, std::string("scene manifest missing ") + field);
  SceneMeta meta;
  meta.path = container_path;
  meta.scene_id = j.at("scene_id").get<std::string>();
  meta.location_id = j.at("location_id").get<std::string>();
  meta.date = parse_date(j.at("acquisition_date").get<std::string>());
  return meta;
}

std::vector<SceneMeta> load_scene_metas(const DatasetManifest& manifest) {
  std::vector<SceneMeta> metas;
  metas.reserve(manifest.scenes.size());
  for (const std::string& path : manifest.scenes) metas.push_back(load_scene_meta(path));
  return metas;
}

bool filters_match(const SceneMeta& meta, const SplitFilters& filters,
                   const MeltClimatology* clim, const RegionMap* regions) {
  if (filters.season &&
      conventional_season(meta.date.month) != *filters.season)
    return false;
  if (filters.cryo) {
    if (!clim) fail(Err::InvalidArgument, "cryo filter requires a climatology");
    if (cryo_season_of(meta.location_id, day_of_year(meta.date), *clim) != *filters.cryo)
      return false;
  }
  if (filters.region) {
    if (!regions) fail(Err::InvalidArgument, "region filter requires a region map");
    if (region_of(meta.location_id, *regions) != *filters.region) return false;
  }
  return true;
}

SplitResult make_splits(const DatasetManifest& manifest, const SplitFilters& filters,
                        const HoldoutSpec& holdout, uint64_t seed, const MeltClimatology* clim,
                        const RegionMap* regions) {
  if (holdout.fixed_count && holdout.fraction)
    fail(Err::InvalidArgument, "holdout takes either fixed_count or fraction, not both");
  if (!holdout.fixed_count && !holdout.fraction)
    fail(Err::InvalidArgument, "holdout needs fixed_count or fraction");
  if (holdout.fraction && !(*holdout.fraction > 0.0 && *holdout.fraction < 1.0))
    fail(Err::InvalidArgument, "holdout fraction must lie in (0, 1)");
  if (holdout.fixed_count && *holdout.fixed_count < 1)
    fail(Err::InvalidArgument, "holdout fixed_count must be at least 1");

  std::vector<SceneMeta> metas = load_scene_metas(manifest);
  std::vector<size_t> kept;
  for (size_t i = 0; i < metas.size(); ++i)
    if (filters_match(metas[i], filters, clim, regions)) kept.push_back(i);

  const size_t n = kept.size();
  if (n < 2)
    fail(Err::InsufficientScenes,
         "filters leave " + std::to_string(n) + " scene(s); need at least 2 to split");

  size_t n_val;
  if (holdout.fixed_count) {
    n_val = static_cast<size_t>(*holdout.fixed_count);
    if (n_val >= n)
      fail(Err::InsufficientScenes, "holdout of " + std::to_string(n_val) +
                                        " scenes leaves no training data out of " +
                                        std::to_string(n));
  } else {
    n_val = static_cast<size_t>(std::llround(*holdout.fraction * static_cast<double>(n)));
    if (n_val < 1) n_val = 1;
    if (n_val > n - 1) n_val = n - 1;
  }

  std::vector<size_t> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = i;
  keyed_shuffle(order, derive_key({seed, fnv1a("holdout")}));

  std::vector<char> is_val(n, 0);
  for (size_t i = 0; i < n_val; ++i) is_val[order[i]] = 1;

  SplitResult result;
  result.train.split = "train";
  result.validation.split = "validation";
  for (size_t i = 0; i < n; ++i) {
    const std::string& path = manifest.scenes[kept[i]];
    (is_val[i] ? result.validation : result.train).scenes.push_back(path);
  }
  return result;
}

const char* partition_kind_name(PartitionKind k) {
  switch (k) {
    case PartitionKind::none: return "none";
    case PartitionKind::season: return "season";
    case PartitionKind::cryo: return "cryo";
    case PartitionKind::region: return "region";
  }
  return "?";
}

PartitionKind partition_kind_from_name(const std::string& name) {
  for (PartitionKind k :
       {PartitionKind::none, PartitionKind::season, PartitionKind::cryo, PartitionKind::region})
    if (name == partition_kind_name(k)) return k;
  fail(Err::InvalidArgument, "unknown partition kind '" + name + "'");
}

namespace {

std::string partition_key(const Scene& scene, PartitionKind kind, const MeltClimatology* clim,
                          const RegionMap* regions) {
  switch (kind) {
    case PartitionKind::none:
      return "all";
    case PartitionKind::season:
      return season_name(conventional_season(scene));
    case PartitionKind::cryo:
      if (!clim) fail(Err::InvalidArgument, "cryo partition requires a climatology");
      return cryo_season_name(cryo_season(scene, *clim));
    case PartitionKind::region:
      if (!regions) fail(Err::InvalidArgument, "region partition requires a region map");
      return region_name(region_of(scene, *regions));
  }
  fail(Err::InvalidArgument, "bad partition kind");
}

}  // namespace

ClassDistribution class_distribution(const DatasetManifest& manifest,
                                     const LabelingConfig& label_cfg, Granularity granularity,
                                     PartitionKind kind, const MeltClimatology* clim,
                                     const RegionMap* regions, const SamplingConfig* patch_cfg,
                                     int workers) {
  validate_labeling_config(label_cfg);
  if (granularity == Granularity::patch && !patch_cfg)
    fail(Err::InvalidArgument, "patch granularity requires a sampling config");

  struct PerScene {
    std::string key;
    std::array<long long, kNumClasses> counts{};
  };
  std::vector<PerScene> partials(manifest.scenes.size());

  parallel_for(manifest.scenes.size(), workers, [&](size_t i) {
    Scene scene = load_scene(manifest.scenes[i]);
    PerScene& out = partials[i];
    out.key = partition_key(scene, kind, clim, regions);
    LabelRaster labels = rasterize_labels(scene, label_cfg);
    if (granularity == Granularity::pixel) {
      uint64_t hist[7] = {};
      kernels::label_histogram_u8(labels.data(), labels.width(), labels.height(), labels.width(),
                                  hist);
      for (int c = 0; c < kNumClasses; ++c) out.counts[c] += static_cast<long long>(hist[c]);
    } else {
      std::vector<PatchRecord> records = extract_patches(scene, labels, *patch_cfg,
                                                         label_cfg.land_zone_max);
      for (const PatchRecord& rec : records)
        if (rec.label < kNumClasses) ++out.counts[rec.label];
    }
  });

  std::map<std::string, std::array<long long, kNumClasses>> merged;
  for (const PerScene& p : partials) {
    auto& acc = merged[p.key];
    for (int c = 0; c < kNumClasses; ++c) acc[c] += p.counts[c];
  }

  ClassDistribution dist;
  dist.granularity = granularity;
  dist.kind = kind;
  for (const auto& [key, counts] : merged) {
    long long total = 0;
    for (long long c : counts) total += c;
    if (total == 0) continue;  // partition with no valid samples carries no fractions
    DistributionRow row;
    row.key = key;
    row.total = total;
    for (int c = 0; c < kNumClasses; ++c)
      row.fractions[c] = static_cast<double>(counts[c]) / static_cast<double>(total);
    dist.rows.push_back(std::move(row));
  }
  return dist;
}

}  // namespace icebench
