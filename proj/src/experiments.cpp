#include "icebench/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>

#include "icebench/kernels.hpp"
#include "icebench/parallel.hpp"
#include "icebench/rng.hpp"

namespace icebench {

// ---------------------------------------------------------------------------
// config

void validate_pipeline_config(const PipelineConfig& cfg) {
  if (cfg.paradigm != "patch" && cfg.paradigm != "pixel")
    fail(Err::ConfigError, "paradigm must be 'patch' or 'pixel'");
  if (cfg.features.empty()) fail(Err::ConfigError, "features list is empty");
  std::set<std::string> seen;
  for (const std::string& f : cfg.features)
    if (!seen.insert(f).second) fail(Err::ConfigError, "feature '" + f + "' listed twice");
  validate_labeling_config(cfg.labeling);
  if (cfg.downscale_ratio < 1) fail(Err::ConfigError, "downscale_ratio must be >= 1");
  validate_sampling_config(cfg.sampling);
  if (cfg.sampling.mode != SamplingMode::patch)
    fail(Err::ConfigError, "sampling block must use patch mode");
  validate_sampling_config(cfg.crop);
  if (cfg.crop.mode != SamplingMode::crop) fail(Err::ConfigError, "crop block must use crop mode");
  validate_augmentation_config(cfg.augmentation);
  validate_train_config(cfg.train);
  if (cfg.holdout.fixed_count && cfg.holdout.fraction)
    fail(Err::ConfigError, "holdout takes either fixed_count or fraction");
}

namespace {

SamplingConfig sampling_from_json(const json& j, SamplingConfig base, uint64_t seed) {
  SamplingConfig cfg = base;
  cfg.seed = seed;
  if (j.contains("patch_size")) cfg.patch_size = j.at("patch_size").get<int>();
  if (j.contains("stride")) cfg.stride = j.at("stride").get<int>();
  if (j.contains("purity")) cfg.purity = j.at("purity").get<double>();
  if (j.contains("border_distance")) cfg.border_distance = j.at("border_distance").get<int>();
  if (j.contains("border_metric"))
    cfg.border_metric = j.at("border_metric").get<std::string>() == "euclidean"
                            ? BorderMetric::euclidean
                            : BorderMetric::chebyshev;
  if (j.contains("allow_land")) cfg.allow_land = j.at("allow_land").get<bool>();
  if (j.contains("reject_nonfinite")) cfg.reject_nonfinite = j.at("reject_nonfinite").get<bool>();
  if (j.contains("epoch_steps")) cfg.epoch_steps = j.at("epoch_steps").get<int>();
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  return cfg;
}

json sampling_to_json(const SamplingConfig& cfg) {
  return json{{"patch_size", cfg.patch_size},
              {"stride", cfg.stride},
              {"purity", cfg.purity},
              {"border_distance", cfg.border_distance},
              {"border_metric",
               cfg.border_metric == BorderMetric::euclidean ? "euclidean" : "chebyshev"},
              {"allow_land", cfg.allow_land},
              {"reject_nonfinite", cfg.reject_nonfinite},
              {"epoch_steps", cfg.epoch_steps},
              {"seed", cfg.seed}};
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  PipelineConfig cfg;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("paradigm")) cfg.paradigm = j.at("paradigm").get<std::string>();
  if (j.contains("features")) cfg.features = j.at("features").get<std::vector<std::string>>();
  if (j.contains("labeling")) {
    const json& l = j.at("labeling");
    if (l.contains("dominance_threshold"))
      cfg.labeling.dominance_threshold = l.at("dominance_threshold").get<double>();
    if (l.contains("open_water_sic_max"))
      cfg.labeling.open_water_sic_max = l.at("open_water_sic_max").get<double>();
    if (l.contains("land_zone_max")) cfg.labeling.land_zone_max = l.at("land_zone_max").get<double>();
  }
  if (j.contains("alignment"))
    for (auto it = j.at("alignment").begin(); it != j.at("alignment").end(); ++it)
      cfg.alignment.per_channel[it.key()] = align_kernel_from_name(it.value().get<std::string>());
  if (j.contains("downscale_ratio")) cfg.downscale_ratio = j.at("downscale_ratio").get<int>();
  if (j.contains("land_policy"))
    cfg.land_policy = land_policy_from_name(j.at("land_policy").get<std::string>());

  SamplingConfig patch_base;
  patch_base.mode = SamplingMode::patch;
  cfg.sampling = sampling_from_json(j.contains("sampling") ? j.at("sampling") : json::object(),
                                    patch_base, cfg.seed);
  SamplingConfig crop_base;
  crop_base.mode = SamplingMode::crop;
  crop_base.patch_size = 256;
  cfg.crop =
      sampling_from_json(j.contains("crop") ? j.at("crop") : json::object(), crop_base, cfg.seed);

  if (j.contains("augmentation")) {
    const json& a = j.at("augmentation");
    if (a.contains("enabled")) cfg.augmentation.enabled = a.at("enabled").get<bool>();
    if (a.contains("rotation_max_deg"))
      cfg.augmentation.rotation_max_deg = a.at("rotation_max_deg").get<double>();
    if (a.contains("vertical_flip")) cfg.augmentation.vertical_flip = a.at("vertical_flip").get<bool>();
  }
  cfg.train.seed = cfg.seed;
  if (j.contains("train")) {
    const json& t = j.at("train");
    if (t.contains("learning_rate")) cfg.train.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("batch_size")) cfg.train.batch_size = t.at("batch_size").get<int>();
    if (t.contains("max_epochs")) cfg.train.max_epochs = t.at("max_epochs").get<int>();
    if (t.contains("patience")) cfg.train.patience = t.at("patience").get<int>();
    if (t.contains("improvement_tolerance"))
      cfg.train.improvement_tolerance = t.at("improvement_tolerance").get<double>();
    if (t.contains("epoch_steps")) cfg.train.epoch_steps = t.at("epoch_steps").get<int>();
    if (t.contains("seed")) cfg.train.seed = t.at("seed").get<uint64_t>();
  }
  cfg.train.epoch_steps = std::max(cfg.train.epoch_steps, 1);
  if (j.contains("holdout")) {
    const json& h = j.at("holdout");
    if (h.contains("fixed_count")) cfg.holdout.fixed_count = h.at("fixed_count").get<int>();
    if (h.contains("fraction")) cfg.holdout.fraction = h.at("fraction").get<double>();
  }
  if (j.contains("allow_constant"))
    cfg.allow_constant = j.at("allow_constant").get<std::vector<std::string>>();
  validate_pipeline_config(cfg);
  return cfg;
}

json pipeline_config_to_json(const PipelineConfig& cfg) {
  json alignment = json::object();
  for (const auto& [name, kernel] : cfg.alignment.per_channel)
    alignment[name] = align_kernel_name(kernel);
  json holdout = json::object();
  if (cfg.holdout.fixed_count) holdout["fixed_count"] = *cfg.holdout.fixed_count;
  if (cfg.holdout.fraction) holdout["fraction"] = *cfg.holdout.fraction;
  return json{{"paradigm", cfg.paradigm},
              {"features", cfg.features},
              {"labeling",
               {{"dominance_threshold", cfg.labeling.dominance_threshold},
                {"open_water_sic_max", cfg.labeling.open_water_sic_max},
                {"land_zone_max", cfg.labeling.land_zone_max}}},
              {"alignment", alignment},
              {"downscale_ratio", cfg.downscale_ratio},
              {"land_policy", land_policy_name(cfg.land_policy)},
              {"sampling", sampling_to_json(cfg.sampling)},
              {"crop", sampling_to_json(cfg.crop)},
              {"augmentation",
               {{"enabled", cfg.augmentation.enabled},
                {"rotation_max_deg", cfg.augmentation.rotation_max_deg},
                {"vertical_flip", cfg.augmentation.vertical_flip}}},
              {"train",
               {{"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"max_epochs", cfg.train.max_epochs},
                {"patience", cfg.train.patience},
                {"improvement_tolerance", cfg.train.improvement_tolerance},
                {"epoch_steps", cfg.train.epoch_steps},
                {"seed", cfg.train.seed}}},
              {"holdout", holdout},
              {"allow_constant", cfg.allow_constant},
              {"seed", cfg.seed}};
}

// ---------------------------------------------------------------------------
// preparation

PreparedScene prepare_scene(const Scene& raw, const PipelineConfig& cfg,
                            const NormalizationStats& stats) {
  Scene aligned = align_scene(raw, cfg.alignment);
  LabelRaster labels = rasterize_labels(aligned, cfg.labeling);
  if (cfg.downscale_ratio > 1) {
    aligned = downscale_scene(aligned, cfg.downscale_ratio, cfg.alignment);
    labels = downscale_labels(labels, cfg.downscale_ratio);
  }
  PreparedScene out;
  out.scene_id = raw.scene_id;
  out.location_id = raw.location_id;
  out.date = raw.date();
  out.labels = std::move(labels);
  out.features = apply_mask_and_normalize(aligned, stats, cfg.features, cfg.land_policy,
                                          cfg.labeling.land_zone_max, &out.labels);
  return out;
}

std::vector<PreparedScene> prepare_scenes(const std::vector<std::string>& paths,
                                          const PipelineConfig& cfg,
                                          const NormalizationStats& stats, int workers) {
  std::vector<PreparedScene> out(paths.size());
  parallel_for(paths.size(), workers, [&](size_t i) {
    Scene raw = load_scene(paths[i]);
    out[i] = prepare_scene(raw, cfg, stats);
  });
  return out;
}

NormalizationStats compute_pipeline_stats(const std::vector<std::string>& train_paths,
                                          const PipelineConfig& cfg, int workers) {
  if (train_paths.empty()) fail(Err::InsufficientScenes, "no scenes to derive statistics from");
  std::vector<Scene> scenes(train_paths.size());
  parallel_for(train_paths.size(), workers, [&](size_t i) {
    Scene aligned = align_scene(load_scene(train_paths[i]), cfg.alignment);
    if (cfg.downscale_ratio > 1)
      aligned = downscale_scene(aligned, cfg.downscale_ratio, cfg.alignment);
    scenes[i] = std::move(aligned);
  });
  return compute_normalization(scenes, cfg.features, cfg.allow_constant);
}

std::vector<PatchRecord> extract_records(const std::vector<PreparedScene>& scenes,
                                         const SamplingConfig& cfg) {
  std::vector<PatchRecord> all;
  for (const PreparedScene& s : scenes) {
    SceneView view{s.scene_id, &s.features, &s.labels, nullptr};
    std::vector<PatchRecord> records = extract_patches(view, cfg);
    all.insert(all.end(), records.begin(), records.end());
  }
  return all;
}

PatchSample sample_of(const PreparedScene& scene, const PatchRecord& rec) {
  return PatchSample{patch_features(scene.features, rec.row, rec.col, rec.size), rec.label};
}

std::vector<PatchSample> samples_of(const std::vector<PreparedScene>& scenes,
                                    const std::vector<PatchRecord>& records) {
  std::map<std::string, const PreparedScene*> by_id;
  for (const PreparedScene& s : scenes) by_id[s.scene_id] = &s;
  std::vector<PatchSample> samples;
  samples.reserve(records.size());
  for (const PatchRecord& rec : records) {
    auto it = by_id.find(rec.scene_id);
    if (it == by_id.end())
      fail(Err::InvalidArgument, "record references unknown scene " + rec.scene_id);
    samples.push_back(sample_of(*it->second, rec));
  }
  return samples;
}

namespace {

// Re-materializes augmented window features per epoch; the record label stays.
class WindowSource final : public PatchSampleSource {
 public:
  WindowSource(const std::vector<PreparedScene>& scenes, const std::vector<PatchRecord>& records,
               const AugmentationConfig& aug, uint64_t seed)
      : records_(records), aug_(aug), seed_(seed) {
    for (const PreparedScene& s : scenes) by_id_[s.scene_id] = &s;
    for (const PatchRecord& rec : records_)
      if (!by_id_.count(rec.scene_id))
        fail(Err::InvalidArgument, "record references unknown scene " + rec.scene_id);
  }

  size_t size() const override { return records_.size(); }
  uint8_t label(size_t i) const override { return records_[i].label; }

  void materialize(size_t i, int epoch, PatchSample& out) const override {
    const PatchRecord& rec = records_[i];
    const PreparedScene& s = *by_id_.at(rec.scene_id);
    SceneView view{s.scene_id, &s.features, &s.labels, nullptr};
    Crop window = copy_window(view, rec.row, rec.col, rec.size);
    if (aug_.enabled)
      augment(window.features, nullptr, aug_,
              derive_key({seed_, fnv1a("patch_augment"), static_cast<uint64_t>(epoch),
                          static_cast<uint64_t>(i)}));
    out.features = patch_features(window.features, 0, 0, rec.size);
    out.label = rec.label;
  }

 private:
  std::vector<PatchRecord> records_;
  std::map<std::string, const PreparedScene*> by_id_;
  AugmentationConfig aug_;
  uint64_t seed_;
};

void divide_busy(std::vector<ResourceSample>& samples, int units) {
  if (units <= 1) return;
  for (ResourceSample& s : samples) s.cpu_busy /= static_cast<double>(units);
}

HoldoutSpec effective_holdout(const PipelineConfig& cfg) {
  if (cfg.holdout.fixed_count || cfg.holdout.fraction) return cfg.holdout;
  HoldoutSpec h;
  h.fraction = 0.1;
  return h;
}

}  // namespace

TrainedRun train_pipeline(const DatasetManifest& train_manifest, const PipelineConfig& cfg,
                          int workers) {
  validate_pipeline_config(cfg);
  if (train_manifest.scenes.size() < 2)
    fail(Err::InsufficientScenes, "training manifest holds " +
                                      std::to_string(train_manifest.scenes.size()) +
                                      " scene(s); need at least 2");
  const int units = std::max(1, workers);
  SplitResult split = make_splits(train_manifest, SplitFilters{}, effective_holdout(cfg), cfg.seed);

  ResourceMonitor monitor;
  const auto t0 = std::chrono::steady_clock::now();

  TrainedRun run;
  run.stats = compute_pipeline_stats(split.train.scenes, cfg, workers);
  std::vector<PreparedScene> train_scenes = prepare_scenes(split.train.scenes, cfg, run.stats, workers);
  std::vector<PreparedScene> val_scenes =
      prepare_scenes(split.validation.scenes, cfg, run.stats, workers);

  if (cfg.paradigm == "patch") {
    std::vector<PatchRecord> train_records = extract_records(train_scenes, cfg.sampling);
    std::vector<PatchRecord> val_records = extract_records(val_scenes, cfg.sampling);
    if (train_records.empty())
      fail(Err::EmptyOutput, "patch extraction found nothing on the training split");
    if (val_records.empty())
      fail(Err::EmptyOutput, "patch extraction found nothing on the validation split");
    run.n_train_samples = static_cast<long long>(train_records.size());
    run.n_val_samples = static_cast<long long>(val_records.size());
    std::vector<PatchSample> val_samples = samples_of(val_scenes, val_records);
    if (cfg.augmentation.enabled) {
      WindowSource source(train_scenes, train_records, cfg.augmentation, cfg.seed);
      run.fit = fit_patch(source, val_samples, cfg.train);
    } else {
      run.fit = fit_patch(samples_of(train_scenes, train_records), val_samples, cfg.train);
    }
  } else {
    run.n_train_samples = static_cast<long long>(train_scenes.size());
    run.n_val_samples = static_cast<long long>(val_scenes.size());
    run.fit = fit_pixel(train_scenes, val_scenes, cfg.crop, cfg.augmentation, cfg.train);
  }

  std::vector<ResourceSample> samples = monitor.stop();
  divide_busy(samples, units);
  run.efficiency.train = summarize_phase(samples, units);
  run.efficiency.computing_units = units;
  run.efficiency.epochs = run.fit.epochs_run;
  run.efficiency.train_wall_hours =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 3600.0;
  return run;
}

MetricsReport evaluate_model(const ModelState& model, const std::vector<PreparedScene>& test,
                             const PipelineConfig& cfg, ConfusionMatrix* confusion) {
  ConfusionMatrix cm;
  if (model.kind == ModelKind::patch) {
    for (const PreparedScene& s : test) {
      SceneView view{s.scene_id, &s.features, &s.labels, nullptr};
      for (const PatchRecord& rec : extract_patches(view, cfg.sampling)) {
        const uint8_t pred = predict_patch_window(model, s.features, rec.row, rec.col, rec.size);
        cm.add(rec.label, pred);
      }
    }
  } else {
    for (const PreparedScene& s : test) {
      LabelRaster pred = predict_pixels(model, s.features);
      cm.add_rasters(s.labels, pred);
    }
  }
  if (confusion) *confusion = cm;
  return compute_metrics(cm);
}

LabelRaster tile_predict(const ModelState& model, const FeatureStack& stack, int tile) {
  if (model.kind != ModelKind::patch)
    fail(Err::InvalidArgument, "tiling applies the patch model");
  if (tile < 1) fail(Err::InvalidArgument, "tile size must be positive");
  if (stack.height < tile || stack.width < tile)
    fail(Err::SceneTooSmall, "stack smaller than one tile");

  auto origins = [tile](int extent) {
    std::vector<int> at;
    for (int o = 0; o + tile <= extent; o += tile) at.push_back(o);
    if (at.back() + tile < extent) at.push_back(extent - tile);  // clamped final window
    return at;
  };

  LabelRaster pred(stack.height, stack.width, kIgnoreLabel);
  for (int r0 : origins(stack.height)) {
    for (int c0 : origins(stack.width)) {
      const uint8_t cls = predict_patch_window(model, stack, r0, c0, tile);
      for (int r = r0; r < r0 + tile; ++r)
        for (int c = c0; c < c0 + tile; ++c) pred.at(r, c) = cls;
    }
  }
  return pred;
}

// ---------------------------------------------------------------------------
// experiment runners

namespace {

bool is_skip_error(const Error& e) {
  switch (e.code()) {
    case Err::InsufficientScenes:
    case Err::EmptySupport:
    case Err::EmptyOutput:
    case Err::SceneTooSmall:
      return true;
    default:
      return false;
  }
}

CellResult skip_cell(std::string train_key, std::string test_key, std::string reason) {
  CellResult cell;
  cell.train_key = std::move(train_key);
  cell.test_key = std::move(test_key);
  cell.skipped = true;
  cell.note = std::move(reason);
  return cell;
}

CellResult error_cell(std::string train_key, std::string test_key, std::string what) {
  CellResult cell;
  cell.train_key = std::move(train_key);
  cell.test_key = std::move(test_key);
  cell.errored = true;
  cell.note = std::move(what);
  return cell;
}

json efficiency_extra(const TrainedRun& run) {
  return efficiency_to_json(run.efficiency);
}

DatasetManifest manifest_of(const std::vector<std::string>& paths, const std::string& split) {
  DatasetManifest m;
  m.split = split;
  m.scenes = paths;
  return m;
}

MetricsReport evaluate_with_monitor(const ModelState& model,
                                    const std::vector<PreparedScene>& test,
                                    const PipelineConfig& cfg, ConfusionMatrix* cm,
                                    EfficiencyReport* eff, int units) {
  ResourceMonitor monitor;
  const auto t0 = std::chrono::steady_clock::now();
  MetricsReport metrics = evaluate_model(model, test, cfg, cm);
  std::vector<ResourceSample> samples = monitor.stop();
  divide_busy(samples, units);
  if (eff) {
    eff->inference = summarize_phase(samples, units);
    eff->inference_wall_minutes =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  }
  return metrics;
}

}  // namespace

ExperimentReport run_transferability(const TransferConfig& cfg) {
  validate_pipeline_config(cfg.pipeline);
  if (cfg.min_scenes < 2) fail(Err::ConfigError, "min_scenes must be at least 2");

  MeltClimatology clim;
  RegionMap regions;
  if (cfg.axis == PartitionKind::cryo) {
    if (cfg.climatology_path.empty())
      fail(Err::ConfigError, "cryo axis needs a climatology file");
    clim = load_climatology(cfg.climatology_path);
  }
  if (cfg.axis == PartitionKind::region) {
    if (cfg.regions_path.empty()) fail(Err::ConfigError, "region axis needs a region map");
    regions = load_region_map(cfg.regions_path);
  }

  DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);

  auto key_of = [&](const SceneMeta& meta) -> std::optional<std::string> {
    switch (cfg.axis) {
      case PartitionKind::none:
        return "all";
      case PartitionKind::season:
        return season_name(conventional_season(meta.date.month));
      case PartitionKind::cryo:
        return cryo_season_name(cryo_season_of(meta.location_id, day_of_year(meta.date), clim));
      case PartitionKind::region: {
        auto it = regions.by_location.find(meta.location_id);
        if (it == regions.by_location.end()) return std::nullopt;
        return region_name(it->second);
      }
    }
    return std::nullopt;
  };

  std::map<std::string, std::vector<std::string>> train_pools, test_pools;
  std::vector<std::string> train_defined, test_defined;
  for (const SceneMeta& meta : load_scene_metas(train_manifest)) {
    if (auto key = key_of(meta)) {
      train_pools[*key].push_back(meta.path);
      train_defined.push_back(meta.path);
    }
  }
  for (const SceneMeta& meta : load_scene_metas(test_manifest)) {
    if (auto key = key_of(meta)) {
      test_pools[*key].push_back(meta.path);
      test_defined.push_back(meta.path);
    }
  }

  std::vector<std::pair<std::string, std::vector<std::string>>> rows(train_pools.begin(),
                                                                     train_pools.end());
  if (cfg.include_all && cfg.axis != PartitionKind::none)
    rows.emplace_back("All", train_defined);
  if (cfg.include_baseline) rows.emplace_back("Baseline", train_manifest.scenes);

  std::vector<std::pair<std::string, std::vector<std::string>>> cols(test_pools.begin(),
                                                                     test_pools.end());
  if (cfg.axis != PartitionKind::none) cols.emplace_back("All", test_defined);

  ExperimentReport report;
  report.kind = "transfer";
  report.name = "transfer_" + std::string(partition_kind_name(cfg.axis));
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);
  report.provenance["axis"] = partition_kind_name(cfg.axis);

  for (const auto& [row_key, row_paths] : rows) {
    if (static_cast<int>(row_paths.size()) < cfg.min_scenes) {
      for (const auto& [col_key, col_paths] : cols) {
        (void)col_paths;
        report.cells.push_back(skip_cell(row_key, col_key,
                                         "train pool holds " + std::to_string(row_paths.size()) +
                                             " scene(s); need " + std::to_string(cfg.min_scenes)));
      }
      continue;
    }
    TrainedRun run;
    try {
      run = train_pipeline(manifest_of(row_paths, "train"), cfg.pipeline, cfg.workers);
    } catch (const Error& e) {
      for (const auto& [col_key, col_paths] : cols) {
        (void)col_paths;
        report.cells.push_back(is_skip_error(e) ? skip_cell(row_key, col_key, e.what())
                                                : error_cell(row_key, col_key, e.what()));
      }
      continue;
    }
    for (const auto& [col_key, col_paths] : cols) {
      if (col_paths.empty()) {
        report.cells.push_back(skip_cell(row_key, col_key, "test pool is empty"));
        continue;
      }
      try {
        std::vector<PreparedScene> test =
            prepare_scenes(col_paths, cfg.pipeline, run.stats, cfg.workers);
        CellResult cell;
        cell.train_key = row_key;
        cell.test_key = col_key;
        ConfusionMatrix cm;
        EfficiencyReport eff = run.efficiency;
        cell.metrics = evaluate_with_monitor(run.fit.state, test, cfg.pipeline, &cm, &eff,
                                             std::max(1, cfg.workers));
        cell.has_metrics = true;
        cell.extra["confusion"] = confusion_to_json(cm);
        cell.extra["efficiency"] = efficiency_to_json(eff);
        cell.extra["n_train_samples"] = run.n_train_samples;
        cell.extra["best_epoch"] = run.fit.best_epoch;
        report.cells.push_back(std::move(cell));
      } catch (const Error& e) {
        report.cells.push_back(is_skip_error(e) ? skip_cell(row_key, col_key, e.what())
                                                : error_cell(row_key, col_key, e.what()));
      }
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

void apply_sweep_value(PipelineConfig& cfg, const std::string& axis, long long value) {
  if (axis == "downscale") {
    if (value < 1) fail(Err::ConfigError, "downscale value must be >= 1");
    cfg.downscale_ratio = static_cast<int>(value);
  } else if (axis == "patch_size") {
    if (value < 1) fail(Err::ConfigError, "patch_size value must be >= 1");
    cfg.sampling.patch_size = static_cast<int>(value);
    cfg.crop.patch_size = static_cast<int>(value);
  } else {
    fail(Err::ConfigError, "unknown sweep axis '" + axis + "'");
  }
}

ExperimentReport run_data_size_sweep(const SweepConfig& cfg) {
  ExperimentReport report;
  report.kind = "sweep";
  report.name = "sweep_data_size";
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);
  report.provenance["axis"] = "data_size";

  DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);
  SplitResult split = make_splits(train_manifest, SplitFilters{}, effective_holdout(cfg.pipeline),
                                  cfg.pipeline.seed);
  NormalizationStats stats = compute_pipeline_stats(split.train.scenes, cfg.pipeline, cfg.workers);
  std::vector<PreparedScene> train_scenes =
      prepare_scenes(split.train.scenes, cfg.pipeline, stats, cfg.workers);
  std::vector<PreparedScene> val_scenes =
      prepare_scenes(split.validation.scenes, cfg.pipeline, stats, cfg.workers);
  std::vector<PreparedScene> test_scenes =
      prepare_scenes(test_manifest.scenes, cfg.pipeline, stats, cfg.workers);

  // One master draw; every requested size is a prefix, so subsets nest.
  std::vector<PatchRecord> master;
  if (cfg.pipeline.paradigm == "patch") {
    master = extract_records(train_scenes, cfg.pipeline.sampling);
  } else {
    for (const PreparedScene& s : train_scenes) {
      SceneView view{s.scene_id, &s.features, &s.labels, nullptr};
      std::vector<PatchRecord> recs = extract_windows(view, cfg.pipeline.sampling);
      master.insert(master.end(), recs.begin(), recs.end());
    }
  }
  if (master.empty()) fail(Err::EmptyOutput, "no training windows available for the sweep");
  keyed_shuffle(master, derive_key({cfg.pipeline.seed, fnv1a("data_size")}));

  std::vector<PatchSample> val_samples;
  if (cfg.pipeline.paradigm == "patch") {
    std::vector<PatchRecord> val_records = extract_records(val_scenes, cfg.pipeline.sampling);
    if (val_records.empty())
      fail(Err::EmptyOutput, "patch extraction found nothing on the validation split");
    val_samples = samples_of(val_scenes, val_records);
  }

  for (long long requested : cfg.values) {
    const std::string key = std::to_string(requested);
    if (requested < 1) {
      report.cells.push_back(error_cell(key, "test", "data size must be positive"));
      continue;
    }
    const size_t take = std::min<size_t>(static_cast<size_t>(requested), master.size());
    std::vector<PatchRecord> subset(master.begin(), master.begin() + take);
    try {
      ResourceMonitor monitor;
      const auto t0 = std::chrono::steady_clock::now();
      FitResult fit;
      if (cfg.pipeline.paradigm == "patch") {
        if (cfg.pipeline.augmentation.enabled) {
          WindowSource source(train_scenes, subset, cfg.pipeline.augmentation, cfg.pipeline.seed);
          fit = fit_patch(source, val_samples, cfg.pipeline.train);
        } else {
          fit = fit_patch(samples_of(train_scenes, subset), val_samples, cfg.pipeline.train);
        }
      } else {
        fit = fit_pixel_pool(train_scenes, subset, val_scenes, cfg.pipeline.augmentation,
                             cfg.pipeline.train);
      }
      std::vector<ResourceSample> samples = monitor.stop();
      const int units = std::max(1, cfg.workers);
      divide_busy(samples, units);

      CellResult cell;
      cell.train_key = key;
      cell.test_key = "test";
      cell.value = key;
      EfficiencyReport eff;
      eff.train = summarize_phase(samples, units);
      eff.computing_units = units;
      eff.epochs = fit.epochs_run;
      eff.train_wall_hours =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 3600.0;
      ConfusionMatrix cm;
      cell.metrics = evaluate_with_monitor(fit.state, test_scenes, cfg.pipeline, &cm, &eff, units);
      cell.has_metrics = true;
      cell.extra["confusion"] = confusion_to_json(cm);
      cell.extra["efficiency"] = efficiency_to_json(eff);
      cell.extra["requested"] = requested;
      cell.extra["actual"] = static_cast<long long>(take);
      cell.extra["best_epoch"] = fit.best_epoch;
      report.cells.push_back(std::move(cell));
    } catch (const Error& e) {
      report.cells.push_back(is_skip_error(e) ? skip_cell(key, "test", e.what())
                                              : error_cell(key, "test", e.what()));
      report.cells.back().value = key;
    }
  }
  return report;
}

}  // namespace

ExperimentReport run_sweep(const SweepConfig& cfg) {
  validate_pipeline_config(cfg.pipeline);
  if (cfg.values.empty()) fail(Err::ConfigError, "sweep values list is empty");
  if (cfg.axis == "data_size") return run_data_size_sweep(cfg);
  if (cfg.axis != "downscale" && cfg.axis != "patch_size")
    fail(Err::ConfigError, "unknown sweep axis '" + cfg.axis + "'");

  ExperimentReport report;
  report.kind = "sweep";
  report.name = "sweep_" + cfg.axis;
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);
  report.provenance["axis"] = cfg.axis;

  DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);

  for (long long value : cfg.values) {
    const std::string key = std::to_string(value);
    try {
      PipelineConfig mod = cfg.pipeline;
      apply_sweep_value(mod, cfg.axis, value);
      validate_pipeline_config(mod);
      TrainedRun run = train_pipeline(train_manifest, mod, cfg.workers);
      std::vector<PreparedScene> test =
          prepare_scenes(test_manifest.scenes, mod, run.stats, cfg.workers);
      CellResult cell;
      cell.train_key = key;
      cell.test_key = "test";
      cell.value = key;
      ConfusionMatrix cm;
      EfficiencyReport eff = run.efficiency;
      cell.metrics =
          evaluate_with_monitor(run.fit.state, test, mod, &cm, &eff, std::max(1, cfg.workers));
      cell.has_metrics = true;
      cell.extra["confusion"] = confusion_to_json(cm);
      cell.extra["efficiency"] = efficiency_to_json(eff);
      cell.extra["n_train_samples"] = run.n_train_samples;
      cell.extra["best_epoch"] = run.fit.best_epoch;
      report.cells.push_back(std::move(cell));
    } catch (const Error& e) {
      CellResult cell = is_skip_error(e) ? skip_cell(key, "test", e.what())
                                         : error_cell(key, "test", e.what());
      cell.value = key;
      report.cells.push_back(std::move(cell));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport run_preparation_ablation(const PrepAblationConfig& cfg) {
  validate_pipeline_config(cfg.pipeline);

  std::vector<PrepAblationRow> rows = cfg.rows;
  if (rows.empty()) {
    rows.push_back({"base", false, LandPolicy::exclude, 0});
    rows.push_back({"augment", true, LandPolicy::exclude, 0});
    rows.push_back({"include_land", false, LandPolicy::include, 0});
    rows.push_back({"border_20", false, LandPolicy::exclude, 20});
  }

  ExperimentReport report;
  report.kind = "prep_ablation";
  report.name = "prep_ablation";
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);

  DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);

  for (const PrepAblationRow& row : rows) {
    try {
      // Same seed for every row, so the scene split and draws stay aligned.
      PipelineConfig mod = cfg.pipeline;
      mod.augmentation.enabled = row.augmentation;
      mod.land_policy = row.land_policy;
      mod.sampling.border_distance = row.border_distance;
      validate_pipeline_config(mod);
      TrainedRun run = train_pipeline(train_manifest, mod, cfg.workers);
      std::vector<PreparedScene> test =
          prepare_scenes(test_manifest.scenes, mod, run.stats, cfg.workers);
      CellResult cell;
      cell.train_key = row.key;
      cell.test_key = "test";
      ConfusionMatrix cm;
      EfficiencyReport eff = run.efficiency;
      cell.metrics =
          evaluate_with_monitor(run.fit.state, test, mod, &cm, &eff, std::max(1, cfg.workers));
      cell.has_metrics = true;
      cell.extra["confusion"] = confusion_to_json(cm);
      cell.extra["efficiency"] = efficiency_to_json(eff);
      cell.extra["toggles"] = {{"augmentation", row.augmentation},
                               {"land_policy", land_policy_name(row.land_policy)},
                               {"border_distance", row.border_distance}};
      cell.extra["n_train_samples"] = run.n_train_samples;
      report.cells.push_back(std::move(cell));
    } catch (const Error& e) {
      report.cells.push_back(is_skip_error(e) ? skip_cell(row.key, "test", e.what())
                                              : error_cell(row.key, "test", e.what()));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

ExperimentReport run_fair_compare(const FairCompareConfig& cfg) {
  validate_pipeline_config(cfg.pipeline);
  if (cfg.patch_model_path.empty() != cfg.patch_stats_path.empty())
    fail(Err::ConfigError, "a pre-trained patch model needs its statistics file");
  if (cfg.pixel_model_path.empty() != cfg.pixel_stats_path.empty())
    fail(Err::ConfigError, "a pre-trained pixel model needs its statistics file");

  PipelineConfig patch_cfg = cfg.pipeline;
  patch_cfg.paradigm = "patch";
  PipelineConfig pixel_cfg = cfg.pipeline;
  pixel_cfg.paradigm = "pixel";

  ExperimentReport report;
  report.kind = "fair_compare";
  report.name = "fair_compare";
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);

  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);

  ModelState patch_model, pixel_model;
  NormalizationStats patch_stats, pixel_stats;
  json patch_eff, pixel_eff;
  if (!cfg.patch_model_path.empty()) {
    patch_model = load_model(cfg.patch_model_path);
    patch_stats = load_normalization_stats(cfg.patch_stats_path);
  } else {
    DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
    TrainedRun run = train_pipeline(train_manifest, patch_cfg, cfg.workers);
    patch_model = run.fit.state;
    patch_stats = run.stats;
    patch_eff = efficiency_extra(run);
  }
  if (patch_model.kind != ModelKind::patch)
    fail(Err::InvalidArgument, "patch slot holds a model of the wrong kind");
  if (!cfg.pixel_model_path.empty()) {
    pixel_model = load_model(cfg.pixel_model_path);
    pixel_stats = load_normalization_stats(cfg.pixel_stats_path);
  } else {
    DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
    TrainedRun run = train_pipeline(train_manifest, pixel_cfg, cfg.workers);
    pixel_model = run.fit.state;
    pixel_stats = run.stats;
    pixel_eff = efficiency_extra(run);
  }
  if (pixel_model.kind != ModelKind::pixel)
    fail(Err::InvalidArgument, "pixel slot holds a model of the wrong kind");

  std::vector<PreparedScene> patch_view =
      prepare_scenes(test_manifest.scenes, patch_cfg, patch_stats, cfg.workers);
  std::vector<PreparedScene> pixel_view =
      prepare_scenes(test_manifest.scenes, pixel_cfg, pixel_stats, cfg.workers);

  const int tile = cfg.pipeline.sampling.patch_size;
  ConfusionMatrix cm_patch, cm_pixel;
  for (size_t i = 0; i < patch_view.size(); ++i) {
    LabelRaster tiled = tile_predict(patch_model, patch_view[i].features, tile);
    cm_patch.add_rasters(patch_view[i].labels, tiled);
    LabelRaster dense = predict_pixels(pixel_model, pixel_view[i].features);
    cm_pixel.add_rasters(pixel_view[i].labels, dense);
  }

  MetricsReport patch_metrics = compute_metrics(cm_patch);
  MetricsReport pixel_metrics = compute_metrics(cm_pixel);

  CellResult patch_cell;
  patch_cell.train_key = "patch";
  patch_cell.test_key = "pixel_granularity";
  patch_cell.metrics = patch_metrics;
  patch_cell.has_metrics = true;
  patch_cell.extra["confusion"] = confusion_to_json(cm_patch);
  patch_cell.extra["tile"] = tile;
  if (!patch_eff.is_null()) patch_cell.extra["efficiency"] = patch_eff;

  CellResult pixel_cell;
  pixel_cell.train_key = "pixel";
  pixel_cell.test_key = "pixel_granularity";
  pixel_cell.metrics = pixel_metrics;
  pixel_cell.has_metrics = true;
  pixel_cell.extra["confusion"] = confusion_to_json(cm_pixel);
  if (!pixel_eff.is_null()) pixel_cell.extra["efficiency"] = pixel_eff;

  patch_cell.extra["f1_w_delta_vs_pixel"] = patch_metrics.f1_w - pixel_metrics.f1_w;
  pixel_cell.extra["f1_w_delta_vs_patch"] = pixel_metrics.f1_w - patch_metrics.f1_w;

  report.cells.push_back(std::move(patch_cell));
  report.cells.push_back(std::move(pixel_cell));
  return report;
}

// ---------------------------------------------------------------------------

namespace {

struct AblationScore {
  double f1_w = 0.0;
  std::array<double, kNumClasses> recall{};
};

AblationScore score_of(const MetricsReport& m) {
  AblationScore s;
  s.f1_w = m.f1_w;
  for (int c = 0; c < kNumClasses; ++c) s.recall[c] = m.per_class[c].recall;
  return s;
}

// Channel c replaced by a constant across every scene.
std::vector<PreparedScene> ablate_channel(const std::vector<PreparedScene>& scenes, int channel,
                                          float value) {
  std::vector<PreparedScene> out = scenes;
  for (PreparedScene& s : out) {
    Raster<float>& ch = s.features.channels[channel];
    std::fill(ch.storage().begin(), ch.storage().end(), value);
  }
  return out;
}

}  // namespace

ExperimentReport run_feature_ablation(const FeatureAblationConfig& cfg) {
  validate_pipeline_config(cfg.pipeline);
  if (cfg.baseline != "mean" && cfg.baseline != "zero")
    fail(Err::ConfigError, "baseline must be 'mean' or 'zero'");
  if (cfg.model_path.empty() != cfg.model_stats_path.empty())
    fail(Err::ConfigError, "a pre-trained model needs its statistics file");

  ExperimentReport report;
  report.kind = "feature_ablation";
  report.name = "feature_ablation";
  report.provenance = experiment_provenance(report.name, report.kind, cfg.pipeline,
                                            {cfg.train_manifest, cfg.test_manifest}, cfg.workers);
  report.provenance["baseline"] = cfg.baseline;

  ModelState model;
  NormalizationStats stats;
  json train_eff;
  if (!cfg.model_path.empty()) {
    model = load_model(cfg.model_path);
    stats = load_normalization_stats(cfg.model_stats_path);
  } else {
    DatasetManifest train_manifest = load_dataset_manifest(cfg.train_manifest);
    TrainedRun run = train_pipeline(train_manifest, cfg.pipeline, cfg.workers);
    model = run.fit.state;
    stats = run.stats;
    train_eff = efficiency_extra(run);
  }
  if ((model.kind == ModelKind::patch) != (cfg.pipeline.paradigm == "patch"))
    fail(Err::InvalidArgument, "model kind does not match the pipeline paradigm");

  DatasetManifest test_manifest = load_dataset_manifest(cfg.test_manifest);
  std::vector<PreparedScene> test =
      prepare_scenes(test_manifest.scenes, cfg.pipeline, stats, cfg.workers);
  if (test.empty()) fail(Err::InsufficientScenes, "test manifest is empty");

  ConfusionMatrix cm_full;
  MetricsReport full = evaluate_model(model, test, cfg.pipeline, &cm_full);
  AblationScore full_score = score_of(full);

  CellResult full_cell;
  full_cell.train_key = "full";
  full_cell.test_key = "test";
  full_cell.metrics = full;
  full_cell.has_metrics = true;
  full_cell.extra["confusion"] = confusion_to_json(cm_full);
  if (!train_eff.is_null()) full_cell.extra["efficiency"] = train_eff;
  report.cells.push_back(std::move(full_cell));

  const size_t n_channels = test.front().features.channels.size();
  for (size_t c = 0; c < n_channels; ++c) {
    const std::string name = test.front().features.names[c];
    try {
      float value = 0.0f;
      if (cfg.baseline == "mean") {
        // Finite mean of the channel over the whole evaluation set.
        double sum = 0.0;
        long long finite = 0;
        for (const PreparedScene& s : test) {
          const Raster<float>& ch = s.features.channels[c];
          kernels::Moments m = kernels::window_moments_f32(ch.data(), ch.width(), ch.height(), ch.width());
          sum += m.sum;
          finite += m.finite;
        }
        value = finite > 0 ? static_cast<float>(sum / static_cast<double>(finite)) : 0.0f;
      }
      std::vector<PreparedScene> ablated = ablate_channel(test, static_cast<int>(c), value);
      MetricsReport metrics = evaluate_model(model, ablated, cfg.pipeline, nullptr);
      AblationScore score = score_of(metrics);

      CellResult cell;
      cell.train_key = name;
      cell.test_key = "test";
      cell.metrics = metrics;
      cell.has_metrics = true;
      cell.extra["baseline_value"] = value;
      cell.extra["attribution_f1_w"] = full_score.f1_w - score.f1_w;
      json drops = json::array();
      for (int k = 0; k < kNumClasses; ++k) drops.push_back(full_score.recall[k] - score.recall[k]);
      cell.extra["attribution_recall"] = drops;
      report.cells.push_back(std::move(cell));
    } catch (const Error& e) {
      report.cells.push_back(is_skip_error(e) ? skip_cell(name, "test", e.what())
                                              : error_cell(name, "test", e.what()));
    }
  }
  return report;
}

}  // namespace icebench
