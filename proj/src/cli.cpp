#include "icebench/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "icebench/chart_labels.hpp"
#include "icebench/experiments.hpp"
#include "icebench/metrics.hpp"
#include "icebench/models.hpp"
#include "icebench/partition.hpp"
#include "icebench/preprocess.hpp"
#include "icebench/sampling.hpp"
#include "icebench/scene.hpp"
#include "icebench/synthgen.hpp"

namespace icebench {

namespace fs = std::filesystem;

namespace {

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3 };

struct Ctx {
  std::string config_path;
  std::optional<uint64_t> seed;
  int workers = 1;
  std::string out;
  std::string log_level = "info";
  bool dry_run = false;
  LogLevel level = LogLevel::info;

  json config = json::object();

  void log(LogLevel lv, const std::string& msg) const {
    if (lv < level) return;
    const char* tag[] = {"debug", "info", "warn", "error"};
    std::fprintf(stderr, "[%s] %s\n", tag[static_cast<int>(lv)], msg.c_str());
  }
  void info(const std::string& m) const { log(LogLevel::info, m); }
  void warn(const std::string& m) const { log(LogLevel::warn, m); }
  void error(const std::string& m) const { log(LogLevel::error, m); }
};

LogLevel level_from_name(const std::string& name) {
  if (name == "debug") return LogLevel::debug;
  if (name == "info") return LogLevel::info;
  if (name == "warn") return LogLevel::warn;
  if (name == "error") return LogLevel::error;
  fail(Err::ConfigError, "unknown log level '" + name + "'");
}

void add_common(CLI::App* sub, Ctx& ctx) {
  sub->add_option("--config", ctx.config_path, "JSON configuration file");
  sub->add_option("--seed", ctx.seed, "seed override");
  sub->add_option("--workers", ctx.workers, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", ctx.out, "output directory (default $ICEBENCH_OUT or ./icebench_out)");
  sub->add_option("--log-level", ctx.log_level, "debug|info|warn|error");
  sub->add_flag("--dry-run", ctx.dry_run, "validate configuration and write nothing");
}

// Late resolution so the env default reflects the actual environment.
void finish_ctx(Ctx& ctx) {
  ctx.level = level_from_name(ctx.log_level);
  if (ctx.out.empty()) {
    const char* env = std::getenv("ICEBENCH_OUT");
    ctx.out = env && *env ? env : "icebench_out";
  }
  if (!ctx.config_path.empty()) ctx.config = load_json_file(ctx.config_path);
  if (ctx.seed) ctx.config["seed"] = *ctx.seed;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) fail(Err::ConfigError, what + " is required");
  if (!fs::exists(path)) fail(Err::MissingFile, what + " not found: " + path);
}

fs::path out_file(const Ctx& ctx, const std::string& name) {
  fs::create_directories(ctx.out);
  return fs::path(ctx.out) / name;
}

// Configuration problems exit 2, runtime problems exit 1; a dry run stops
// after the parse phase.
int guarded(Ctx& ctx, const std::function<json()>& parse, const std::function<int()>& execute) {
  json plan;
  try {
    finish_ctx(ctx);
    plan = parse();
  } catch (const Error& e) {
    ctx.error(std::string(e.what()));
    return 2;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "[error] config: %s\n", e.what());
    return 2;
  }
  if (ctx.dry_run) {
    plan["dry_run"] = true;
    std::printf("%s\n", plan.dump(2).c_str());
    return 0;
  }
  try {
    return execute();
  } catch (const Error& e) {
    ctx.error(std::string(e.what()));
    return 1;
  } catch (const std::exception& e) {
    ctx.error(std::string(e.what()));
    return 1;
  }
}

uint64_t config_seed(const Ctx& ctx) { return ctx.config.value("seed", uint64_t{0}); }

LabelingConfig labeling_from_ctx(const Ctx& ctx) {
  LabelingConfig cfg;
  if (ctx.config.contains("labeling")) {
    const json& l = ctx.config.at("labeling");
    cfg.dominance_threshold = l.value("dominance_threshold", cfg.dominance_threshold);
    cfg.open_water_sic_max = l.value("open_water_sic_max", cfg.open_water_sic_max);
    cfg.land_zone_max = l.value("land_zone_max", cfg.land_zone_max);
  }
  validate_labeling_config(cfg);
  return cfg;
}

// ---------------------------------------------------------------------------
// subcommand handlers

int cmd_synth(Ctx& ctx) {
  SynthSpec spec;
  std::string paired_axis;
  return guarded(
      ctx,
      [&]() -> json {
        spec = ctx.config.empty() || (ctx.config.size() == 1 && ctx.config.contains("seed"))
                   ? synth_preset("voronoi")
                   : synth_spec_from_json(ctx.config);
        if (ctx.seed) spec.seed = *ctx.seed;
        paired_axis = ctx.config.value("paired_shift", std::string());
        validate_synth_spec(spec);
        return json{{"action", "synth"},
                    {"spec", synth_spec_to_json(spec)},
                    {"paired_shift", paired_axis},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        SynthOutput out = paired_axis.empty() ? generate(spec, ctx.out)
                                              : generate_paired_shift(spec, paired_axis, ctx.out);
        ctx.info("wrote " + std::to_string(out.scene_dirs.size()) + " scenes under " + ctx.out);
        std::printf("%s\n", json{{"train_manifest", out.train_manifest},
                                 {"test_manifest", out.test_manifest},
                                 {"climatology", out.climatology},
                                 {"regions", out.regions},
                                 {"n_scenes", out.scene_dirs.size()}}
                                .dump(2)
                                .c_str());
        return 0;
      });
}

int cmd_labels(Ctx& ctx, const std::string& manifest_path) {
  LabelingConfig label_cfg;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(manifest_path, "--manifest");
        label_cfg = labeling_from_ctx(ctx);
        return json{{"action", "labels"}, {"manifest", manifest_path}, {"out", ctx.out}};
      },
      [&]() -> int {
        DatasetManifest manifest = load_dataset_manifest(manifest_path);
        for (const std::string& path : manifest.scenes) {
          Scene scene = load_scene(path);
          LabelRaster labels = rasterize_labels(scene, label_cfg);
          const fs::path dir = out_file(ctx, "labels") / scene.scene_id;
          fs::create_directories(dir);
          save_label_raster(labels, scene.scene_id, label_cfg.dominance_threshold, dir.string());
          ctx.info("labeled " + scene.scene_id);
        }
        return 0;
      });
}

int cmd_prepare(Ctx& ctx, const std::string& manifest_path) {
  AlignmentPolicy policy;
  int ratio = 1;
  bool compute_stats = false;
  std::vector<std::string> features;
  std::vector<std::string> allow_constant;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(manifest_path, "--manifest");
        if (ctx.config.contains("alignment"))
          for (auto it = ctx.config.at("alignment").begin(); it != ctx.config.at("alignment").end();
               ++it)
            policy.per_channel[it.key()] = align_kernel_from_name(it.value().get<std::string>());
        ratio = ctx.config.value("downscale_ratio", 1);
        if (ratio < 1) fail(Err::ConfigError, "downscale_ratio must be >= 1");
        compute_stats = ctx.config.value("compute_stats", false);
        if (ctx.config.contains("features"))
          features = ctx.config.at("features").get<std::vector<std::string>>();
        if (ctx.config.contains("allow_constant"))
          allow_constant = ctx.config.at("allow_constant").get<std::vector<std::string>>();
        if (compute_stats && features.empty())
          fail(Err::ConfigError, "compute_stats needs a features list");
        return json{{"action", "prepare"},
                    {"manifest", manifest_path},
                    {"downscale_ratio", ratio},
                    {"alignment", policy.describe()},
                    {"compute_stats", compute_stats},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        DatasetManifest manifest = load_dataset_manifest(manifest_path);
        DatasetManifest prepared;
        prepared.split = manifest.split;
        std::vector<Scene> kept;
        for (const std::string& path : manifest.scenes) {
          Scene aligned = align_scene(load_scene(path), policy);
          if (ratio > 1) aligned = downscale_scene(aligned, ratio, policy);
          const fs::path dir = out_file(ctx, "scenes") / aligned.scene_id;
          write_scene(aligned, dir.string());
          prepared.scenes.push_back("scenes/" + aligned.scene_id);
          ctx.info("prepared " + aligned.scene_id);
          if (compute_stats) kept.push_back(std::move(aligned));
        }
        save_dataset_manifest(prepared, out_file(ctx, "prepared_manifest.json").string());
        if (compute_stats) {
          NormalizationStats stats = compute_normalization(kept, features, allow_constant);
          save_normalization_stats(stats, out_file(ctx, "stats.json").string());
        }
        return 0;
      });
}

int cmd_patches(Ctx& ctx, const std::string& manifest_path) {
  LabelingConfig label_cfg;
  SamplingConfig sampling;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(manifest_path, "--manifest");
        label_cfg = labeling_from_ctx(ctx);
        PipelineConfig probe = pipeline_config_from_json(ctx.config);  // reuses block parsing
        sampling = probe.sampling;
        return json{{"action", "patches"},
                    {"manifest", manifest_path},
                    {"patch_size", sampling.patch_size},
                    {"stride", sampling.stride},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        DatasetManifest manifest = load_dataset_manifest(manifest_path);
        DatasetSummary summary = build_patch_dataset(
            manifest, label_cfg, sampling, out_file(ctx, "patches.jsonl").string(), ctx.workers);
        json counts = json::array();
        for (long long c : summary.class_counts) counts.push_back(c);
        save_json_file(json{{"n_samples", summary.n_samples}, {"class_counts", counts}},
                       out_file(ctx, "patches_summary.json").string());
        ctx.info("extracted " + std::to_string(summary.n_samples) + " patches");
        return 0;
      });
}

int cmd_partition(Ctx& ctx, const std::string& manifest_path) {
  SplitFilters filters;
  HoldoutSpec holdout;
  MeltClimatology clim;
  RegionMap regions;
  bool have_clim = false, have_regions = false;
  bool want_distribution = false;
  Granularity granularity = Granularity::pixel;
  PartitionKind dist_kind = PartitionKind::none;
  LabelingConfig label_cfg;
  SamplingConfig patch_cfg;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(manifest_path, "--manifest");
        const json& c = ctx.config;
        if (c.contains("filters")) {
          const json& f = c.at("filters");
          if (f.contains("season"))
            filters.season = season_from_name(f.at("season").get<std::string>());
          if (f.contains("cryo"))
            filters.cryo = cryo_season_from_name(f.at("cryo").get<std::string>());
          if (f.contains("region"))
            filters.region = region_from_name(f.at("region").get<std::string>());
        }
        if (c.contains("holdout")) {
          const json& h = c.at("holdout");
          if (h.contains("fixed_count")) holdout.fixed_count = h.at("fixed_count").get<int>();
          if (h.contains("fraction")) holdout.fraction = h.at("fraction").get<double>();
        }
        if (!holdout.fixed_count && !holdout.fraction) holdout.fraction = 0.1;
        if (c.contains("climatology")) {
          const std::string path = c.at("climatology").get<std::string>();
          require_file(path, "climatology");
          clim = load_climatology(path);
          have_clim = true;
        }
        if (c.contains("regions")) {
          const std::string path = c.at("regions").get<std::string>();
          require_file(path, "regions");
          regions = load_region_map(path);
          have_regions = true;
        }
        if (filters.cryo && !have_clim) fail(Err::ConfigError, "cryo filter needs climatology");
        if (filters.region && !have_regions) fail(Err::ConfigError, "region filter needs regions");
        if (c.contains("distribution")) {
          want_distribution = true;
          const json& d = c.at("distribution");
          granularity = d.value("granularity", std::string("pixel")) == "patch"
                            ? Granularity::patch
                            : Granularity::pixel;
          dist_kind = partition_kind_from_name(d.value("kind", std::string("none")));
          label_cfg = labeling_from_ctx(ctx);
          if (granularity == Granularity::patch) {
            PipelineConfig probe = pipeline_config_from_json(ctx.config);
            patch_cfg = probe.sampling;
          }
          if (dist_kind == PartitionKind::cryo && !have_clim)
            fail(Err::ConfigError, "cryo distribution needs climatology");
          if (dist_kind == PartitionKind::region && !have_regions)
            fail(Err::ConfigError, "region distribution needs regions");
        }
        return json{{"action", "partition"},
                    {"manifest", manifest_path},
                    {"distribution", want_distribution},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        DatasetManifest manifest = load_dataset_manifest(manifest_path);
        SplitResult split =
            make_splits(manifest, filters, holdout, config_seed(ctx),
                        have_clim ? &clim : nullptr, have_regions ? &regions : nullptr);
        save_dataset_manifest(split.train, out_file(ctx, "train_manifest.json").string());
        save_dataset_manifest(split.validation,
                              out_file(ctx, "validation_manifest.json").string());
        ctx.info("split " + std::to_string(split.train.scenes.size()) + " train / " +
                 std::to_string(split.validation.scenes.size()) + " validation");
        if (want_distribution) {
          ClassDistribution dist = class_distribution(
              manifest, label_cfg, granularity, dist_kind, have_clim ? &clim : nullptr,
              have_regions ? &regions : nullptr,
              granularity == Granularity::patch ? &patch_cfg : nullptr, ctx.workers);
          json rows = json::object();
          for (const DistributionRow& row : dist.rows) {
            json fr = json::array();
            for (double f : row.fractions) fr.push_back(f);
            rows[row.key] = {{"fractions", fr}, {"total", row.total}};
          }
          save_json_file(json{{"granularity",
                               granularity == Granularity::patch ? "patch" : "pixel"},
                              {"kind", partition_kind_name(dist_kind)},
                              {"rows", rows}},
                         out_file(ctx, "class_distribution.json").string());
        }
        return 0;
      });
}

int cmd_train(Ctx& ctx, const std::string& train_manifest_path) {
  PipelineConfig pipeline;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(train_manifest_path, "--train-manifest");
        pipeline = pipeline_config_from_json(ctx.config);
        return json{{"action", "train"},
                    {"train_manifest", train_manifest_path},
                    {"paradigm", pipeline.paradigm},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        DatasetManifest manifest = load_dataset_manifest(train_manifest_path);
        PipelineConfig cfg = pipeline;
        cfg.train.log_path = out_file(ctx, "train_log.jsonl").string();
        TrainedRun run = train_pipeline(manifest, cfg, ctx.workers);
        save_model(run.fit.state, out_file(ctx, "model.bin").string());
        save_normalization_stats(run.stats, out_file(ctx, "stats.json").string());
        save_json_file(json{{"epochs", run.fit.epochs_run},
                            {"best_epoch", run.fit.best_epoch},
                            {"best_val_loss", run.fit.best_val_loss},
                            {"single_class", run.fit.single_class},
                            {"n_train_samples", run.n_train_samples},
                            {"n_val_samples", run.n_val_samples},
                            {"paradigm", cfg.paradigm},
                            {"config", pipeline_config_to_json(cfg)}},
                       out_file(ctx, "train_meta.json").string());
        save_json_file(efficiency_to_json(run.efficiency),
                       out_file(ctx, "efficiency_train.json").string());
        if (run.fit.single_class)
          ctx.warn("training labels held a single class; constant predictor saved");
        ctx.info("best epoch " + std::to_string(run.fit.best_epoch) + " of " +
                 std::to_string(run.fit.epochs_run));
        return 0;
      });
}

int cmd_evaluate(Ctx& ctx, const std::string& model_path, const std::string& stats_path,
                 const std::string& test_manifest_path) {
  PipelineConfig pipeline;
  return guarded(
      ctx,
      [&]() -> json {
        require_file(model_path, "--model");
        require_file(stats_path, "--stats");
        require_file(test_manifest_path, "--test-manifest");
        pipeline = pipeline_config_from_json(ctx.config);
        return json{{"action", "evaluate"},
                    {"model", model_path},
                    {"test_manifest", test_manifest_path},
                    {"out", ctx.out}};
      },
      [&]() -> int {
        ModelState model = load_model(model_path);
        if ((model.kind == ModelKind::patch) != (pipeline.paradigm == "patch"))
          fail(Err::InvalidArgument, "model kind does not match the pipeline paradigm");
        NormalizationStats stats = load_normalization_stats(stats_path);
        DatasetManifest manifest = load_dataset_manifest(test_manifest_path);
        std::vector<PreparedScene> test =
            prepare_scenes(manifest.scenes, pipeline, stats, ctx.workers);

        ResourceMonitor monitor;
        const auto t0 = std::chrono::steady_clock::now();
        ConfusionMatrix cm;
        MetricsReport metrics = evaluate_model(model, test, pipeline, &cm);
        std::vector<ResourceSample> samples = monitor.stop();
        EfficiencyReport eff;
        eff.computing_units = std::max(1, ctx.workers);
        for (ResourceSample& s : samples) s.cpu_busy /= eff.computing_units;
        eff.inference = summarize_phase(samples, eff.computing_units);
        eff.inference_wall_minutes =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;

        // Deterministic scores and volatile costs land in separate files so
        // reruns can be compared byte for byte.
        json stable = metrics_to_json(metrics);
        stable["confusion"] = confusion_to_json(cm);
        stable["paradigm"] = pipeline.paradigm;
        stable["normalization_id"] = stats.id();
        save_json_file(stable, out_file(ctx, "metrics.json").string());
        save_json_file(efficiency_to_json(eff), out_file(ctx, "efficiency.json").string());
        std::printf("%s\n", metrics_to_json(metrics).dump(2).c_str());
        return 0;
      });
}

int exit_for_report(const Ctx& ctx, const ExperimentReport& report) {
  emit_report(report, ctx.out);
  int errors = 0, skipped = 0;
  for (const CellResult& cell : report.cells) {
    errors += cell.errored ? 1 : 0;
    skipped += cell.skipped ? 1 : 0;
  }
  ctx.info("report: " + std::to_string(report.cells.size()) + " cells, " +
           std::to_string(skipped) + " skipped, " + std::to_string(errors) + " errored -> " +
           ctx.out);
  return report_has_errors(report) ? 1 : 0;
}

int cmd_transfer(Ctx& ctx) {
  TransferConfig cfg;
  return guarded(
      ctx,
      [&]() -> json {
        const json& c = ctx.config;
        cfg.pipeline = pipeline_config_from_json(c.value("pipeline", json::object()));
        cfg.axis = partition_kind_from_name(c.value("axis", std::string("season")));
        cfg.train_manifest = c.value("train_manifest", std::string());
        cfg.test_manifest = c.value("test_manifest", std::string());
        require_file(cfg.train_manifest, "train_manifest");
        require_file(cfg.test_manifest, "test_manifest");
        cfg.climatology_path = c.value("climatology", std::string());
        cfg.regions_path = c.value("regions", std::string());
        if (cfg.axis == PartitionKind::cryo) require_file(cfg.climatology_path, "climatology");
        if (cfg.axis == PartitionKind::region) require_file(cfg.regions_path, "regions");
        cfg.include_all = c.value("include_all", true);
        cfg.include_baseline = c.value("include_baseline", true);
        cfg.min_scenes = c.value("min_scenes", 2);
        cfg.workers = ctx.workers;
        return json{{"action", "transfer"},
                    {"axis", partition_kind_name(cfg.axis)},
                    {"out", ctx.out}};
      },
      [&]() -> int { return exit_for_report(ctx, run_transferability(cfg)); });
}

int cmd_sweep(Ctx& ctx) {
  SweepConfig cfg;
  return guarded(
      ctx,
      [&]() -> json {
        const json& c = ctx.config;
        cfg.pipeline = pipeline_config_from_json(c.value("pipeline", json::object()));
        cfg.axis = c.value("axis", std::string());
        if (!c.contains("values")) fail(Err::ConfigError, "sweep needs a values list");
        cfg.values = c.at("values").get<std::vector<long long>>();
        cfg.train_manifest = c.value("train_manifest", std::string());
        cfg.test_manifest = c.value("test_manifest", std::string());
        require_file(cfg.train_manifest, "train_manifest");
        require_file(cfg.test_manifest, "test_manifest");
        if (cfg.axis != "downscale" && cfg.axis != "patch_size" && cfg.axis != "data_size")
          fail(Err::ConfigError, "axis must be downscale, patch_size or data_size");
        cfg.workers = ctx.workers;
        return json{{"action", "sweep"}, {"axis", cfg.axis}, {"out", ctx.out}};
      },
      [&]() -> int { return exit_for_report(ctx, run_sweep(cfg)); });
}

int cmd_ablate_prep(Ctx& ctx) {
  PrepAblationConfig cfg;
  return guarded(
      ctx,
      [&]() -> json {
        const json& c = ctx.config;
        cfg.pipeline = pipeline_config_from_json(c.value("pipeline", json::object()));
        cfg.train_manifest = c.value("train_manifest", std::string());
        cfg.test_manifest = c.value("test_manifest", std::string());
        require_file(cfg.train_manifest, "train_manifest");
        require_file(cfg.test_manifest, "test_manifest");
        for (const json& r : c.value("rows", json::array())) {
          PrepAblationRow row;
          row.key = r.at("key").get<std::string>();
          row.augmentation = r.value("augmentation", false);
          row.land_policy = land_policy_from_name(r.value("land_policy", std::string("exclude")));
          row.border_distance = r.value("border_distance", 0);
          cfg.rows.push_back(std::move(row));
        }
        cfg.workers = ctx.workers;
        return json{{"action", "ablate-prep"},
                    {"rows", cfg.rows.empty() ? 4 : cfg.rows.size()},
                    {"out", ctx.out}};
      },
      [&]() -> int { return exit_for_report(ctx, run_preparation_ablation(cfg)); });
}

int cmd_fair_compare(Ctx& ctx) {
  FairCompareConfig cfg;
  return guarded(
      ctx,
      [&]() -> json {
        const json& c = ctx.config;
        cfg.pipeline = pipeline_config_from_json(c.value("pipeline", json::object()));
        cfg.train_manifest = c.value("train_manifest", std::string());
        cfg.test_manifest = c.value("test_manifest", std::string());
        require_file(cfg.test_manifest, "test_manifest");
        cfg.patch_model_path = c.value("patch_model", std::string());
        cfg.patch_stats_path = c.value("patch_stats", std::string());
        cfg.pixel_model_path = c.value("pixel_model", std::string());
        cfg.pixel_stats_path = c.value("pixel_stats", std::string());
        if (cfg.patch_model_path.empty() || cfg.pixel_model_path.empty())
          require_file(cfg.train_manifest, "train_manifest");
        for (const std::string& p : {cfg.patch_model_path, cfg.patch_stats_path,
                                     cfg.pixel_model_path, cfg.pixel_stats_path})
          if (!p.empty()) require_file(p, "model input");
        cfg.workers = ctx.workers;
        return json{{"action", "fair-compare"}, {"out", ctx.out}};
      },
      [&]() -> int { return exit_for_report(ctx, run_fair_compare(cfg)); });
}

int cmd_feature_ablation(Ctx& ctx) {
  FeatureAblationConfig cfg;
  return guarded(
      ctx,
      [&]() -> json {
        const json& c = ctx.config;
        cfg.pipeline = pipeline_config_from_json(c.value("pipeline", json::object()));
        cfg.train_manifest = c.value("train_manifest", std::string());
        cfg.test_manifest = c.value("test_manifest", std::string());
        require_file(cfg.test_manifest, "test_manifest");
        cfg.baseline = c.value("baseline", std::string("mean"));
        cfg.model_path = c.value("model", std::string());
        cfg.model_stats_path = c.value("stats", std::string());
        if (cfg.model_path.empty()) require_file(cfg.train_manifest, "train_manifest");
        for (const std::string& p : {cfg.model_path, cfg.model_stats_path})
          if (!p.empty()) require_file(p, "model input");
        if (cfg.baseline != "mean" && cfg.baseline != "zero")
          fail(Err::ConfigError, "baseline must be 'mean' or 'zero'");
        cfg.workers = ctx.workers;
        return json{{"action", "feature-ablation"}, {"baseline", cfg.baseline}, {"out", ctx.out}};
      },
      [&]() -> int { return exit_for_report(ctx, run_feature_ablation(cfg)); });
}

int cmd_report(Ctx& ctx, const std::vector<std::string>& inputs) {
  return guarded(
      ctx,
      [&]() -> json {
        if (inputs.empty()) fail(Err::ConfigError, "report needs at least one --input file");
        for (const std::string& p : inputs) require_file(p, "--input");
        return json{{"action", "report"}, {"inputs", inputs}, {"out", ctx.out}};
      },
      [&]() -> int {
        if (inputs.size() == 1) {
          ExperimentReport report = report_from_json(load_json_file(inputs[0]));
          return exit_for_report(ctx, report);
        }
        // Merge: cells concatenated, provenance kept per source.
        ExperimentReport merged;
        merged.name = "combined";
        merged.kind = "combined";
        json sources = json::array();
        for (const std::string& p : inputs) {
          ExperimentReport part = report_from_json(load_json_file(p));
          for (CellResult& cell : part.cells) {
            cell.extra["source"] = part.name;
            merged.cells.push_back(std::move(cell));
          }
          sources.push_back(json{{"path", p}, {"name", part.name}, {"kind", part.kind},
                                 {"provenance", part.provenance}});
        }
        merged.provenance = json{{"sources", sources}};
        return exit_for_report(ctx, merged);
      });
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"sea ice type classification benchmark harness"};
  app.require_subcommand(1);

  Ctx ctx;
  std::string manifest, train_manifest, test_manifest, model, stats;
  std::vector<std::string> report_inputs;

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled corpus");
  add_common(synth, ctx);

  CLI::App* labels = app.add_subcommand("labels", "derive class label rasters from ice charts");
  add_common(labels, ctx);
  labels->add_option("--manifest", manifest, "dataset manifest")->required();

  CLI::App* prepare = app.add_subcommand("prepare", "align, downscale and summarize scenes");
  add_common(prepare, ctx);
  prepare->add_option("--manifest", manifest, "dataset manifest")->required();

  CLI::App* patches = app.add_subcommand("patches", "extract pure patch records");
  add_common(patches, ctx);
  patches->add_option("--manifest", manifest, "dataset manifest")->required();

  CLI::App* partition = app.add_subcommand("partition", "filter scenes and draw validation splits");
  add_common(partition, ctx);
  partition->add_option("--manifest", manifest, "dataset manifest")->required();

  CLI::App* train = app.add_subcommand("train", "fit a reference model");
  add_common(train, ctx);
  train->add_option("--train-manifest", train_manifest, "training manifest")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "score a trained model");
  add_common(evaluate, ctx);
  evaluate->add_option("--model", model, "model file")->required();
  evaluate->add_option("--stats", stats, "normalization statistics file")->required();
  evaluate->add_option("--test-manifest", test_manifest, "test manifest")->required();

  CLI::App* transfer = app.add_subcommand("transfer", "cross-partition transfer matrix");
  add_common(transfer, ctx);

  CLI::App* sweep = app.add_subcommand("sweep", "vary one pipeline knob");
  add_common(sweep, ctx);

  CLI::App* ablate = app.add_subcommand("ablate-prep", "toggle preparation choices");
  add_common(ablate, ctx);

  CLI::App* fair = app.add_subcommand("fair-compare", "patch vs pixel at equal granularity");
  add_common(fair, ctx);

  CLI::App* feat = app.add_subcommand("feature-ablation", "per-channel attribution");
  add_common(feat, ctx);

  CLI::App* report = app.add_subcommand("report", "re-emit tables from stored reports");
  add_common(report, ctx);
  report->add_option("--input", report_inputs, "report.json file(s)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (synth->parsed()) return cmd_synth(ctx);
  if (labels->parsed()) return cmd_labels(ctx, manifest);
  if (prepare->parsed()) return cmd_prepare(ctx, manifest);
  if (patches->parsed()) return cmd_patches(ctx, manifest);
  if (partition->parsed()) return cmd_partition(ctx, manifest);
  if (train->parsed()) return cmd_train(ctx, train_manifest);
  if (evaluate->parsed()) return cmd_evaluate(ctx, model, stats, test_manifest);
  if (transfer->parsed()) return cmd_transfer(ctx);
  if (sweep->parsed()) return cmd_sweep(ctx);
  if (ablate->parsed()) return cmd_ablate_prep(ctx);
  if (fair->parsed()) return cmd_fair_compare(ctx);
  if (feat->parsed()) return cmd_feature_ablation(ctx);
  if (report->parsed()) return cmd_report(ctx, report_inputs);
  return 2;
}

}  // namespace icebench
