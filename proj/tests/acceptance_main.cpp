// Acceptance gate for the benchmark harness. Each criterion prints exactly one
// PASS/FAIL line; the process exits nonzero when any of them fails. Reference
// values come from the independent brute-force oracles, not from the library.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "icebench/chart_labels.hpp"
#include "icebench/cli.hpp"
#include "icebench/experiments.hpp"
#include "icebench/jsonio.hpp"
#include "icebench/metrics.hpp"
#include "icebench/models.hpp"
#include "icebench/partition.hpp"
#include "icebench/preprocess.hpp"
#include "icebench/rng.hpp"
#include "icebench/sampling.hpp"
#include "icebench/synthgen.hpp"
#include "oracles.hpp"

using namespace icebench;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;
fs::path g_root;

struct Check {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& why) {
    if (ok && !cond) {
      ok = false;
      detail = why;
    }
  }
};

void criterion(int n, const char* label, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = Clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail = std::string("unexpected exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (c.ok) {
    std::printf("PASS %2d/13 %s [%.1fs]\n", n, label, secs);
  } else {
    std::printf("FAIL %2d/13 %s -- %s [%.1fs]\n", n, label, c.detail.c_str(), secs);
    ++g_failures;
  }
  std::fflush(stdout);
}

std::string num(double v) { return std::to_string(v); }

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("icebench");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli_main(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  FILE* f = std::fopen(p.string().c_str(), "rb");
  if (!f) return {};
  std::string out;
  char buf[65536];
  size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) out.append(buf, n);
  std::fclose(f);
  return out;
}

std::vector<int> random_label_vec(RngStream& rng, size_t len, double abstain) {
  std::vector<int> v(len);
  for (int& x : v)
    x = rng.next_bernoulli(abstain) ? 255 : static_cast<int>(rng.next_below(oracle::kClasses));
  return v;
}

MetricsReport metrics_of(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  ConfusionMatrix cm;
  for (size_t i = 0; i < y_true.size(); ++i)
    cm.add(static_cast<uint8_t>(y_true[i]), static_cast<uint8_t>(y_pred[i]));
  return compute_metrics(cm);
}

// ---------------------------------------------------------------------------
// 1 + 2: weighted metrics against the vector-based oracle

constexpr uint64_t kMetricCaseKey = 0xACCE5501;

void metric_cases(const std::function<void(const std::vector<int>&, const std::vector<int>&)>& fn) {
  RngStream rng(kMetricCaseKey);
  for (int t = 0; t < 1000; ++t) {
    const size_t len = 1 + rng.next_below(100);
    std::vector<int> y_true(len);
    for (int& x : y_true) x = static_cast<int>(rng.next_below(oracle::kClasses));
    std::vector<int> y_pred = random_label_vec(rng, len, 0.1);
    fn(y_true, y_pred);
  }
}

void c1_metric_oracle(Check& c) {
  const auto t0 = Clock::now();
  int trials = 0;
  metric_cases([&](const std::vector<int>& yt, const std::vector<int>& yp) {
    if (!c.ok) return;
    ++trials;
    const MetricsReport m = metrics_of(yt, yp);
    const oracle::NaiveMetrics o = oracle::naive_metrics(yt, yp);
    auto close = [&](double a, double b, const char* what) {
      c.expect(std::abs(a - b) <= 1e-9,
               std::string(what) + " off by " + num(a - b) + " at trial " + std::to_string(trials));
    };
    close(m.accuracy, o.accuracy, "accuracy");
    close(m.precision_w, o.precision_w, "weighted precision");
    close(m.recall_w, o.recall_w, "weighted recall");
    close(m.f1_w, o.f1_w, "weighted F1");
    close(m.iou_w, o.iou_w, "weighted IoU");
  });
  c.expect(trials == 1000, "expected 1000 trials");

  const MetricsReport w = metrics_of({0, 0, 1, 1}, {0, 1, 1, 1});
  c.expect(std::abs(w.accuracy - 0.75) <= 1e-12, "worked accuracy != 0.75");
  c.expect(std::abs(w.f1_w - 11.0 / 15.0) <= 1e-12, "worked F1 != 11/15");
  c.expect(std::abs(w.f1_w - 0.7333) <= 5e-5, "worked F1 not 0.7333 to 4 digits");
  c.expect(std::abs(w.iou_w - 7.0 / 12.0) <= 1e-12, "worked IoU != 7/12");
  c.expect(std::abs(w.iou_w - 0.5833) <= 5e-5, "worked IoU not 0.5833 to 4 digits");

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(secs < 10.0, "oracle sweep took " + num(secs) + "s, budget is 10s");
}

void c2_recall_is_accuracy(Check& c) {
  int trials = 0;
  metric_cases([&](const std::vector<int>& yt, const std::vector<int>& yp) {
    if (!c.ok) return;
    ++trials;
    const MetricsReport m = metrics_of(yt, yp);
    c.expect(m.recall_w == m.accuracy,
             "recall_w != accuracy bitwise at trial " + std::to_string(trials));
  });
  c.expect(trials == 1000, "expected 1000 trials");
}

// ---------------------------------------------------------------------------
// 3: stage-of-development code table

void c3_code_table(Check& c) {
  const std::vector<std::pair<int, int>> table = {
      {0, 0},  {80, 0}, {81, 1}, {82, 1}, {83, 2}, {84, 2}, {85, 2}, {87, 3},
      {88, 3}, {89, 3}, {86, 4}, {91, 4}, {93, 4}, {95, 5}, {96, 5}, {97, 5}};
  for (const auto& [code, cls] : table)
    c.expect(map_sigrid_code(code) == cls,
             "code " + std::to_string(code) + " -> " + std::to_string(map_sigrid_code(code)) +
                 ", want " + std::to_string(cls));
  for (int code : {1, 42, 79, 92, 99})
    c.expect(map_sigrid_code(code) == kUnknownSod,
             "unlisted code " + std::to_string(code) + " did not map to unknown");
}

// ---------------------------------------------------------------------------
// 4: dominance rule properties on random polygons

void c4_dominance(Check& c) {
  RngStream rng(0xACCE5504);
  const int valid_codes[] = {0, 80, 81, 82, 83, 84, 85, 87, 88, 89, 86, 91, 93, 95, 96, 97};
  const double ladder[] = {0.5, 0.65, 0.8, 0.95};

  for (int t = 0; t < 500 && c.ok; ++t) {
    IceChartPolygon poly;
    poly.id = t;
    poly.total_sic = rng.next_bernoulli(0.2) ? 0.0 : 10.0 * (1 + rng.next_below(10));
    double remaining = poly.total_sic;
    const int k = 1 + static_cast<int>(rng.next_below(4));
    for (int j = 0; j < k; ++j) {
      SodPartial p;
      p.sod_code = rng.next_bernoulli(0.1) ? 42 : valid_codes[rng.next_below(16)];
      p.concentration = static_cast<double>(rng.next_below(static_cast<uint64_t>(remaining) + 1));
      remaining -= p.concentration;
      poly.partials.push_back(p);
    }

    // Independent share computation over mapped classes only.
    double share[oracle::kClasses] = {};
    if (poly.total_sic > 0.0)
      for (const SodPartial& p : poly.partials) {
        const int cls = map_sigrid_code(p.sod_code);
        if (cls >= 0)
          share[cls] = std::max(share[cls], std::min(1.0, p.concentration / poly.total_sic));
      }
    int winners = 0;
    for (double s : share) winners += s >= 0.65 ? 1 : 0;
    c.expect(winners <= 1, "two classes reached the 0.65 share in one polygon");

    uint8_t labels[4];
    for (int i = 0; i < 4; ++i) {
      LabelingConfig cfg;
      cfg.dominance_threshold = ladder[i];
      labels[i] = polygon_label(poly, cfg);
    }
    if (poly.total_sic == 0.0) {
      for (uint8_t l : labels) c.expect(l == 0, "zero total SIC did not label open water");
      continue;
    }
    // Raising the threshold can only drop polygons, never relabel them.
    for (int hi = 1; hi < 4; ++hi)
      if (labels[hi] != kIgnoreLabel)
        for (int lo = 0; lo < hi; ++lo)
          c.expect(labels[lo] == labels[hi], "label changed when the threshold was lowered");
    if (labels[1] != kIgnoreLabel && labels[1] < oracle::kClasses)
      c.expect(share[labels[1]] >= 0.65 - 1e-9, "labeled class is below the 0.65 share");
  }
}

// ---------------------------------------------------------------------------
// 5: patch grid count, border filter vs brute force, worker invariance

void c5_patch_extraction(Check& c) {
  {
    LabelRaster labels(400, 400, 0);
    SceneView view{"grid", nullptr, &labels, nullptr};
    SamplingConfig cfg;
    cfg.patch_size = 224;
    cfg.stride = 100;
    std::vector<PatchRecord> recs = extract_patches(view, cfg);
    c.expect(recs.size() == 4, "expected 4 candidates, got " + std::to_string(recs.size()));
    std::set<std::pair<int, int>> origins;
    for (const PatchRecord& r : recs) origins.insert({r.row, r.col});
    const std::set<std::pair<int, int>> want = {{0, 0}, {0, 100}, {100, 0}, {100, 100}};
    c.expect(origins == want, "candidate origins are not the 2x2 grid at stride 100");
  }

  SynthSpec sp = synth_preset("voronoi");
  sp.height = sp.width = 128;
  sp.n_polygons = 4;
  sp.channels = {{"sar_primary", 1}, {"sar_secondary", 1}};
  sp.n_scenes = 10;
  sp.n_test = 0;
  sp.seed = 55;
  size_t kept_total = 0, cut_total = 0;
  for (int i = 0; i < 10 && c.ok; ++i) {
    const Scene scene = synth_scene(sp, i);
    const LabelRaster labels = rasterize_labels(scene, LabelingConfig{});
    SamplingConfig base;
    base.patch_size = 16;
    base.stride = 8;
    SamplingConfig bordered = base;
    bordered.border_distance = 20;
    const std::vector<PatchRecord> plain = extract_patches(scene, labels, base);
    const std::vector<PatchRecord> got = extract_patches(scene, labels, bordered);

    std::set<std::tuple<int, int, int>> want;
    for (const PatchRecord& r : plain)
      if (oracle::border_ok_brute(labels, r.row, r.col, r.size, r.label, 20))
        want.insert({r.row, r.col, static_cast<int>(r.label)});
    std::set<std::tuple<int, int, int>> have;
    for (const PatchRecord& r : got) have.insert({r.row, r.col, static_cast<int>(r.label)});
    c.expect(have == want,
             "border filter disagrees with the brute-force scan on scene " + std::to_string(i));
    kept_total += have.size();
    cut_total += plain.size() - have.size();
  }
  c.expect(kept_total > 0, "border filter kept nothing anywhere, the comparison is vacuous");
  c.expect(cut_total > 0, "border filter cut nothing anywhere, the comparison is vacuous");

  const fs::path dir = g_root / "c5_corpus";
  SynthSpec wsp = synth_preset("voronoi");
  wsp.height = wsp.width = 64;
  wsp.channels = {{"sar_primary", 1}, {"sar_secondary", 1}};
  wsp.n_scenes = 10;
  wsp.n_test = 0;
  wsp.seed = 56;
  const SynthOutput out = generate(wsp, dir.string());
  const DatasetManifest manifest = load_dataset_manifest(out.train_manifest);
  SamplingConfig scfg;
  scfg.patch_size = 16;
  scfg.stride = 8;
  scfg.purity = 0.7;
  const fs::path j1 = g_root / "c5_w1.jsonl";
  const fs::path j8 = g_root / "c5_w8.jsonl";
  build_patch_dataset(manifest, LabelingConfig{}, scfg, j1.string(), 1);
  build_patch_dataset(manifest, LabelingConfig{}, scfg, j8.string(), 8);
  const std::string b1 = slurp(j1);
  c.expect(!b1.empty(), "patch record stream is empty");
  c.expect(b1 == slurp(j8), "1 vs 8 workers changed the record bytes");
}

// ---------------------------------------------------------------------------
// 6: block-average downscale conservation

void c6_downscale(Check& c) {
  RngStream rng(0xACCE5506);
  for (int t = 0; t < 100 && c.ok; ++t) {
    const int h = 10 + static_cast<int>(rng.next_below(91));
    const int w = 10 + static_cast<int>(rng.next_below(91));
    const Raster<float> src = oracle::random_raster(h, w, 9000 + t);
    for (int ratio : {2, 5}) {
      const Raster<float> dst = downscale(src, ratio, AlignKernel::block_average);
      c.expect(dst.height() == h / ratio && dst.width() == w / ratio, "downscaled dims wrong");
      double out_sum = 0.0;
      for (int r = 0; r < dst.height() && c.ok; ++r)
        for (int cc = 0; cc < dst.width(); ++cc) {
          const double want = oracle::block_mean_brute(src, r * ratio, cc * ratio, ratio, ratio);
          if (std::abs(dst.at(r, cc) - want) > 1e-6) {
            c.expect(false, "block mean off by " + num(dst.at(r, cc) - want) + " at ratio " +
                                std::to_string(ratio));
            break;
          }
          out_sum += dst.at(r, cc);
        }
      // Mean over the covered source region, straight from the pixels.
      const double covered =
          oracle::block_mean_brute(src, 0, 0, dst.height() * ratio, dst.width() * ratio);
      c.expect(std::abs(out_sum / dst.size() - covered) <= 1e-6,
               "covered-region mean not conserved at ratio " + std::to_string(ratio));
    }
    const Raster<float> same = downscale(src, 1, AlignKernel::block_average);
    c.expect(same.height() == h && same.width() == w &&
                 std::memcmp(same.data(), src.data(), sizeof(float) * src.size()) == 0,
             "ratio 1 is not a bit-exact identity");
  }
}

// ---------------------------------------------------------------------------
// 7: partition laws

void c7_partitions(Check& c) {
  const fs::path dir = g_root / "c7_corpus";
  SynthSpec sp = synth_preset("voronoi");
  sp.height = sp.width = 48;
  sp.channels = {{"sar_primary", 1}};
  sp.n_scenes = 12;
  sp.n_test = 0;
  sp.seed = 57;
  const SynthOutput out = generate(sp, dir.string());
  const DatasetManifest manifest = load_dataset_manifest(out.train_manifest);
  const MeltClimatology clim = load_climatology(out.climatology);

  const std::vector<SceneMeta> metas = load_scene_metas(manifest);
  for (const SceneMeta& meta : metas) {
    int season_hits = 0;
    for (Season s : {Season::spring, Season::summer, Season::fall, Season::winter}) {
      SplitFilters f;
      f.season = s;
      season_hits += filters_match(meta, f, nullptr, nullptr) ? 1 : 0;
    }
    c.expect(season_hits == 1, meta.scene_id + " fell into " + std::to_string(season_hits) +
                                   " season pools instead of exactly one");
    int cryo_hits = 0;
    for (CryoSeason s : {CryoSeason::melt, CryoSeason::freeze}) {
      SplitFilters f;
      f.cryo = s;
      cryo_hits += filters_match(meta, f, &clim, nullptr) ? 1 : 0;
    }
    c.expect(cryo_hits == 1, meta.scene_id + " fell into " + std::to_string(cryo_hits) +
                                 " cryo pools instead of exactly one");
  }

  HoldoutSpec holdout;
  holdout.fraction = 0.25;
  const SplitResult a = make_splits(manifest, SplitFilters{}, holdout, 11);
  const SplitResult b = make_splits(manifest, SplitFilters{}, holdout, 11);
  c.expect(a.train.scenes == b.train.scenes && a.validation.scenes == b.validation.scenes,
           "same seed produced different splits");
  std::set<std::string> all(manifest.scenes.begin(), manifest.scenes.end());
  std::set<std::string> seen;
  for (const std::string& s : a.train.scenes) c.expect(seen.insert(s).second, "duplicate scene");
  for (const std::string& s : a.validation.scenes)
    c.expect(seen.insert(s).second, "scene in both splits");
  c.expect(seen == all, "splits do not cover the manifest exactly");

  for (PartitionKind kind : {PartitionKind::none, PartitionKind::season}) {
    const ClassDistribution dist =
        class_distribution(manifest, LabelingConfig{}, Granularity::pixel, kind);
    c.expect(!dist.rows.empty(), "class distribution came back empty");
    for (const DistributionRow& row : dist.rows) {
      double sum = 0.0;
      for (double f : row.fractions) sum += f;
      c.expect(std::abs(sum - 1.0) <= 1e-9,
               "fractions for '" + row.key + "' sum to " + num(sum));
    }
  }
}

// ---------------------------------------------------------------------------
// 8: end-to-end on linearly separable scenes

PipelineConfig separable_pipeline() {
  PipelineConfig pc;
  pc.paradigm = "patch";
  pc.features = {"sar_primary", "sar_secondary", "btemp_low", "btemp_high"};
  pc.sampling.patch_size = 16;
  pc.sampling.stride = 8;
  pc.crop.mode = SamplingMode::crop;
  pc.crop.patch_size = 16;
  pc.train.learning_rate = 5e-2;
  pc.train.batch_size = 16;
  pc.train.max_epochs = 60;
  pc.train.patience = 10;
  pc.train.epoch_steps = 40;
  pc.seed = 3;
  pc.train.seed = 3;
  return pc;
}

void c8_end_to_end(Check& c) {
  const auto t0 = Clock::now();
  const fs::path dir = g_root / "c8_corpus";
  SynthSpec sp = synth_preset("separable");
  sp.n_scenes = 20;
  sp.n_test = 4;
  sp.height = sp.width = 64;
  sp.seed = 5;
  const SynthOutput out = generate(sp, dir.string());
  const DatasetManifest train = load_dataset_manifest(out.train_manifest);
  const DatasetManifest test = load_dataset_manifest(out.test_manifest);
  c.expect(train.scenes.size() == 16 && test.scenes.size() == 4, "expected a 16/4 scene split");

  PipelineConfig patch_cfg = separable_pipeline();
  const TrainedRun patch_run = train_pipeline(train, patch_cfg, 1);
  const std::vector<PreparedScene> patch_test =
      prepare_scenes(test.scenes, patch_cfg, patch_run.stats, 1);
  const MetricsReport patch_m = evaluate_model(patch_run.fit.state, patch_test, patch_cfg);
  c.expect(patch_m.f1_w >= 0.95, "patch weighted F1 " + num(patch_m.f1_w) + " < 0.95");

  PipelineConfig pixel_cfg = separable_pipeline();
  pixel_cfg.paradigm = "pixel";
  pixel_cfg.train.max_epochs = 30;
  pixel_cfg.train.patience = 8;
  pixel_cfg.train.batch_size = 8;
  const TrainedRun pixel_run = train_pipeline(train, pixel_cfg, 1);
  const std::vector<PreparedScene> pixel_test =
      prepare_scenes(test.scenes, pixel_cfg, pixel_run.stats, 1);
  const MetricsReport pixel_m = evaluate_model(pixel_run.fit.state, pixel_test, pixel_cfg);
  c.expect(pixel_m.f1_w >= 0.90, "pixel weighted F1 " + num(pixel_m.f1_w) + " < 0.90");

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  c.expect(secs < 300.0, "single-worker run took " + num(secs) + "s, budget is 300s");
}

// ---------------------------------------------------------------------------
// 9: mixed-label scenes favor the pixel paradigm

void c9_mixed_labels(Check& c) {
  const fs::path dir = g_root / "c9_corpus";
  SynthSpec sp = synth_preset("checkerboard");
  sp.checker_block = 12;  // every 16px tile straddles blocks, capping per-tile labels
  sp.height = sp.width = 48;
  sp.channels = {{"sar_primary", 1}, {"sar_secondary", 1}};
  sp.n_scenes = 10;
  sp.n_test = 3;
  sp.seed = 9;
  const SynthOutput out = generate(sp, dir.string());

  FairCompareConfig cfg;
  cfg.pipeline.paradigm = "patch";
  cfg.pipeline.features = {"sar_primary", "sar_secondary"};
  cfg.pipeline.sampling.patch_size = 16;
  cfg.pipeline.sampling.stride = 8;
  cfg.pipeline.sampling.purity = 0.6;  // admits the 0.625-dominant mixed windows
  cfg.pipeline.crop.mode = SamplingMode::crop;
  cfg.pipeline.crop.patch_size = 16;
  cfg.pipeline.train.learning_rate = 5e-2;
  cfg.pipeline.train.max_epochs = 25;
  cfg.pipeline.train.patience = 6;
  cfg.pipeline.train.batch_size = 8;
  cfg.pipeline.train.epoch_steps = 60;
  cfg.pipeline.seed = 3;
  cfg.pipeline.train.seed = 3;
  cfg.train_manifest = out.train_manifest;
  cfg.test_manifest = out.test_manifest;
  const ExperimentReport rep = run_fair_compare(cfg);

  c.expect(rep.cells.size() == 2, "expected two cells");
  const CellResult* patch_cell = nullptr;
  const CellResult* pixel_cell = nullptr;
  for (const CellResult& cell : rep.cells) {
    if (cell.train_key == "patch") patch_cell = &cell;
    if (cell.train_key == "pixel") pixel_cell = &cell;
  }
  c.expect(patch_cell && pixel_cell, "missing a paradigm cell");
  if (!patch_cell || !pixel_cell) return;
  c.expect(patch_cell->has_metrics && pixel_cell->has_metrics, "a cell has no metrics");
  c.expect(patch_cell->metrics.f1_w < pixel_cell->metrics.f1_w,
           "patch F1 " + num(patch_cell->metrics.f1_w) + " is not strictly below pixel F1 " +
               num(pixel_cell->metrics.f1_w));
}

// ---------------------------------------------------------------------------
// 10: training protocol

void c10_training(Check& c) {
  RngStream rng(0xACCE5510);
  for (int t = 0; t < 50 && c.ok; ++t) {
    const int dim = 2 + static_cast<int>(rng.next_below(5));
    const size_t n = 5 + rng.next_below(16);
    std::vector<double> w(6 * dim), b(6);
    for (double& x : w) x = rng.next_normal();
    for (double& x : b) x = rng.next_normal();
    std::vector<PatchSample> samples(n);
    for (PatchSample& s : samples) {
      s.features.resize(dim);
      for (double& x : s.features) x = rng.next_normal();
      s.label = static_cast<uint8_t>(rng.next_below(6));
    }
    std::vector<double> gw, gb, fw, fb;
    ce_loss_and_grad(w, b, 6, dim, samples.data(), n, &gw, &gb);
    oracle::fd_gradient(w, b, 6, dim, samples, 1e-6, &fw, &fb);
    for (size_t i = 0; i < gw.size() && c.ok; ++i)
      c.expect(std::abs(gw[i] - fw[i]) <= 1e-4 * std::max(1.0, std::abs(fw[i])),
               "weight gradient " + std::to_string(i) + " off at instance " + std::to_string(t));
    for (size_t i = 0; i < gb.size() && c.ok; ++i)
      c.expect(std::abs(gb[i] - fb[i]) <= 1e-4 * std::max(1.0, std::abs(fb[i])),
               "bias gradient " + std::to_string(i) + " off at instance " + std::to_string(t));
  }

  // Two clean blobs to learn; validation relabeled and shifted so its loss
  // strictly worsens as the train fit improves.
  auto blob = [](RngStream& r, int cls, double offset, int relabel) {
    PatchSample s;
    s.features = {(cls ? 2.0 : -2.0) + 0.3 * r.next_normal() + offset,
                  (cls ? -2.0 : 2.0) + 0.3 * r.next_normal() + offset};
    s.label = static_cast<uint8_t>(cls + relabel);
    return s;
  };
  {
    RngStream r(0xACCE55AA);
    std::vector<PatchSample> train, val;
    for (int i = 0; i < 40; ++i) train.push_back(blob(r, i % 2, 0.0, 0));
    for (int i = 0; i < 20; ++i) val.push_back(blob(r, i % 2, 50.0, 3));
    TrainConfig cfg;
    cfg.learning_rate = 5e-2;
    cfg.batch_size = 8;
    cfg.max_epochs = 50;
    cfg.patience = 3;
    cfg.seed = 1;
    const FitResult fit = fit_patch(train, val, cfg);
    c.expect(fit.epochs_run == cfg.patience + 1,
             "worsening validation ran " + std::to_string(fit.epochs_run) + " epochs, want " +
                 std::to_string(cfg.patience + 1));
    c.expect(fit.best_epoch == 1, "best epoch should be the first");
  }
  {
    RngStream r(0xACCE55AB);
    std::vector<PatchSample> train, val;
    for (int i = 0; i < 60; ++i) train.push_back(blob(r, i % 2, 0.0, 0));
    for (int i = 0; i < 24; ++i) val.push_back(blob(r, i % 2, 0.0, 0));
    TrainConfig cfg;
    cfg.learning_rate = 5e-2;
    cfg.batch_size = 8;
    cfg.max_epochs = 40;
    cfg.patience = 40;
    cfg.seed = 2;
    const FitResult fit = fit_patch(train, val, cfg);
    double min_logged = std::numeric_limits<double>::infinity();
    for (const EpochLog& e : fit.log) min_logged = std::min(min_logged, e.val_loss);
    c.expect(fit.best_val_loss == min_logged, "best_val_loss is not the logged minimum");
    const double replay =
        ce_loss_and_grad(fit.state.weights, fit.state.bias, fit.state.n_classes,
                         fit.state.feature_dim, val.data(), val.size(), nullptr, nullptr);
    c.expect(std::abs(replay - fit.best_val_loss) <= 1e-12,
             "returned state does not reproduce the best validation loss");
  }
}

// ---------------------------------------------------------------------------
// 11: efficiency accounting

void c11_efficiency(Check& c) {
  c.expect(core_hours(0.5, 2.0, 4) == 4.0, "core_hours(0.5, 2.0, 4) != 4.0 exactly");

  RngStream rng(0xACCE5511);
  for (int t = 0; t < 100 && c.ok; ++t) {
    auto stream = [&](int n) {
      std::vector<ResourceSample> s(n);
      double tt = 0.0;
      for (ResourceSample& x : s) {
        tt += 0.1 + rng.next_unit();
        x.t_seconds = tt;
        x.rss_bytes = 1e9 * (0.5 + rng.next_unit());
        x.cpu_busy = rng.next_unit();
      }
      return s;
    };
    const int units = 1 + static_cast<int>(rng.next_below(8));
    const std::vector<ResourceSample> train_s = stream(2 + static_cast<int>(rng.next_below(30)));
    const std::vector<ResourceSample> infer_s = stream(2 + static_cast<int>(rng.next_below(30)));
    const oracle::NaivePhase ot = oracle::naive_phase(train_s, units);
    const oracle::NaivePhase oi = oracle::naive_phase(infer_s, units);

    EfficiencyReport er;
    er.train = summarize_phase(train_s, units);
    er.inference = summarize_phase(infer_s, units);
    er.computing_units = units;
    er.epochs = 1 + static_cast<int>(rng.next_below(20));
    er.train_wall_hours = rng.next_uniform(0.1, 5.0);
    er.inference_wall_minutes = rng.next_uniform(1.0, 100.0);

    c.expect(std::abs(er.train.mean_busy - ot.mean_busy) <= 1e-9, "train busy fraction off");
    c.expect(std::abs(er.inference.mean_busy - oi.mean_busy) <= 1e-9, "infer busy fraction off");
    c.expect(er.train.max_mem_gb >= er.train.avg_mem_gb - 1e-12, "train max mem < avg mem");
    c.expect(er.inference.max_mem_gb >= er.inference.avg_mem_gb - 1e-12, "infer max mem < avg");

    const json j = efficiency_to_json(er);
    c.expect(std::abs(j.at("MaxMT").get<double>() - ot.max_mem_gb) <= 1e-9, "MaxMT off");
    c.expect(j.at("MaxMT").get<double>() >= j.at("AvgMT").get<double>() - 1e-12, "MaxMT < AvgMT");
    c.expect(j.at("MaxMI").get<double>() >= j.at("AvgMI").get<double>() - 1e-12, "MaxMI < AvgMI");
    c.expect(std::abs(j.at("TotCT").get<double>() - ot.mean_busy * er.train_wall_hours * units) <=
                 1e-9,
             "TotCT does not recompute from busy x wall x units");
    c.expect(std::abs(j.at("TotCI").get<double>() -
                      oi.mean_busy * (er.inference_wall_minutes / 60.0) * units) <= 1e-9,
             "TotCI does not recompute from busy x wall x units");
    c.expect(std::abs(j.at("AvgET").get<double>() -
                      j.at("TotTT").get<double>() * 60.0 / er.epochs) <= 1e-9,
             "AvgET is not TotTT x 60 / epochs");
  }
}

// ---------------------------------------------------------------------------
// 12: feature attribution

void c12_attribution(Check& c) {
  {
    const fs::path dir = g_root / "c12_zero";
    SynthSpec sp = synth_preset("separable");
    sp.height = sp.width = 48;
    sp.channels = {{"sar_primary", 1}, {"sar_secondary", 1}};
    sp.n_scenes = 6;
    sp.n_test = 2;
    sp.seed = 21;
    const SynthOutput out = generate(sp, dir.string());

    // Hand-built patch model that reads only the first channel's mean; the
    // second channel's columns are all zero.
    ModelState m;
    m.kind = ModelKind::patch;
    m.n_classes = kNumClasses;
    m.feature_dim = 4;
    m.weights.assign(static_cast<size_t>(m.n_classes) * m.feature_dim, 0.0);
    for (int k = 0; k < m.n_classes; ++k) m.weights[static_cast<size_t>(k) * 4] = k;
    m.bias.assign(m.n_classes, 0.0);
    m.trained = true;
    const fs::path model_path = dir / "zero_channel.bin";
    save_model(m, model_path.string());
    NormalizationStats st;
    st.channels["sar_primary"] = {0.0, 1.0};
    st.channels["sar_secondary"] = {0.0, 1.0};
    const fs::path stats_path = dir / "zero_channel_stats.json";
    save_normalization_stats(st, stats_path.string());

    FeatureAblationConfig cfg;
    cfg.pipeline.paradigm = "patch";
    cfg.pipeline.features = {"sar_primary", "sar_secondary"};
    cfg.pipeline.sampling.patch_size = 16;
    cfg.pipeline.sampling.stride = 16;
    cfg.pipeline.crop.mode = SamplingMode::crop;
    cfg.pipeline.crop.patch_size = 16;
    cfg.test_manifest = out.test_manifest;
    cfg.model_path = model_path.string();
    cfg.model_stats_path = stats_path.string();
    const ExperimentReport rep = run_feature_ablation(cfg);

    bool found = false;
    for (const CellResult& cell : rep.cells)
      if (cell.train_key == "sar_secondary") {
        found = true;
        c.expect(cell.extra.at("attribution_f1_w").get<double>() == 0.0,
                 "zero-weight channel attribution is " +
                     num(cell.extra.at("attribution_f1_w").get<double>()));
      }
    c.expect(found, "no cell for the zero-weight channel");
  }

  {
    const fs::path dir = g_root / "c12_info";
    SynthSpec sp = synth_preset("single_informative");
    sp.height = sp.width = 48;
    sp.n_polygons = 6;  // multi-class scenes so the validation holdout sees every class
    sp.channels = {{"sar_primary", 1}, {"sar_secondary", 1}, {"btemp_low", 1}};
    sp.n_scenes = 10;
    sp.n_test = 3;
    sp.seed = 22;
    const SynthOutput out = generate(sp, dir.string());

    FeatureAblationConfig cfg;
    cfg.pipeline.paradigm = "patch";
    cfg.pipeline.features = {"sar_primary", "sar_secondary", "btemp_low"};
    cfg.pipeline.sampling.patch_size = 16;
    cfg.pipeline.sampling.stride = 8;
    cfg.pipeline.sampling.purity = 0.6;
    cfg.pipeline.crop.mode = SamplingMode::crop;
    cfg.pipeline.crop.patch_size = 16;
    cfg.pipeline.train.learning_rate = 5e-2;
    cfg.pipeline.train.max_epochs = 30;
    cfg.pipeline.train.patience = 8;
    cfg.pipeline.train.epoch_steps = 60;
    cfg.pipeline.seed = 3;
    cfg.pipeline.train.seed = 3;
    cfg.train_manifest = out.train_manifest;
    cfg.test_manifest = out.test_manifest;
    const ExperimentReport rep = run_feature_ablation(cfg);

    std::map<std::string, double> attribution;
    for (const CellResult& cell : rep.cells)
      if (cell.train_key != "full" && cell.extra.contains("attribution_f1_w"))
        attribution[cell.train_key] = cell.extra.at("attribution_f1_w").get<double>();
    c.expect(attribution.size() == 3, "expected one attribution per channel");
    for (const auto& [name, value] : attribution)
      if (name != "sar_primary")
        c.expect(attribution["sar_primary"] > value,
                 "informative channel " + num(attribution["sar_primary"]) +
                     " does not exceed " + name + " " + num(value));
  }
}

// ---------------------------------------------------------------------------
// 13: whole-chain reproducibility through the command surface

void c13_reproducibility(Check& c) {
  auto chain = [&](const std::string& tag) -> fs::path {
    const fs::path root = g_root / ("c13_" + tag);
    const fs::path corpus = root / "corpus";
    const json synth_cfg = {
        {"preset", "separable"},
        {"n_scenes", 8},
        {"height", 48},
        {"width", 48},
        {"channels", json::array({{{"name", "sar_primary"}, {"divisor", 1}},
                                  {{"name", "sar_secondary"}, {"divisor", 1}}})},
        {"n_test", 2},
        {"seed", 99}};
    const json pipe_cfg = {
        {"paradigm", "patch"},
        {"features", json::array({"sar_primary", "sar_secondary"})},
        {"sampling", {{"patch_size", 16}, {"stride", 16}, {"purity", 0.6}}},
        {"crop", {{"patch_size", 16}}},
        {"train",
         {{"learning_rate", 5e-2}, {"max_epochs", 10}, {"patience", 4}, {"epoch_steps", 40}}},
        {"seed", 7}};
    fs::create_directories(root);
    const fs::path synth_path = root / "synth.json";
    const fs::path pipe_path = root / "pipeline.json";
    save_json_file(synth_cfg, synth_path.string());
    save_json_file(pipe_cfg, pipe_path.string());

    c.expect(run_cli({"synth", "--config", synth_path.string(), "--out", corpus.string()}) == 0,
             "synth step failed in " + tag);
    c.expect(run_cli({"train", "--train-manifest", (corpus / "train_manifest.json").string(),
                      "--config", pipe_path.string(), "--out", (root / "model").string()}) == 0,
             "train step failed in " + tag);
    c.expect(run_cli({"evaluate", "--model", (root / "model" / "model.bin").string(), "--stats",
                      (root / "model" / "stats.json").string(), "--test-manifest",
                      (corpus / "test_manifest.json").string(), "--config", pipe_path.string(),
                      "--out", (root / "eval").string()}) == 0,
             "evaluate step failed in " + tag);
    const json sweep_cfg = {{"pipeline", pipe_cfg},
                            {"axis", "downscale"},
                            {"values", json::array({1})},
                            {"train_manifest", (corpus / "train_manifest.json").string()},
                            {"test_manifest", (corpus / "test_manifest.json").string()}};
    const fs::path sweep_path = root / "sweep.json";
    save_json_file(sweep_cfg, sweep_path.string());
    c.expect(run_cli({"sweep", "--config", sweep_path.string(), "--out",
                      (root / "report").string()}) == 0,
             "report step failed in " + tag);
    return root;
  };

  const fs::path r1 = chain("one");
  const fs::path r2 = chain("two");
  if (!c.ok) return;
  const std::string m1 = slurp(r1 / "eval" / "metrics.json");
  c.expect(!m1.empty(), "first run wrote no metrics");
  c.expect(m1 == slurp(r2 / "eval" / "metrics.json"), "metrics bytes differ between runs");
  const std::string t1 = slurp(r1 / "report" / "cells.csv");
  c.expect(!t1.empty(), "first run wrote no report table");
  c.expect(t1 == slurp(r2 / "report" / "cells.csv"), "report tables differ between runs");
}

}  // namespace

int main() {
  g_root = fs::temp_directory_path() / "icebench_acceptance";
  fs::remove_all(g_root);
  fs::create_directories(g_root);

  criterion(1, "weighted metrics match the brute-force oracle on 1000 random cases",
            c1_metric_oracle);
  criterion(2, "weighted recall equals accuracy bitwise on all 1000 cases", c2_recall_is_accuracy);
  criterion(3, "stage-of-development code table is exact; unlisted codes are unknown",
            c3_code_table);
  criterion(4, "dominance rule: unique winner, threshold anti-monotone, zero SIC is open water",
            c4_dominance);
  criterion(5, "patch grid counts, border filter vs brute force, worker-invariant bytes",
            c5_patch_extraction);
  criterion(6, "block-average downscale conserves block means; ratio 1 is bit-exact",
            c6_downscale);
  criterion(7, "season pools partition manifests; splits deterministic; distributions sum to 1",
            c7_partitions);
  criterion(8, "separable end-to-end: patch F1 >= 0.95, pixel F1 >= 0.90 on held-out scenes",
            c8_end_to_end);
  criterion(9, "checkerboard scenes: patch model scores strictly below the pixel model",
            c9_mixed_labels);
  criterion(10, "gradients match finite differences; early-stop and best-state contracts hold",
            c10_training);
  criterion(11, "core-hour product exact; max >= avg; efficiency report recomputes", c11_efficiency);
  criterion(12, "zero-weight channel attribution is 0; informative channel dominates",
            c12_attribution);
  criterion(13, "identical seeds give identical metrics bytes across two full runs",
            c13_reproducibility);

  fs::remove_all(g_root);
  if (g_failures == 0) {
    std::printf("acceptance: all 13 criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d of 13 criteria failed\n", g_failures);
  return 1;
}
