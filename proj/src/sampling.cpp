#include "icebench/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "icebench/jsonio.hpp"
#include "icebench/kernels.hpp"
#include "icebench/parallel.hpp"
#include "icebench/rng.hpp"

namespace icebench {

void validate_sampling_config(const SamplingConfig& cfg) {
  if (cfg.patch_size < 1) fail(Err::ConfigError, "sampling.patch_size: must be >= 1");
  if (cfg.stride < 1) fail(Err::ConfigError, "sampling.stride: must be >= 1");
  if (!(cfg.purity > 0.5 && cfg.purity <= 1.0))
    fail(Err::ConfigError, "sampling.purity: must be in (0.5, 1.0]");
  if (cfg.border_distance < 0) fail(Err::ConfigError, "sampling.border_distance: must be >= 0");
  if (cfg.epoch_steps < 1) fail(Err::ConfigError, "sampling.epoch_steps: must be >= 1");
}

void validate_augmentation_config(const AugmentationConfig& cfg) {
  if (cfg.rotation_max_deg < 0.0 || cfg.rotation_max_deg > 45.0)
    fail(Err::ConfigError, "augmentation.rotation_max_deg: must be in [0, 45]");
}

bool patch_purity_ok(const uint64_t counts[7], double purity, int* dominant_class) {
  uint64_t valid = 0, best = 0;
  int best_class = -1;
  for (int k = 0; k < kNumClasses; ++k) {
    valid += counts[k];
    if (counts[k] > best) {
      best = counts[k];
      best_class = k;
    }
  }
  if (valid == 0) return false;
  double share = static_cast<double>(best) / static_cast<double>(valid);
  // the epsilon survives shares like 0.65 that are not exactly representable
  if (share + 1e-12 < purity) return false;
  if (dominant_class) *dominant_class = best_class;
  return true;
}

namespace {

bool window_has_land(const Raster<uint8_t>& land, int r0, int c0, int size) {
  for (int r = r0; r < r0 + size; ++r) {
    const uint8_t* row = land.row(r) + c0;
    for (int c = 0; c < size; ++c)
      if (row[c]) return true;
  }
  return false;
}

bool window_has_nonfinite(const FeatureStack& stack, int r0, int c0, int size) {
  for (const auto& ch : stack.channels) {
    const float* origin = ch.data() + static_cast<size_t>(r0) * ch.width() + c0;
    if (kernels::count_nonfinite_f32(origin, ch.width(), size, size) > 0) return true;
  }
  return false;
}

// True when some valid pixel of a class other than cls sits within
// border_distance of the window rectangle (pixels inside it included).
bool window_near_foreign_class(const LabelRaster& labels, int r0, int c0, int size, int cls,
                               int d, BorderMetric metric) {
  int h = labels.height(), w = labels.width();
  int rlo = std::max(0, r0 - d), rhi = std::min(h, r0 + size + d);
  int clo = std::max(0, c0 - d), chi = std::min(w, c0 + size + d);
  int r1 = r0 + size - 1, c1 = c0 + size - 1;
  for (int r = rlo; r < rhi; ++r) {
    const uint8_t* row = labels.row(r);
    for (int c = clo; c < chi; ++c) {
      uint8_t v = row[c];
      if (v >= kNumClasses || v == cls) continue;
      if (metric == BorderMetric::chebyshev) return true;  // scan box == Chebyshev ball
      int dr = r < r0 ? r0 - r : (r > r1 ? r - r1 : 0);
      int dc = c < c0 ? c0 - c : (c > c1 ? c - c1 : 0);
      if (dr * dr + dc * dc <= d * d) return true;
    }
  }
  return false;
}

}  // namespace

std::vector<PatchRecord> extract_patches(const SceneView& view, const SamplingConfig& cfg) {
  validate_sampling_config(cfg);
  if (cfg.mode != SamplingMode::patch)
    fail(Err::ConfigError, "extract_patches: sampling mode must be 'patch'");
  if (!view.labels) fail(Err::InvalidArgument, "extract_patches: labels required");
  const LabelRaster& labels = *view.labels;
  int h = labels.height(), w = labels.width();
  int size = cfg.patch_size;

  std::vector<PatchRecord> records;
  for (int r0 = 0; r0 + size <= h; r0 += cfg.stride) {
    for (int c0 = 0; c0 + size <= w; c0 += cfg.stride) {
      if (!cfg.allow_land && view.land && window_has_land(*view.land, r0, c0, size)) continue;
      if (cfg.reject_nonfinite && view.features &&
          window_has_nonfinite(*view.features, r0, c0, size))
        continue;
      uint64_t counts[7];
      kernels::label_histogram_u8(labels.row(r0) + c0, w, size, size, counts);
      int cls = -1;
      if (!patch_purity_ok(counts, cfg.purity, &cls)) continue;
      if (cfg.border_distance > 0 &&
          window_near_foreign_class(labels, r0, c0, size, cls, cfg.border_distance,
                                    cfg.border_metric))
        continue;
      records.push_back({view.scene_id, r0, c0, size, static_cast<uint8_t>(cls)});
    }
  }
  return records;
}

std::vector<PatchRecord> extract_windows(const SceneView& view, const SamplingConfig& cfg) {
  validate_sampling_config(cfg);
  if (!view.labels) fail(Err::InvalidArgument, "extract_windows: labels required");
  const LabelRaster& labels = *view.labels;
  int h = labels.height(), w = labels.width();
  int size = cfg.patch_size;

  std::vector<PatchRecord> records;
  for (int r0 = 0; r0 + size <= h; r0 += cfg.stride) {
    for (int c0 = 0; c0 + size <= w; c0 += cfg.stride) {
      if (!cfg.allow_land && view.land && window_has_land(*view.land, r0, c0, size)) continue;
      if (cfg.reject_nonfinite && view.features &&
          window_has_nonfinite(*view.features, r0, c0, size))
        continue;
      uint64_t counts[7];
      kernels::label_histogram_u8(labels.row(r0) + c0, w, size, size, counts);
      uint64_t valid = 0, best = 0;
      int cls = -1;
      for (int k = 0; k < kNumClasses; ++k) {
        valid += counts[k];
        if (counts[k] > best) {
          best = counts[k];
          cls = k;
        }
      }
      if (valid == 0) continue;
      records.push_back({view.scene_id, r0, c0, size, static_cast<uint8_t>(cls)});
    }
  }
  return records;
}

namespace {

FeatureStack stack_of_raw_channels(const Scene& aligned) {
  FeatureStack stack;
  stack.height = aligned.height;
  stack.width = aligned.width;
  for (size_t i = 0; i < aligned.channel_specs.size(); ++i) {
    stack.names.push_back(aligned.channel_specs[i].name);
    stack.channels.push_back(aligned.channel_data[i]);
  }
  return stack;
}

}  // namespace

std::vector<PatchRecord> extract_patches(const Scene& scene, const LabelRaster& labels,
                                         const SamplingConfig& cfg, double land_zone_max) {
  Scene aligned = align_scene(scene, AlignmentPolicy{});
  FeatureStack stack = stack_of_raw_channels(aligned);
  Raster<uint8_t> land = land_mask_at_ref(aligned, land_zone_max);
  SceneView view{scene.scene_id, &stack, &labels, &land};
  return extract_patches(view, cfg);
}

// ---------------------------------------------------------------------------
// crops

namespace {

constexpr uint64_t kCropSalt = 0x63726f70;  // "crop"

FeatureStack window_stack(const FeatureStack& stack, int r0, int c0, int size) {
  FeatureStack out;
  out.names = stack.names;
  out.height = size;
  out.width = size;
  out.channels.reserve(stack.channels.size());
  for (const auto& ch : stack.channels) {
    Raster<float> win(size, size);
    for (int r = 0; r < size; ++r)
      std::copy_n(ch.row(r0 + r) + c0, size, win.row(r));
    out.channels.push_back(std::move(win));
  }
  return out;
}

LabelRaster window_labels(const LabelRaster& labels, int r0, int c0, int size) {
  LabelRaster win(size, size);
  for (int r = 0; r < size; ++r) std::copy_n(labels.row(r0 + r) + c0, size, win.row(r));
  return win;
}

}  // namespace

Crop copy_window(const SceneView& view, int r0, int c0, int size) {
  if (!view.labels || !view.features)
    fail(Err::InvalidArgument, "copy_window: features and labels required");
  const LabelRaster& labels = *view.labels;
  if (size < 1 || r0 < 0 || c0 < 0 || r0 + size > labels.height() || c0 + size > labels.width())
    fail(Err::InvalidArgument, "copy_window: window leaves scene " + view.scene_id);
  Crop crop;
  crop.row = r0;
  crop.col = c0;
  crop.size = size;
  crop.features = window_stack(*view.features, r0, c0, size);
  crop.labels = window_labels(labels, r0, c0, size);
  return crop;
}

std::optional<Crop> random_crop(const SceneView& view, const SamplingConfig& cfg,
                                uint64_t step_index) {
  validate_sampling_config(cfg);
  if (cfg.mode != SamplingMode::crop)
    fail(Err::ConfigError, "random_crop: sampling mode must be 'crop'");
  if (!view.labels || !view.features)
    fail(Err::InvalidArgument, "random_crop: features and labels required");
  const LabelRaster& labels = *view.labels;
  int h = labels.height(), w = labels.width(), size = cfg.patch_size;
  if (h < size || w < size)
    fail(Err::SceneTooSmall, "scene " + view.scene_id + " is " + std::to_string(h) + "x" +
                                 std::to_string(w) + ", crop needs " + std::to_string(size));

  RngStream rng(derive_key({cfg.seed, fnv1a(view.scene_id), kCropSalt, step_index}));
  for (int attempt = 0; attempt < 17; ++attempt) {  // first draw + 16 redraws
    int r0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(h - size + 1)));
    int c0 = static_cast<int>(rng.next_below(static_cast<uint64_t>(w - size + 1)));
    uint64_t counts[7];
    kernels::label_histogram_u8(labels.row(r0) + c0, w, size, size, counts);
    uint64_t valid = 0;
    for (int k = 0; k < kNumClasses; ++k) valid += counts[k];
    if (valid == 0) continue;
    Crop crop;
    crop.row = r0;
    crop.col = c0;
    crop.size = size;
    crop.features = window_stack(*view.features, r0, c0, size);
    crop.labels = window_labels(labels, r0, c0, size);
    return crop;
  }
  return std::nullopt;
}

std::optional<Crop> random_crop(const Scene& scene, const LabelRaster& labels,
                                const SamplingConfig& cfg, uint64_t step_index,
                                double land_zone_max) {
  Scene aligned = align_scene(scene, AlignmentPolicy{});
  FeatureStack stack = stack_of_raw_channels(aligned);
  Raster<uint8_t> land = land_mask_at_ref(aligned, land_zone_max);
  SceneView view{scene.scene_id, &stack, &labels, &land};
  return random_crop(view, cfg, step_index);
}

// ---------------------------------------------------------------------------
// augmentation

void flip_vertical(FeatureStack& features, LabelRaster* labels) {
  for (auto& ch : features.channels) {
    for (int r = 0; r < ch.height() / 2; ++r) {
      float* a = ch.row(r);
      float* b = ch.row(ch.height() - 1 - r);
      std::swap_ranges(a, a + ch.width(), b);
    }
  }
  if (labels) {
    for (int r = 0; r < labels->height() / 2; ++r) {
      uint8_t* a = labels->row(r);
      uint8_t* b = labels->row(labels->height() - 1 - r);
      std::swap_ranges(a, a + labels->width(), b);
    }
  }
}

namespace {

// lerp that is exact at the endpoints so integer-coordinate sources pass
// through untouched even next to NaN neighbors
inline float lerp_exact(float a, float b, double t) {
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return static_cast<float>(a + t * (b - a));
}

Raster<float> rotate_channel_bilinear(const Raster<float>& src, double cos_t, double sin_t) {
  int h = src.height(), w = src.width();
  double cy = (h - 1) * 0.5, cx = (w - 1) * 0.5;
  Raster<float> dst(h, w, std::numeric_limits<float>::quiet_NaN());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double dy = r - cy, dx = c - cx;
      double sy = cy - sin_t * dx + cos_t * dy;
      double sx = cx + cos_t * dx + sin_t * dy;
      if (sy < 0.0 || sy > h - 1 || sx < 0.0 || sx > w - 1) continue;  // stays NaN
      int y0 = static_cast<int>(std::floor(sy));
      int x0 = static_cast<int>(std::floor(sx));
      double ty = sy - y0, tx = sx - x0;
      int y1 = ty == 0.0 ? y0 : y0 + 1;
      int x1 = tx == 0.0 ? x0 : x0 + 1;
      float top = lerp_exact(src.at(y0, x0), src.at(y0, x1), tx);
      float bot = lerp_exact(src.at(y1, x0), src.at(y1, x1), tx);
      dst.at(r, c) = lerp_exact(top, bot, ty);
    }
  }
  return dst;
}

LabelRaster rotate_labels_nearest(const LabelRaster& src, double cos_t, double sin_t) {
  int h = src.height(), w = src.width();
  double cy = (h - 1) * 0.5, cx = (w - 1) * 0.5;
  LabelRaster dst(h, w, kIgnoreLabel);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double dy = r - cy, dx = c - cx;
      long sy = std::lround(cy - sin_t * dx + cos_t * dy);
      long sx = std::lround(cx + cos_t * dx + sin_t * dy);
      if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
      dst.at(r, c) = src.at(static_cast<int>(sy), static_cast<int>(sx));
    }
  }
  return dst;
}

}  // namespace

void rotate_about_center(FeatureStack& features, LabelRaster* labels, double angle_deg) {
  if (angle_deg == 0.0) return;
  double t = angle_deg * 0.017453292519943295;
  double cos_t = std::cos(t), sin_t = std::sin(t);
  for (auto& ch : features.channels) ch = rotate_channel_bilinear(ch, cos_t, sin_t);
  if (labels) *labels = rotate_labels_nearest(*labels, cos_t, sin_t);
}

void augment_with(FeatureStack& features, LabelRaster* labels, bool flip, double angle_deg) {
  if (flip) flip_vertical(features, labels);
  rotate_about_center(features, labels, angle_deg);
}

void augment(FeatureStack& features, LabelRaster* labels, const AugmentationConfig& cfg,
             uint64_t rng_key) {
  if (!cfg.enabled) return;
  validate_augmentation_config(cfg);
  // independent sub-keys so toggling one transform never shifts the other's draw
  bool flip = false;
  if (cfg.vertical_flip) flip = RngStream(derive_key({rng_key, 1})).next_bernoulli(0.5);
  double angle = 0.0;
  if (cfg.rotation_max_deg > 0.0)
    angle = RngStream(derive_key({rng_key, 2}))
                .next_uniform(-cfg.rotation_max_deg, cfg.rotation_max_deg);
  augment_with(features, labels, flip, angle);
}

// ---------------------------------------------------------------------------
// dataset build

DatasetSummary summarize_records(const std::vector<PatchRecord>& records) {
  DatasetSummary s;
  s.n_samples = static_cast<long long>(records.size());
  for (const auto& r : records)
    if (r.label < kNumClasses) ++s.class_counts[r.label];
  return s;
}

void save_patch_records(const std::vector<PatchRecord>& records, const std::string& jsonl_path) {
  std::ostringstream out;
  for (const auto& r : records) {
    json j = {{"scene_id", r.scene_id},
              {"row", r.row},
              {"col", r.col},
              {"size", r.size},
              {"label", static_cast<int>(r.label)}};
    out << j.dump() << "\n";
  }
  write_text_file(jsonl_path, out.str());
}

std::vector<PatchRecord> load_patch_records(const std::string& jsonl_path) {
  std::istringstream in(read_text_file(jsonl_path));
  std::vector<PatchRecord> records;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded())
      fail(Err::CorruptPayload,
           jsonl_path + ": line " + std::to_string(line_no) + " is not valid JSON");
    PatchRecord r;
    r.scene_id = j.at("scene_id").get<std::string>();
    r.row = j.at("row").get<int>();
    r.col = j.at("col").get<int>();
    r.size = j.at("size").get<int>();
    r.label = static_cast<uint8_t>(j.at("label").get<int>());
    records.push_back(std::move(r));
  }
  return records;
}

DatasetSummary build_patch_dataset(const DatasetManifest& manifest, const LabelingConfig& label_cfg,
                                   const SamplingConfig& sampling_cfg,
                                   const std::string& out_jsonl, int workers) {
  validate_labeling_config(label_cfg);
  validate_sampling_config(sampling_cfg);
  std::vector<std::vector<PatchRecord>> per_scene(manifest.scenes.size());
  parallel_for(manifest.scenes.size(), workers, [&](size_t i) {
    Scene scene = load_scene(manifest.scenes[i]);
    LabelRaster labels = rasterize_labels(scene, label_cfg);
    per_scene[i] = extract_patches(scene, labels, sampling_cfg, label_cfg.land_zone_max);
  });
  std::vector<PatchRecord> all;
  for (auto& v : per_scene) all.insert(all.end(), v.begin(), v.end());
  save_patch_records(all, out_jsonl);
  return summarize_records(all);
}

}  // namespace icebench
