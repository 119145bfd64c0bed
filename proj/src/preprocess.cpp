#include "icebench/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "icebench/jsonio.hpp"
#include "icebench/kernels.hpp"
#include "icebench/parallel.hpp"
#include "icebench/rng.hpp"

namespace icebench {

const char* align_kernel_name(AlignKernel k) {
  switch (k) {
    case AlignKernel::block_average: return "block_average";
    case AlignKernel::block_max: return "block_max";
    case AlignKernel::nearest_replicate: return "nearest_replicate";
  }
  return "block_average";
}

AlignKernel align_kernel_from_name(const std::string& name) {
  if (name == "block_average") return AlignKernel::block_average;
  if (name == "block_max") return AlignKernel::block_max;
  if (name == "nearest_replicate") return AlignKernel::nearest_replicate;
  fail(Err::ConfigError, "alignment kernel '" + name + "'");
}

AlignKernel AlignmentPolicy::kernel_for(const std::string& channel_name) const {
  auto it = per_channel.find(channel_name);
  if (it != per_channel.end()) return it->second;
  // distance zones are categorical; max keeps land (0) from bleeding outward
  // yet preserves the coarse zone structure everywhere else
  if (channel_name == kDistanceMapChannel) return AlignKernel::block_max;
  return AlignKernel::block_average;
}

std::string AlignmentPolicy::describe() const {
  if (per_channel.empty()) return "default";
  std::ostringstream ss;
  bool first = true;
  for (const auto& [name, k] : per_channel) {
    if (!first) ss << ",";
    ss << name << ":" << align_kernel_name(k);
    first = false;
  }
  return ss.str();
}

// ---------------------------------------------------------------------------
// alignment

namespace {

Raster<float> nearest_map(const Raster<float>& src, int dh, int dw) {
  Raster<float> dst(dh, dw);
  for (int r = 0; r < dh; ++r) {
    int sr = static_cast<int>(static_cast<int64_t>(r) * src.height() / dh);
    const float* srow = src.row(sr);
    float* drow = dst.row(r);
    for (int c = 0; c < dw; ++c) {
      int sc = static_cast<int>(static_cast<int64_t>(c) * src.width() / dw);
      drow[c] = srow[sc];
    }
  }
  return dst;
}

Raster<float> block_reduce(const Raster<float>& src, int bh, int bw, AlignKernel kernel, int dh,
                           int dw) {
  Raster<float> dst(dh, dw);
  if (kernel == AlignKernel::block_max)
    kernels::block_max_f32(src.data(), src.width(), bh, bw, dst.data(), dh, dw);
  else
    kernels::block_mean_f32(src.data(), src.width(), bh, bw, dst.data(), dh, dw);
  return dst;
}

Raster<float> align_channel(const Raster<float>& src, int ref_h, int ref_w, AlignKernel kernel,
                            const std::string& name) {
  int nh = src.height(), nw = src.width();
  if (nh == ref_h && nw == ref_w) return src;
  if (kernel == AlignKernel::nearest_replicate) return nearest_map(src, ref_h, ref_w);
  if (nh <= ref_h && nw <= ref_w) return nearest_map(src, ref_h, ref_w);  // upsample
  if (nh % ref_h == 0 && nw % ref_w == 0)
    return block_reduce(src, nh / ref_h, nw / ref_w, kernel, ref_h, ref_w);
  fail(Err::IncompatibleGrid, "channel " + name + ": native " + std::to_string(nh) + "x" +
                                  std::to_string(nw) + " vs reference " + std::to_string(ref_h) +
                                  "x" + std::to_string(ref_w));
}

}  // namespace

Scene align_scene(const Scene& scene, const AlignmentPolicy& policy) {
  Scene out = scene;
  for (size_t i = 0; i < out.channel_specs.size(); ++i) {
    auto& spec = out.channel_specs[i];
    out.channel_data[i] = align_channel(scene.channel_data[i], scene.height, scene.width,
                                        policy.kernel_for(spec.name), spec.name);
    spec.native_height = scene.height;
    spec.native_width = scene.width;
  }
  return out;
}

// ---------------------------------------------------------------------------
// downscaling

Raster<float> downscale(const Raster<float>& raster, int ratio, AlignKernel kernel) {
  if (ratio < 1) fail(Err::ConfigError, "downscale ratio: must be >= 1");
  if (ratio == 1) return raster;
  int dh = raster.height() / ratio, dw = raster.width() / ratio;
  if (dh == 0 || dw == 0)
    fail(Err::EmptyOutput, "downscale ratio " + std::to_string(ratio) + " empties a " +
                               std::to_string(raster.height()) + "x" +
                               std::to_string(raster.width()) + " raster");
  Raster<float> dst(dh, dw);
  if (kernel == AlignKernel::block_max)
    kernels::block_max_f32(raster.data(), raster.width(), ratio, ratio, dst.data(), dh, dw);
  else
    kernels::block_mean_f32(raster.data(), raster.width(), ratio, ratio, dst.data(), dh, dw);
  return dst;
}

LabelRaster downscale_labels(const LabelRaster& labels, int ratio) {
  if (ratio < 1) fail(Err::ConfigError, "downscale ratio: must be >= 1");
  if (ratio == 1) return labels;
  int dh = labels.height() / ratio, dw = labels.width() / ratio;
  if (dh == 0 || dw == 0) fail(Err::EmptyOutput, "label downscale empties the raster");
  LabelRaster dst(dh, dw);
  for (int i = 0; i < dh; ++i) {
    for (int j = 0; j < dw; ++j) {
      int counts[6] = {0, 0, 0, 0, 0, 0};
      for (int p = 0; p < ratio; ++p) {
        const uint8_t* row = labels.row(i * ratio + p) + static_cast<size_t>(j) * ratio;
        for (int q = 0; q < ratio; ++q)
          if (row[q] < 6) ++counts[row[q]];
      }
      int best = -1, best_count = 0;
      for (int k = 0; k < 6; ++k)
        if (counts[k] > best_count) {  // strict >: ties keep the smaller class
          best_count = counts[k];
          best = k;
        }
      dst.at(i, j) = best < 0 ? kIgnoreLabel : static_cast<uint8_t>(best);
    }
  }
  return dst;
}

Raster<uint8_t> downscale_land(const Raster<uint8_t>& land, int ratio) {
  if (ratio == 1) return land;
  int dh = land.height() / ratio, dw = land.width() / ratio;
  if (dh == 0 || dw == 0) fail(Err::EmptyOutput, "land downscale empties the raster");
  Raster<uint8_t> dst(dh, dw);
  for (int i = 0; i < dh; ++i)
    for (int j = 0; j < dw; ++j) {
      uint8_t all_land = 1;
      for (int p = 0; p < ratio && all_land; ++p) {
        const uint8_t* row = land.row(i * ratio + p) + static_cast<size_t>(j) * ratio;
        for (int q = 0; q < ratio; ++q)
          if (!row[q]) {
            all_land = 0;
            break;
          }
      }
      dst.at(i, j) = all_land;
    }
  return dst;
}

namespace {

Raster<int32_t> downscale_polygon_ids(const Raster<int32_t>& ids, int ratio, int dh, int dw) {
  Raster<int32_t> dst(dh, dw);
  std::map<int32_t, int> counts;
  for (int i = 0; i < dh; ++i)
    for (int j = 0; j < dw; ++j) {
      counts.clear();
      for (int p = 0; p < ratio; ++p) {
        const int32_t* row = ids.row(i * ratio + p) + static_cast<size_t>(j) * ratio;
        for (int q = 0; q < ratio; ++q)
          if (row[q] >= 0) ++counts[row[q]];
      }
      int32_t best = -1;
      int best_count = 0;
      for (const auto& [id, n] : counts)
        if (n > best_count) {  // map iteration is ascending: ties keep smaller id
          best_count = n;
          best = id;
        }
      dst.at(i, j) = best;
    }
  return dst;
}

}  // namespace

Scene downscale_scene(const Scene& aligned, int ratio, const AlignmentPolicy& policy) {
  if (ratio < 1) fail(Err::ConfigError, "downscale ratio: must be >= 1");
  if (ratio == 1) return aligned;
  int dh = aligned.height / ratio, dw = aligned.width / ratio;
  if (dh == 0 || dw == 0) fail(Err::EmptyOutput, "scene downscale empties the reference grid");
  Scene out = aligned;
  out.height = dh;
  out.width = dw;
  for (size_t i = 0; i < out.channel_specs.size(); ++i) {
    auto& spec = out.channel_specs[i];
    if (spec.native_height != aligned.height || spec.native_width != aligned.width)
      fail(Err::IncompatibleGrid, "channel " + spec.name + ": align before downscale");
    out.channel_data[i] = downscale(aligned.channel_data[i], ratio, policy.kernel_for(spec.name));
    spec.native_height = dh;
    spec.native_width = dw;
  }
  out.polygon_raster = downscale_polygon_ids(aligned.polygon_raster, ratio, dh, dw);
  if (aligned.land_mask) out.land_mask = downscale_land(*aligned.land_mask, ratio);
  return out;
}

// ---------------------------------------------------------------------------
// normalization

std::string NormalizationStats::id() const {
  json j;
  for (const auto& [name, st] : channels) j[name] = {{"mean", st.mean}, {"std", st.std}};
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

const ChannelStats& NormalizationStats::require(const std::string& name) const {
  auto it = channels.find(name);
  if (it == channels.end()) fail(Err::MissingStats, "channel " + name);
  return it->second;
}

void save_normalization_stats(const NormalizationStats& stats, const std::string& path) {
  json j;
  json entries;
  for (const auto& [name, st] : stats.channels)
    entries[name] = {{"mean", st.mean}, {"std", st.std}};
  j["channels"] = entries;
  j["id"] = stats.id();
  save_json_file(j, path);
}

NormalizationStats load_normalization_stats(const std::string& path) {
  json j = load_json_file(path);
  NormalizationStats stats;
  for (const auto& [name, st] : j.at("channels").items())
    stats.channels[name] = {st.at("mean").get<double>(), st.at("std").get<double>()};
  return stats;
}

NormalizationStats compute_normalization(const std::vector<Scene>& scenes,
                                         const std::vector<std::string>& channels,
                                         const std::vector<std::string>& allow_constant) {
  if (scenes.empty()) fail(Err::InsufficientScenes, "normalization needs at least one scene");
  NormalizationStats stats;
  for (const auto& name : channels) {
    if (name == kMonthFeature) continue;  // virtual channel, fixed affine
    double sum = 0.0, sum_sq = 0.0;
    long long n = 0;
    for (const auto& scene : scenes) {
      const auto& raster = scene.channel(name);
      auto m = kernels::window_moments_f32(raster.data(), raster.width(), raster.height(),
                                           raster.width());
      sum += m.sum;
      sum_sq += m.sum_sq;
      n += m.finite;
    }
    if (n == 0) fail(Err::DegenerateChannel, "channel " + name + ": no finite pixels in split");
    double mean = sum / static_cast<double>(n);
    double var = sum_sq / static_cast<double>(n) - mean * mean;
    double sd = std::sqrt(std::max(var, 0.0));
    if (sd == 0.0) {
      bool exempt = std::find(allow_constant.begin(), allow_constant.end(), name) !=
                    allow_constant.end();
      if (!exempt)
        fail(Err::DegenerateChannel, "channel " + name + ": constant over training split");
      sd = 1.0;
    }
    stats.channels[name] = {mean, sd};
  }
  return stats;
}

NormalizationStats compute_normalization(const DatasetManifest& train,
                                         const std::vector<std::string>& channels,
                                         const std::vector<std::string>& allow_constant,
                                         int workers) {
  return compute_normalization(load_scenes(train, workers), channels, allow_constant);
}

// ---------------------------------------------------------------------------
// feature stack

int FeatureStack::index_of(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  return -1;
}

const char* land_policy_name(LandPolicy p) {
  return p == LandPolicy::exclude ? "exclude" : "include";
}

LandPolicy land_policy_from_name(const std::string& name) {
  if (name == "include") return LandPolicy::include;
  if (name == "exclude") return LandPolicy::exclude;
  fail(Err::ConfigError, "land policy '" + name + "'");
}

FeatureStack apply_mask_and_normalize(const Scene& aligned, const NormalizationStats& stats,
                                      const std::vector<std::string>& features, LandPolicy policy,
                                      double land_zone_max, LabelRaster* labels) {
  FeatureStack stack;
  stack.height = aligned.height;
  stack.width = aligned.width;
  for (const auto& name : features) {
    if (name == kMonthFeature) {
      stack.names.push_back(name);
      stack.channels.emplace_back(aligned.height, aligned.width,
                                  month_feature_value(aligned.month()));
      continue;
    }
    const auto& src = aligned.channel(name);
    if (src.height() != aligned.height || src.width() != aligned.width)
      fail(Err::IncompatibleGrid, "channel " + name + ": align before normalization");
    const auto& st = stats.require(name);
    if (!(st.std > 0.0))
      fail(Err::DegenerateChannel, "channel " + name + ": stats carry non-positive std");
    Raster<float> out(src.height(), src.width());
    kernels::standardize_f32(src.data(), src.size(), static_cast<float>(st.mean),
                             static_cast<float>(1.0 / st.std), out.data());
    stack.names.push_back(name);
    stack.channels.push_back(std::move(out));
  }

  if (policy == LandPolicy::exclude) {
    Raster<uint8_t> land = land_mask_at_ref(aligned, land_zone_max);
    if (labels && !labels->same_shape(land))
      fail(Err::ShapeMismatch, "labels: dims must match scene grid for land exclusion");
    for (int r = 0; r < aligned.height; ++r) {
      const uint8_t* lrow = land.row(r);
      for (int c = 0; c < aligned.width; ++c) {
        if (!lrow[c]) continue;
        for (auto& ch : stack.channels) ch.at(r, c) = 0.0f;
        if (labels) labels->at(r, c) = kIgnoreLabel;
      }
    }
  }
  return stack;
}

}  // namespace icebench
