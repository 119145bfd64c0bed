#include "icebench/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "icebench/chart_labels.hpp"
#include "icebench/partition.hpp"
#include "icebench/rng.hpp"

namespace icebench {

namespace {

// One representative SIGRID stage-of-development code per ice class; open
// water is charted through a zero total concentration instead.
int code_of_class(int cls) {
  switch (cls) {
    case 1: return 81;
    case 2: return 83;
    case 3: return 87;
    case 4: return 91;
    case 5: return 95;
    default: return 80;
  }
}

std::vector<SynthChannel> default_channels() {
  return {{"sar_primary", 1}, {"sar_secondary", 1}, {"btemp_low", 8}, {"btemp_high", 8}};
}

std::vector<std::string> default_locations() {
  return {"loc_alpha", "loc_beta", "loc_gamma", "loc_delta"};
}

std::vector<std::string> default_dates() {
  return {"2021-01-15", "2021-04-15", "2021-07-15", "2021-10-15"};
}

void fill_defaults(SynthSpec& spec) {
  if (spec.channels.empty()) spec.channels = default_channels();
  if (spec.locations.empty()) spec.locations = default_locations();
  if (spec.dates.empty()) spec.dates = default_dates();
  if (spec.classes.empty()) spec.classes = {0, 1, 2, 3, 4, 5};
}

// mean(class, channel); the default palette keeps every class pair at least
// `separation` apart in every channel.
double palette_mean(const SynthSpec& spec, int cls, int channel) {
  if (spec.preset == "single_informative")
    return channel == 0 ? spec.separation * cls : 0.0;
  return spec.separation * ((cls + channel) % kNumClasses);
}

}  // namespace

SynthSpec synth_preset(const std::string& name) {
  SynthSpec spec;
  spec.preset = name;
  if (name == "voronoi") {
  } else if (name == "separable") {
    spec.n_polygons = 1;
    spec.land_rows = 0;
  } else if (name == "ambiguous") {
    spec.ambiguous_fraction = 1.0;
  } else if (name == "checkerboard") {
    spec.classes = {0, 4};
    spec.n_polygons = 2;
  } else if (name == "single_informative") {
    spec.n_polygons = 1;
  } else {
    fail(Err::ConfigError, "unknown synth preset '" + name + "'");
  }
  fill_defaults(spec);
  return spec;
}

void validate_synth_spec(const SynthSpec& spec) {
  if (spec.n_scenes < 1) fail(Err::ConfigError, "n_scenes must be positive");
  if (spec.height < 8 || spec.width < 8) fail(Err::ConfigError, "scene dims too small");
  if (spec.n_polygons < 1) fail(Err::ConfigError, "n_polygons must be positive");
  if (spec.land_rows < 0 || spec.land_rows >= spec.height)
    fail(Err::ConfigError, "land_rows must leave sea pixels");
  if (spec.checker_block < 1) fail(Err::ConfigError, "checker_block must be positive");
  if (spec.n_test < 0 || spec.n_test >= spec.n_scenes)
    fail(Err::ConfigError, "n_test must leave training scenes");
  if (!(spec.noise_std > 0.0)) fail(Err::ConfigError, "noise_std must be positive");
  if (spec.ambiguous_fraction < 0.0 || spec.ambiguous_fraction > 1.0 ||
      spec.unknown_code_fraction < 0.0 || spec.unknown_code_fraction > 1.0)
    fail(Err::ConfigError, "chart fractions must lie in [0, 1]");
  for (int cls : spec.classes)
    if (cls < 0 || cls >= kNumClasses) fail(Err::ConfigError, "class id out of range");
  for (const SynthChannel& ch : spec.channels) {
    if (ch.divisor < 1) fail(Err::ConfigError, "channel divisor must be positive");
    if (spec.height % ch.divisor != 0 || spec.width % ch.divisor != 0)
      fail(Err::ConfigError, "channel '" + ch.name + "' divisor must divide the scene dims");
    if (ch.name == kDistanceMapChannel)
      fail(Err::ConfigError, "the distance map channel is added by with_distance_map");
  }
}

SynthSpec synth_spec_from_json(const json& j) {
  SynthSpec spec;
  if (j.contains("preset")) spec = synth_preset(j.at("preset").get<std::string>());
  if (j.contains("n_scenes")) spec.n_scenes = j.at("n_scenes").get<int>();
  if (j.contains("height")) spec.height = j.at("height").get<int>();
  if (j.contains("width")) spec.width = j.at("width").get<int>();
  if (j.contains("n_polygons")) spec.n_polygons = j.at("n_polygons").get<int>();
  if (j.contains("channels")) {
    spec.channels.clear();
    for (const json& c : j.at("channels"))
      spec.channels.push_back(
          {c.at("name").get<std::string>(), c.value("divisor", 1)});
  }
  if (j.contains("with_distance_map"))
    spec.with_distance_map = j.at("with_distance_map").get<bool>();
  if (j.contains("land_rows")) spec.land_rows = j.at("land_rows").get<int>();
  if (j.contains("explicit_land_mask"))
    spec.explicit_land_mask = j.at("explicit_land_mask").get<bool>();
  if (j.contains("classes")) spec.classes = j.at("classes").get<std::vector<int>>();
  if (j.contains("separation")) spec.separation = j.at("separation").get<double>();
  if (j.contains("noise_std")) spec.noise_std = j.at("noise_std").get<double>();
  if (j.contains("ambiguous_fraction"))
    spec.ambiguous_fraction = j.at("ambiguous_fraction").get<double>();
  if (j.contains("unknown_code_fraction"))
    spec.unknown_code_fraction = j.at("unknown_code_fraction").get<double>();
  if (j.contains("checker_block")) spec.checker_block = j.at("checker_block").get<int>();
  if (j.contains("locations")) spec.locations = j.at("locations").get<std::vector<std::string>>();
  if (j.contains("dates")) spec.dates = j.at("dates").get<std::vector<std::string>>();
  if (j.contains("n_test")) spec.n_test = j.at("n_test").get<int>();
  if (j.contains("seed")) spec.seed = j.at("seed").get<uint64_t>();
  fill_defaults(spec);
  validate_synth_spec(spec);
  return spec;
}

json synth_spec_to_json(const SynthSpec& spec) {
  json channels = json::array();
  for (const SynthChannel& ch : spec.channels)
    channels.push_back({{"name", ch.name}, {"divisor", ch.divisor}});
  return json{{"preset", spec.preset},
              {"n_scenes", spec.n_scenes},
              {"height", spec.height},
              {"width", spec.width},
              {"n_polygons", spec.n_polygons},
              {"channels", channels},
              {"with_distance_map", spec.with_distance_map},
              {"land_rows", spec.land_rows},
              {"explicit_land_mask", spec.explicit_land_mask},
              {"classes", spec.classes},
              {"separation", spec.separation},
              {"noise_std", spec.noise_std},
              {"ambiguous_fraction", spec.ambiguous_fraction},
              {"unknown_code_fraction", spec.unknown_code_fraction},
              {"checker_block", spec.checker_block},
              {"locations", spec.locations},
              {"dates", spec.dates},
              {"n_test", spec.n_test},
              {"seed", spec.seed}};
}

namespace {

struct PolygonPlan {
  int cls = 0;
  bool ambiguous = false;
  bool unknown_code = false;
};

Raster<int32_t> polygon_partition(const SynthSpec& spec, int index, int* n_polygons_out) {
  const int h = spec.height, w = spec.width;
  Raster<int32_t> raster(h, w, 0);
  int n = spec.n_polygons;
  if (spec.preset == "checkerboard") {
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        raster.at(r, c) = ((r / spec.checker_block) + (c / spec.checker_block)) % 2;
    n = 2;
  } else if (n > 1) {
    // Voronoi cells around keyed seed points; ties go to the smaller index.
    RngStream rng(derive_key({spec.seed, static_cast<uint64_t>(index), fnv1a("voronoi")}));
    std::vector<std::pair<int, int>> seeds(n);
    for (auto& s : seeds) {
      s.first = static_cast<int>(rng.next_below(static_cast<uint64_t>(h)));
      s.second = static_cast<int>(rng.next_below(static_cast<uint64_t>(w)));
    }
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        long long best = -1;
        int best_id = 0;
        for (int p = 0; p < n; ++p) {
          const long long dr = r - seeds[p].first, dc = c - seeds[p].second;
          const long long d2 = dr * dr + dc * dc;
          if (best < 0 || d2 < best) {
            best = d2;
            best_id = p;
          }
        }
        raster.at(r, c) = best_id;
      }
    }
  }
  // Land strip is uncharted.
  for (int r = 0; r < spec.land_rows; ++r)
    for (int c = 0; c < w; ++c) raster.at(r, c) = -1;
  *n_polygons_out = n;
  return raster;
}

std::vector<PolygonPlan> plan_polygons(const SynthSpec& spec, int index, int n) {
  std::vector<PolygonPlan> plans(n);
  RngStream rng(derive_key({spec.seed, static_cast<uint64_t>(index), fnv1a("charts")}));
  for (int p = 0; p < n; ++p) {
    if (spec.preset == "separable" || spec.preset == "single_informative") {
      plans[p].cls = spec.classes[(static_cast<size_t>(index) + p) % spec.classes.size()];
    } else if (spec.preset == "checkerboard") {
      plans[p].cls = spec.classes[p % spec.classes.size()];
    } else {
      plans[p].cls =
          spec.classes[rng.next_below(static_cast<uint64_t>(spec.classes.size()))];
    }
    plans[p].ambiguous = rng.next_bernoulli(spec.ambiguous_fraction);
    plans[p].unknown_code = rng.next_bernoulli(spec.unknown_code_fraction);
  }
  return plans;
}

IceChartPolygon chart_of(const PolygonPlan& plan, int id) {
  IceChartPolygon poly;
  poly.id = id;
  if (plan.ambiguous) {
    // Two equal partials: no dominant stage, labeling must abstain.
    poly.total_sic = 100.0;
    poly.partials = {{code_of_class(1), 50.0}, {code_of_class(4), 50.0}};
    return poly;
  }
  if (plan.unknown_code) {
    poly.total_sic = 90.0;
    poly.partials = {{3, 80.0}, {code_of_class(1), 10.0}};  // 3 maps to no class
    return poly;
  }
  if (plan.cls == 0) {
    poly.total_sic = 0.0;  // open water by concentration cutoff
    return poly;
  }
  const int other = plan.cls == 1 ? 2 : 1;
  poly.total_sic = 90.0;
  poly.partials = {{code_of_class(plan.cls), 80.0}, {code_of_class(other), 10.0}};
  return poly;
}

}  // namespace

Scene synth_scene(const SynthSpec& spec, int index) {
  validate_synth_spec(spec);
  if (index < 0 || index >= spec.n_scenes) fail(Err::InvalidArgument, "scene index out of range");

  Scene scene;
  char id[32];
  std::snprintf(id, sizeof(id), "synth_%04d", index);
  scene.scene_id = id;
  scene.location_id = spec.locations[index % spec.locations.size()];
  scene.acquisition_date = spec.dates[index % spec.dates.size()];
  scene.height = spec.height;
  scene.width = spec.width;

  int n_polygons = 0;
  scene.polygon_raster = polygon_partition(spec, index, &n_polygons);
  std::vector<PolygonPlan> plans = plan_polygons(spec, index, n_polygons);
  for (int p = 0; p < n_polygons; ++p) scene.polygons.push_back(chart_of(plans[p], p));

  for (size_t ci = 0; ci < spec.channels.size(); ++ci) {
    const SynthChannel& ch = spec.channels[ci];
    const int nh = spec.height / ch.divisor, nw = spec.width / ch.divisor;
    ChannelSpec cs;
    cs.name = ch.name;
    cs.native_height = nh;
    cs.native_width = nw;
    cs.file = ch.name + ".f32";
    Raster<float> data(nh, nw);
    RngStream rng(derive_key({spec.seed, static_cast<uint64_t>(index), fnv1a(ch.name)}));
    for (int r = 0; r < nh; ++r) {
      for (int c = 0; c < nw; ++c) {
        const int32_t poly = scene.polygon_raster.at(r * ch.divisor, c * ch.divisor);
        const double noise = rng.next_normal() * spec.noise_std;
        if (poly < 0) {
          data.at(r, c) = static_cast<float>(-3.0 + 0.5 * noise);  // land texture
        } else {
          data.at(r, c) =
              static_cast<float>(palette_mean(spec, plans[poly].cls, static_cast<int>(ci)) + noise);
        }
      }
    }
    scene.channel_specs.push_back(cs);
    scene.channel_data.push_back(std::move(data));
  }

  if (spec.with_distance_map) {
    ChannelSpec cs;
    cs.name = kDistanceMapChannel;
    cs.native_height = spec.height;
    cs.native_width = spec.width;
    cs.file = std::string(kDistanceMapChannel) + ".f32";
    Raster<float> dist(spec.height, spec.width);
    for (int r = 0; r < spec.height; ++r) {
      // Zone index grows with distance from the land strip; zone 0 is land.
      float zone = spec.land_rows > 0
                       ? static_cast<float>(std::min(50, std::max(0, r - spec.land_rows + 1)))
                       : 50.0f;
      for (int c = 0; c < spec.width; ++c) dist.at(r, c) = zone;
    }
    scene.channel_specs.push_back(cs);
    scene.channel_data.push_back(std::move(dist));
  }

  if (spec.explicit_land_mask) {
    Raster<uint8_t> mask(spec.height, spec.width, 0);
    for (int r = 0; r < spec.land_rows; ++r)
      for (int c = 0; c < spec.width; ++c) mask.at(r, c) = 1;
    scene.land_mask = std::move(mask);
  }

  validate_scene(scene);
  return scene;
}

namespace {

SynthOutput write_corpus(const SynthSpec& spec, const std::string& out_dir,
                         const std::vector<Scene>& scenes, const std::vector<char>& is_test) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "scenes");

  SynthOutput out;
  DatasetManifest train, test;
  train.split = "train";
  test.split = "test";
  for (size_t i = 0; i < scenes.size(); ++i) {
    const fs::path dir = fs::path(out_dir) / "scenes" / scenes[i].scene_id;
    write_scene(scenes[i], dir.string());
    out.scene_dirs.push_back(dir.string());
    const std::string rel = "scenes/" + scenes[i].scene_id;
    (is_test[i] ? test : train).scenes.push_back(rel);
  }

  out.train_manifest = (fs::path(out_dir) / "train_manifest.json").string();
  out.test_manifest = (fs::path(out_dir) / "test_manifest.json").string();
  save_dataset_manifest(train, out.train_manifest);
  save_dataset_manifest(test, out.test_manifest);

  MeltClimatology clim;
  for (const std::string& loc : spec.locations) clim.by_location[loc] = {150, 280};
  out.climatology = (fs::path(out_dir) / "climatology.json").string();
  save_climatology(clim, out.climatology);

  RegionMap regions;
  const Region wheel[] = {Region::East, Region::West, Region::CanadianArctic, Region::North};
  for (size_t i = 0; i < spec.locations.size(); ++i)
    regions.by_location[spec.locations[i]] = wheel[i % 4];
  out.regions = (fs::path(out_dir) / "regions.json").string();
  save_region_map(regions, out.regions);
  return out;
}

}  // namespace

SynthOutput generate(const SynthSpec& spec, const std::string& out_dir) {
  validate_synth_spec(spec);
  std::vector<Scene> scenes;
  scenes.reserve(spec.n_scenes);
  for (int i = 0; i < spec.n_scenes; ++i) scenes.push_back(synth_scene(spec, i));
  std::vector<char> is_test(spec.n_scenes, 0);
  for (int i = spec.n_scenes - spec.n_test; i < spec.n_scenes; ++i) is_test[i] = 1;
  return write_corpus(spec, out_dir, scenes, is_test);
}

SynthOutput generate_paired_shift(const SynthSpec& spec, const std::string& axis,
                                  const std::string& out_dir) {
  validate_synth_spec(spec);
  if (axis != "season" && axis != "region")
    fail(Err::ConfigError, "paired shift axis must be 'season' or 'region'");
  if (spec.n_scenes < 4) fail(Err::ConfigError, "paired shift needs at least 4 scenes");

  // Pool A: first half, classes {0, 4}. Pool B: second half, classes {1, 2}.
  // The axis key separates the pools; the class priors are disjoint, so
  // on-axis transfer outperforms cross-axis transfer by construction.
  const int half = spec.n_scenes / 2;
  std::vector<Scene> scenes;
  std::vector<char> is_test(spec.n_scenes, 0);
  for (int i = 0; i < spec.n_scenes; ++i) {
    const bool pool_a = i < half;
    SynthSpec part = spec;
    part.classes = pool_a ? std::vector<int>{0, 4} : std::vector<int>{1, 2};
    if (axis == "season") {
      part.dates = pool_a ? std::vector<std::string>{"2021-07-15"}
                          : std::vector<std::string>{"2021-01-15"};
    } else {
      part.locations = pool_a ? std::vector<std::string>{"loc_alpha"}
                              : std::vector<std::string>{"loc_beta"};
    }
    scenes.push_back(synth_scene(part, i));
    // Trailing quarter of each pool is held out for testing.
    const int pool_size = pool_a ? half : spec.n_scenes - half;
    const int pos = pool_a ? i : i - half;
    if (pos >= pool_size - std::max(1, pool_size / 4)) is_test[i] = 1;
  }

  SynthSpec merged = spec;
  if (axis == "region") merged.locations = {"loc_alpha", "loc_beta"};
  return write_corpus(merged, out_dir, scenes, is_test);
}

}  // namespace icebench
