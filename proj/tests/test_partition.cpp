#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <vector>

#include "icebench/partition.hpp"
#include "icebench/synthgen.hpp"

using namespace icebench;
namespace fs = std::filesystem;

namespace {

struct Corpus {
  fs::path dir;
  DatasetManifest manifest;
  MeltClimatology clim;
  RegionMap regions;

  ~Corpus() { fs::remove_all(dir); }
};

// Small on-disk corpus with varied dates and locations.
Corpus make_corpus(const std::string& tag, int n_scenes, uint64_t seed) {
  Corpus c;
  c.dir = fs::temp_directory_path() / ("icebench_test_part_" + tag);
  fs::remove_all(c.dir);
  SynthSpec spec = synth_preset("voronoi");
  spec.n_scenes = n_scenes;
  spec.height = 48;
  spec.width = 48;
  spec.channels = {{"sar_primary", 1}};
  spec.n_test = 0;
  spec.seed = seed;
  spec.dates = {"2021-01-15", "2021-04-15", "2021-07-15", "2021-10-15"};
  spec.locations = {"loc_alpha", "loc_beta"};
  SynthOutput out = generate(spec, c.dir.string());
  c.manifest = load_dataset_manifest(out.train_manifest);
  c.clim = load_climatology(out.climatology);
  c.regions = load_region_map(out.regions);
  return c;
}

}  // namespace

TEST_CASE("meteorological season table") {
  CHECK(conventional_season(3) == Season::spring);
  CHECK(conventional_season(5) == Season::spring);
  CHECK(conventional_season(6) == Season::summer);
  CHECK(conventional_season(8) == Season::summer);
  CHECK(conventional_season(9) == Season::fall);
  CHECK(conventional_season(11) == Season::fall);
  CHECK(conventional_season(12) == Season::winter);
  CHECK(conventional_season(1) == Season::winter);
  CHECK(conventional_season(2) == Season::winter);
  for (Season s : {Season::spring, Season::summer, Season::fall, Season::winter})
    CHECK(season_from_name(season_name(s)) == s);
  CHECK_THROWS_AS(season_from_name("monsoon"), Error);
}

TEST_CASE("every month lands in exactly one season") {
  SeasonRule rule = SeasonRule::meteorological();
  int counts[4] = {0, 0, 0, 0};
  for (int m = 1; m <= 12; ++m) counts[static_cast<int>(conventional_season(m, rule))] += 1;
  for (int c : counts) CHECK(c == 3);
}

TEST_CASE("cryo season window is [melt, freeze) with unknown locations undefined") {
  MeltClimatology clim;
  clim.by_location["loc"] = {150, 280};
  CHECK(cryo_season_of("loc", 150, clim) == CryoSeason::melt);
  CHECK(cryo_season_of("loc", 279, clim) == CryoSeason::melt);
  CHECK(cryo_season_of("loc", 280, clim) == CryoSeason::freeze);
  CHECK(cryo_season_of("loc", 149, clim) == CryoSeason::freeze);
  CHECK(cryo_season_of("loc", 1, clim) == CryoSeason::freeze);
  CHECK(cryo_season_of("elsewhere", 200, clim) == CryoSeason::undefined);
  for (CryoSeason s : {CryoSeason::melt, CryoSeason::freeze, CryoSeason::undefined})
    CHECK(cryo_season_from_name(cryo_season_name(s)) == s);
}

TEST_CASE("climatology io validates day-of-year bounds") {
  fs::path p = fs::temp_directory_path() / "icebench_test_clim.json";
  MeltClimatology clim;
  clim.by_location["a"] = {150, 280};
  save_climatology(clim, p.string());
  MeltClimatology back = load_climatology(p.string());
  CHECK(back.by_location.at("a").melt_doy == 150);
  CHECK(back.by_location.at("a").freeze_doy == 280);

  // load is the trust boundary: out-of-range days are rejected there
  MeltClimatology bad;
  bad.by_location["a"] = {0, 280};
  save_climatology(bad, p.string());
  CHECK_THROWS_AS(load_climatology(p.string()), Error);
  bad.by_location["a"] = {150, 367};
  save_climatology(bad, p.string());
  CHECK_THROWS_AS(load_climatology(p.string()), Error);
  fs::remove(p);
}

TEST_CASE("region lookup names unknown locations in the error") {
  RegionMap map;
  map.by_location["loc_alpha"] = Region::East;
  CHECK(region_of("loc_alpha", map) == Region::East);
  CHECK_THROWS_AS(region_of("loc_gamma", map), Error);
  for (Region r : {Region::East, Region::West, Region::CanadianArctic, Region::North})
    CHECK(region_from_name(region_name(r)) == r);
}

TEST_CASE("partition kind names round trip") {
  for (PartitionKind k :
       {PartitionKind::none, PartitionKind::season, PartitionKind::cryo, PartitionKind::region})
    CHECK(partition_kind_from_name(partition_kind_name(k)) == k);
  CHECK_THROWS_AS(partition_kind_from_name("bogus"), Error);
}

TEST_CASE("splits are deterministic, disjoint, and exhaustive") {
  Corpus c = make_corpus("splits", 10, 31);
  HoldoutSpec holdout;
  holdout.fraction = 0.3;

  SplitResult s1 = make_splits(c.manifest, SplitFilters{}, holdout, 17);
  SplitResult s2 = make_splits(c.manifest, SplitFilters{}, holdout, 17);
  CHECK(s1.train.scenes == s2.train.scenes);
  CHECK(s1.validation.scenes == s2.validation.scenes);
  CHECK(s1.train.split == "train");
  CHECK(s1.validation.split == "validation");

  // 10 scenes, fraction 0.3 -> 3 validation
  CHECK(s1.validation.scenes.size() == 3);
  CHECK(s1.train.scenes.size() == 7);

  std::set<std::string> train_set(s1.train.scenes.begin(), s1.train.scenes.end());
  std::set<std::string> val_set(s1.validation.scenes.begin(), s1.validation.scenes.end());
  for (const std::string& s : val_set) CHECK(!train_set.count(s));
  std::set<std::string> all(c.manifest.scenes.begin(), c.manifest.scenes.end());
  std::set<std::string> got = train_set;
  got.insert(val_set.begin(), val_set.end());
  CHECK(got == all);

  // both halves preserve manifest order
  auto in_manifest_order = [&](const std::vector<std::string>& part) {
    std::vector<size_t> pos;
    for (const std::string& s : part)
      pos.push_back(std::find(c.manifest.scenes.begin(), c.manifest.scenes.end(), s) -
                    c.manifest.scenes.begin());
    return std::is_sorted(pos.begin(), pos.end());
  };
  CHECK(in_manifest_order(s1.train.scenes));
  CHECK(in_manifest_order(s1.validation.scenes));

  SplitResult other = make_splits(c.manifest, SplitFilters{}, holdout, 18);
  CHECK(other.validation.scenes != s1.validation.scenes);  // seed actually matters
}

TEST_CASE("holdout spec validation") {
  Corpus c = make_corpus("holdout", 6, 32);
  HoldoutSpec none;
  CHECK_THROWS_AS(make_splits(c.manifest, SplitFilters{}, none, 1), Error);

  HoldoutSpec both;
  both.fixed_count = 1;
  both.fraction = 0.5;
  CHECK_THROWS_AS(make_splits(c.manifest, SplitFilters{}, both, 1), Error);

  HoldoutSpec fixed;
  fixed.fixed_count = 2;
  SplitResult s = make_splits(c.manifest, SplitFilters{}, fixed, 1);
  CHECK(s.validation.scenes.size() == 2);

  fixed.fixed_count = 6;  // no train side left
  CHECK_THROWS_AS(make_splits(c.manifest, SplitFilters{}, fixed, 1), Error);

  HoldoutSpec tiny;
  tiny.fraction = 1e-9;  // clamps to one validation scene
  CHECK(make_splits(c.manifest, SplitFilters{}, tiny, 1).validation.scenes.size() == 1);
}

TEST_CASE("season filter keeps only matching scenes") {
  Corpus c = make_corpus("filter", 12, 33);
  auto metas = load_scene_metas(c.manifest);

  HoldoutSpec holdout;
  holdout.fixed_count = 1;
  SplitFilters filters;
  filters.season = Season::winter;
  SplitResult s = make_splits(c.manifest, filters, holdout, 3);

  std::set<std::string> kept(s.train.scenes.begin(), s.train.scenes.end());
  kept.insert(s.validation.scenes.begin(), s.validation.scenes.end());
  for (const auto& meta : metas) {
    bool is_winter = conventional_season(meta.date.month) == Season::winter;
    CHECK(kept.count(meta.path) == static_cast<size_t>(is_winter));
  }
  CHECK(!kept.empty());
}

TEST_CASE("cryo and region filters need their tables") {
  Corpus c = make_corpus("tables", 8, 34);
  HoldoutSpec holdout;
  holdout.fixed_count = 1;

  SplitFilters cryo_f;
  cryo_f.cryo = CryoSeason::melt;
  CHECK_THROWS_AS(make_splits(c.manifest, cryo_f, holdout, 1), Error);
  SplitResult cs = make_splits(c.manifest, cryo_f, holdout, 1, &c.clim);
  CHECK(!cs.train.scenes.empty());

  SplitFilters reg_f;
  reg_f.region = Region::East;
  CHECK_THROWS_AS(make_splits(c.manifest, reg_f, holdout, 1), Error);
  (void)make_splits(c.manifest, reg_f, holdout, 1, nullptr, &c.regions);
}

TEST_CASE("too few filtered scenes is a structured error") {
  Corpus c = make_corpus("few", 4, 35);
  DatasetManifest one;
  one.split = "train";
  one.scenes = {c.manifest.scenes[0]};
  HoldoutSpec holdout;
  holdout.fraction = 0.5;
  try {
    make_splits(one, SplitFilters{}, holdout, 1);
    FAIL("expected InsufficientScenes");
  } catch (const Error& e) {
    CHECK(e.code() == Err::InsufficientScenes);
  }
}

TEST_CASE("class distribution rows partition the pixels and sum to one") {
  Corpus c = make_corpus("dist", 8, 36);
  LabelingConfig label_cfg;

  ClassDistribution none =
      class_distribution(c.manifest, label_cfg, Granularity::pixel, PartitionKind::none);
  REQUIRE(none.rows.size() == 1);
  double total_pixels = static_cast<double>(none.rows[0].total);
  CHECK(total_pixels > 0);

  ClassDistribution by_season = class_distribution(c.manifest, label_cfg, Granularity::pixel,
                                                   PartitionKind::season);
  double season_total = 0.0;
  for (const auto& row : by_season.rows) {
    double sum = 0.0;
    for (double f : row.fractions) sum += f;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    season_total += static_cast<double>(row.total);
    CHECK(std::set<std::string>{"spring", "summer", "fall", "winter"}.count(row.key));
  }
  CHECK(season_total == total_pixels);  // disjoint and exhaustive

  // keys are sorted and unique
  std::vector<std::string> keys;
  for (const auto& row : by_season.rows) keys.push_back(row.key);
  CHECK(std::is_sorted(keys.begin(), keys.end()));
  CHECK(std::set<std::string>(keys.begin(), keys.end()).size() == keys.size());
}

TEST_CASE("patch-granularity distribution counts accepted patches") {
  Corpus c = make_corpus("patchdist", 6, 37);
  SamplingConfig patch_cfg;
  patch_cfg.patch_size = 16;
  patch_cfg.stride = 16;
  patch_cfg.purity = 0.8;

  ClassDistribution d =
      class_distribution(c.manifest, LabelingConfig{}, Granularity::patch, PartitionKind::none,
                         nullptr, nullptr, &patch_cfg, 2);
  REQUIRE(d.rows.size() == 1);
  CHECK(d.rows[0].total > 0);
  double sum = 0.0;
  for (double f : d.rows[0].fractions) sum += f;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("cryo distribution splits by melt window and skips unknown locations") {
  Corpus c = make_corpus("cryodist", 8, 38);
  ClassDistribution d = class_distribution(c.manifest, LabelingConfig{}, Granularity::pixel,
                                           PartitionKind::cryo, &c.clim);
  CHECK(!d.rows.empty());
  for (const auto& row : d.rows)
    CHECK(std::set<std::string>{"melt", "freeze", "undefined"}.count(row.key));
}

TEST_CASE("scene meta loads cheap header fields") {
  Corpus c = make_corpus("meta", 3, 39);
  SceneMeta meta = load_scene_meta(c.manifest.scenes[0]);
  CHECK(!meta.scene_id.empty());
  CHECK(!meta.location_id.empty());
  CHECK(meta.date.year == 2021);
  CHECK(meta.path == c.manifest.scenes[0]);
}
