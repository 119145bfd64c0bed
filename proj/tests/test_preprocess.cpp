#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "icebench/preprocess.hpp"
#include "icebench/rng.hpp"
#include "icebench/scene.hpp"
#include "oracles.hpp"

using namespace icebench;
namespace fs = std::filesystem;

namespace {

constexpr float kNaN = std::numeric_limits<float>::quiet_NaN();

Scene grid_scene(int h, int w) {
  Scene s;
  s.scene_id = "p01";
  s.location_id = "loc";
  s.acquisition_date = "2021-08-20";
  s.height = h;
  s.width = w;
  s.polygon_raster = Raster<int32_t>(h, w, 0);
  s.polygons.push_back({0, 90.0, {{95, 85.0}}});
  return s;
}

void add_channel(Scene& s, const std::string& name, Raster<float> data) {
  s.channel_specs.push_back(
      {name, data.height(), data.width(), "f32", name + ".f32"});
  s.channel_data.push_back(std::move(data));
}

}  // namespace

TEST_CASE("alignment upsamples coarse channels by nearest replication") {
  Scene s = grid_scene(4, 4);
  Raster<float> coarse(2, 2);
  coarse.at(0, 0) = 1.0f;
  coarse.at(0, 1) = 2.0f;
  coarse.at(1, 0) = 3.0f;
  coarse.at(1, 1) = 4.0f;
  add_channel(s, "btemp", coarse);

  Scene a = align_scene(s, AlignmentPolicy{});
  const Raster<float>& ch = a.channel("btemp");
  REQUIRE(ch.height() == 4);
  CHECK(ch.at(0, 0) == 1.0f);
  CHECK(ch.at(0, 1) == 1.0f);
  CHECK(ch.at(1, 1) == 1.0f);
  CHECK(ch.at(0, 2) == 2.0f);
  CHECK(ch.at(2, 0) == 3.0f);
  CHECK(ch.at(3, 3) == 4.0f);
  CHECK(a.channel_spec("btemp").native_height == 4);  // spec follows the data

  // aligning twice is a no-op
  Scene b = align_scene(a, AlignmentPolicy{});
  CHECK(b.channel("btemp") == ch);
}

TEST_CASE("alignment reduces finer-than-reference channels with the assigned kernel") {
  Scene s = grid_scene(2, 2);
  Raster<float> fine(4, 4);
  for (int i = 0; i < 16; ++i) fine.data()[i] = static_cast<float>(i);
  add_channel(s, "sar", fine);

  SUBCASE("default block average") {
    Scene a = align_scene(s, AlignmentPolicy{});
    CHECK(a.channel("sar").at(0, 0) == doctest::Approx((0 + 1 + 4 + 5) / 4.0));
    CHECK(a.channel("sar").at(1, 1) == doctest::Approx((10 + 11 + 14 + 15) / 4.0));
  }
  SUBCASE("block max by policy") {
    AlignmentPolicy p;
    p.per_channel["sar"] = AlignKernel::block_max;
    Scene a = align_scene(s, p);
    CHECK(a.channel("sar").at(0, 0) == 5.0f);
    CHECK(a.channel("sar").at(1, 1) == 15.0f);
  }
}

TEST_CASE("downscale ratio 1 is identity bit-exactly") {
  auto r = oracle::random_raster(13, 17, derive_key({400}), 0.1);
  Raster<float> out = downscale(r, 1, AlignKernel::block_average);
  REQUIRE(out.same_shape(r));
  // memcmp, not ==: the payload carries NaN which breaks float equality
  CHECK(std::memcmp(out.data(), r.data(), r.size() * sizeof(float)) == 0);
}

TEST_CASE("block-average downscale preserves the covered-region mean") {
  for (int trial = 0; trial < 25; ++trial) {
    for (int ratio : {2, 5}) {
      int dh = 3 + static_cast<int>(trial % 5);
      int dw = 4 + static_cast<int>(trial % 3);
      auto src = oracle::random_raster(dh * ratio, dw * ratio,
                                       derive_key({401, static_cast<uint64_t>(trial),
                                                   static_cast<uint64_t>(ratio)}));
      Raster<float> out = downscale(src, ratio, AlignKernel::block_average);
      REQUIRE(out.height() == dh);
      REQUIRE(out.width() == dw);
      // equal block sizes: mean of block means == global mean
      CHECK(oracle::raster_mean_brute(out) ==
            doctest::Approx(oracle::raster_mean_brute(src)).epsilon(1e-6));
    }
  }
}

TEST_CASE("downscale drops the uncovered remainder rows and columns") {
  Raster<float> r(5, 5, 1.0f);
  for (int c = 0; c < 5; ++c) r.at(4, c) = 100.0f;  // remainder row must not leak
  r.at(0, 4) = 100.0f;                              // remainder column either
  Raster<float> out = downscale(r, 2, AlignKernel::block_average);
  REQUIRE(out.height() == 2);
  REQUIRE(out.width() == 2);
  for (float v : out.storage()) CHECK(v == 1.0f);

  Raster<float> tiny(1, 1, 1.0f);
  CHECK_THROWS_AS(downscale(tiny, 2, AlignKernel::block_average), Error);
}

TEST_CASE("label downscale takes the per-block majority, ties to smaller class") {
  LabelRaster labels(4, 4, 0);
  // block (0,0): {0,0,1,1} -> tie -> 0; block (0,1): {2,2,2,255} -> 2
  labels.at(0, 0) = 0;
  labels.at(0, 1) = 0;
  labels.at(1, 0) = 1;
  labels.at(1, 1) = 1;
  labels.at(0, 2) = 2;
  labels.at(0, 3) = 2;
  labels.at(1, 2) = 2;
  labels.at(1, 3) = kIgnoreLabel;
  // block (1,0): all ignore -> 255; block (1,1): {5,4,4,5} tie -> 4
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 2; ++c) labels.at(r, c) = kIgnoreLabel;
  labels.at(2, 2) = 5;
  labels.at(2, 3) = 4;
  labels.at(3, 2) = 4;
  labels.at(3, 3) = 5;

  LabelRaster out = downscale_labels(labels, 2);
  REQUIRE(out.height() == 2);
  CHECK(out.at(0, 0) == 0);
  CHECK(out.at(0, 1) == 2);
  CHECK(out.at(1, 0) == kIgnoreLabel);
  CHECK(out.at(1, 1) == 4);
}

TEST_CASE("land downscale keeps land only when the whole block is land") {
  Raster<uint8_t> land(2, 4, 1);
  land.at(0, 2) = 0;  // block (0,1) has one sea pixel
  Raster<uint8_t> out = downscale_land(land, 2);
  CHECK(out.at(0, 0) == 1);
  CHECK(out.at(0, 1) == 0);
}

TEST_CASE("scene downscale reduces polygon ids by majority and keeps charts") {
  Scene s = grid_scene(4, 4);
  add_channel(s, "sar", Raster<float>(4, 4, 2.0f));
  s.polygons.push_back({1, 0.0, {}});
  // block (0,0) majority id 0; block (0,1): {0,1,1,-1} -> 1; block (1,0) all -1
  s.polygon_raster.at(0, 3) = 1;
  s.polygon_raster.at(1, 2) = 1;
  s.polygon_raster.at(1, 3) = -1;
  for (int r = 2; r < 4; ++r)
    for (int c = 0; c < 2; ++c) s.polygon_raster.at(r, c) = -1;

  Scene out = downscale_scene(align_scene(s, AlignmentPolicy{}), 2, AlignmentPolicy{});
  CHECK(out.height == 2);
  CHECK(out.width == 2);
  CHECK(out.polygon_raster.at(0, 0) == 0);
  CHECK(out.polygon_raster.at(0, 1) == 1);
  CHECK(out.polygon_raster.at(1, 0) == -1);
  CHECK(out.polygons.size() == 2);
  CHECK(out.channel("sar").at(0, 0) == 2.0f);
}

TEST_CASE("normalization stats: finite pixels only, manifest order independent of shape") {
  Scene a = grid_scene(2, 2);
  Raster<float> ch(2, 2);
  ch.at(0, 0) = 1.0f;
  ch.at(0, 1) = 3.0f;
  ch.at(1, 0) = kNaN;
  ch.at(1, 1) = 5.0f;
  add_channel(a, "sar", ch);

  Scene b = grid_scene(2, 2);
  b.scene_id = "p02";
  add_channel(b, "sar", Raster<float>(2, 2, 7.0f));

  NormalizationStats stats = compute_normalization(std::vector<Scene>{a, b}, {"sar"});
  // finite values: 1,3,5,7,7,7,7 -> mean 37/7
  double mean = 37.0 / 7.0;
  double var = ((1 - mean) * (1 - mean) + (3 - mean) * (3 - mean) + (5 - mean) * (5 - mean) +
                4 * (7 - mean) * (7 - mean)) /
               7.0;
  CHECK(stats.require("sar").mean == doctest::Approx(mean));
  CHECK(stats.require("sar").std == doctest::Approx(std::sqrt(var)));
  CHECK_THROWS_AS(stats.require("absent"), Error);
}

TEST_CASE("constant channels error unless explicitly allowed") {
  Scene s = grid_scene(2, 2);
  add_channel(s, "flat", Raster<float>(2, 2, 4.0f));
  CHECK_THROWS_AS(compute_normalization(std::vector<Scene>{s}, {"flat"}), Error);
  NormalizationStats stats = compute_normalization(std::vector<Scene>{s}, {"flat"}, {"flat"});
  CHECK(stats.require("flat").std == 1.0);
  CHECK(stats.require("flat").mean == 4.0);
}

TEST_CASE("normalization stats round trip with stable id") {
  NormalizationStats stats;
  stats.channels["sar"] = {1.5, 2.0};
  stats.channels["btemp"] = {-3.0, 0.5};
  fs::path p = fs::temp_directory_path() / "icebench_test_stats.json";
  save_normalization_stats(stats, p.string());
  NormalizationStats back = load_normalization_stats(p.string());
  CHECK(back.require("sar").mean == 1.5);
  CHECK(back.require("btemp").std == 0.5);
  CHECK(back.id() == stats.id());
  fs::remove(p);
}

TEST_CASE("apply_mask_and_normalize standardizes and materializes the month feature") {
  Scene s = grid_scene(2, 2);  // august scene
  Raster<float> ch(2, 2);
  ch.at(0, 0) = 2.0f;
  ch.at(0, 1) = 4.0f;
  ch.at(1, 0) = 6.0f;
  ch.at(1, 1) = kNaN;
  add_channel(s, "sar", ch);

  NormalizationStats stats;
  stats.channels["sar"] = {4.0, 2.0};

  FeatureStack stack = apply_mask_and_normalize(align_scene(s, AlignmentPolicy{}), stats,
                                                {"sar", kMonthFeature}, LandPolicy::include);
  REQUIRE(stack.channels.size() == 2);
  CHECK(stack.index_of("sar") == 0);
  CHECK(stack.index_of(kMonthFeature) == 1);
  CHECK(stack.index_of("nope") == -1);
  CHECK(stack.channels[0].at(0, 0) == doctest::Approx(-1.0));
  CHECK(stack.channels[0].at(0, 1) == doctest::Approx(0.0));
  CHECK(stack.channels[0].at(1, 0) == doctest::Approx(1.0));
  CHECK(std::isnan(stack.channels[0].at(1, 1)));
  float aug = month_feature_value(8);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) CHECK(stack.channels[1].at(r, c) == aug);

  CHECK_THROWS_AS(apply_mask_and_normalize(s, stats, {"missing"}, LandPolicy::include), Error);
}

TEST_CASE("month feature value is a fixed affine of the month") {
  CHECK(month_feature_value(1) == doctest::Approx((1 - 6.5) / 3.45));
  CHECK(month_feature_value(12) == doctest::Approx((12 - 6.5) / 3.45));
  CHECK(month_feature_value(6) < 0.0);
  CHECK(month_feature_value(7) > 0.0);
}

TEST_CASE("land exclusion zeroes features and relabels pixels") {
  Scene s = grid_scene(2, 2);
  Raster<float> ch(2, 2, 3.0f);
  add_channel(s, "sar", ch);
  Raster<uint8_t> land(2, 2, 0);
  land.at(0, 0) = 1;
  s.land_mask = land;

  NormalizationStats stats;
  stats.channels["sar"] = {1.0, 1.0};

  LabelRaster labels(2, 2, 4);
  FeatureStack stack = apply_mask_and_normalize(align_scene(s, AlignmentPolicy{}), stats, {"sar"},
                                                LandPolicy::exclude, 0.0, &labels);
  CHECK(stack.channels[0].at(0, 0) == 0.0f);  // zeroed, not standardized residue
  CHECK(stack.channels[0].at(0, 1) == doctest::Approx(2.0));
  CHECK(labels.at(0, 0) == kIgnoreLabel);
  CHECK(labels.at(0, 1) == 4);

  // include keeps the standardized value and the label
  LabelRaster labels2(2, 2, 4);
  FeatureStack keep = apply_mask_and_normalize(align_scene(s, AlignmentPolicy{}), stats, {"sar"},
                                               LandPolicy::include, 0.0, &labels2);
  CHECK(keep.channels[0].at(0, 0) == doctest::Approx(2.0));
  CHECK(labels2.at(0, 0) == 4);
}

TEST_CASE("alignment policy names round trip") {
  for (AlignKernel k :
       {AlignKernel::block_average, AlignKernel::block_max, AlignKernel::nearest_replicate})
    CHECK(align_kernel_from_name(align_kernel_name(k)) == k);
  CHECK_THROWS_AS(align_kernel_from_name("bogus"), Error);
  for (LandPolicy p : {LandPolicy::include, LandPolicy::exclude})
    CHECK(land_policy_from_name(land_policy_name(p)) == p);
  CHECK_THROWS_AS(land_policy_from_name("bogus"), Error);
}
