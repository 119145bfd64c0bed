#pragma once

#include <string>
#include <vector>

#include "icebench/jsonio.hpp"
#include "icebench/scene.hpp"

namespace icebench {

struct SynthChannel {
  std::string name;
  int divisor = 1;  // native dims = scene dims / divisor (must divide evenly)
};

// Everything a generated corpus depends on; equal specs give byte-identical
// outputs.
struct SynthSpec {
  std::string preset = "voronoi";
  int n_scenes = 20;
  int height = 400;
  int width = 400;
  int n_polygons = 6;
  std::vector<SynthChannel> channels;  // defaulted when empty
  bool with_distance_map = true;
  int land_rows = 0;          // land strip along the top edge
  bool explicit_land_mask = false;
  std::vector<int> classes;   // drawn/cycled polygon classes; default all six
  double separation = 5.0;    // palette spacing between classes
  double noise_std = 1.0;
  double ambiguous_fraction = 0.0;     // polygons charted 50/50
  double unknown_code_fraction = 0.0;  // polygons charted with an unmapped code
  int checker_block = 64;
  std::vector<std::string> locations;  // cycled; defaulted when empty
  std::vector<std::string> dates;      // cycled; defaulted when empty
  int n_test = 4;                      // trailing scenes form the test manifest
  uint64_t seed = 1;
};

// Presets: "voronoi" (mixed polygons), "separable" (one polygon per scene,
// classes cycled, wide palette), "ambiguous" (50/50 charts), "checkerboard"
// (two classes in alternating blocks), "single_informative" (only the first
// channel separates the classes).
SynthSpec synth_preset(const std::string& name);
SynthSpec synth_spec_from_json(const json& j);
json synth_spec_to_json(const SynthSpec& spec);
void validate_synth_spec(const SynthSpec& spec);

// Deterministic scene construction, no files touched.
Scene synth_scene(const SynthSpec& spec, int index);

struct SynthOutput {
  std::vector<std::string> scene_dirs;
  std::string train_manifest;
  std::string test_manifest;
  std::string climatology;
  std::string regions;
};

SynthOutput generate(const SynthSpec& spec, const std::string& out_dir);

// Two pools whose class priors differ along the axis: "season" gives summer
// and winter pools with disjoint class sets, "region" splits by location.
SynthOutput generate_paired_shift(const SynthSpec& spec, const std::string& axis,
                                  const std::string& out_dir);

}  // namespace icebench
