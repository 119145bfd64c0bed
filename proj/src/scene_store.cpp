#include "icebench/scene.hpp"

#include <bit>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "icebench/jsonio.hpp"
#include "icebench/parallel.hpp"

static_assert(std::endian::native == std::endian::little,
              "raw payloads are little-endian; big-endian hosts are unsupported");

namespace icebench {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// basic file IO

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::MissingFile, path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) fail(Err::IoFailure, "reading " + path.string());
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Err::IoFailure, "opening " + path.string() + " for write");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(Err::IoFailure, "writing " + path.string());
}

json load_json_file(const fs::path& path) {
  std::string text = read_text_file(path);
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) fail(Err::CorruptPayload, path.string() + ": not valid JSON");
  return j;
}

void save_json_file(const json& j, const fs::path& path, int indent) {
  write_text_file(path, j.dump(indent) + "\n");
}

size_t file_size_of(const fs::path& path, const std::string& field) {
  std::error_code ec;
  auto n = fs::file_size(path, ec);
  if (ec) fail(Err::MissingFile, field + ": " + path.string());
  return static_cast<size_t>(n);
}

void read_bytes_exact(const fs::path& path, void* dst, size_t n, const std::string& field) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Err::MissingFile, field + ": " + path.string());
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<size_t>(in.gcount()) != n)
    fail(Err::PayloadSizeMismatch, field + ": " + path.string() + " shorter than " +
                                       std::to_string(n) + " bytes");
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    fail(Err::PayloadSizeMismatch,
         field + ": " + path.string() + " longer than " + std::to_string(n) + " bytes");
}

void write_bytes(const fs::path& path, const void* src, size_t n) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Err::IoFailure, "opening " + path.string() + " for write");
  out.write(static_cast<const char*>(src), static_cast<std::streamsize>(n));
  if (!out) fail(Err::IoFailure, "writing " + path.string());
}

// ---------------------------------------------------------------------------
// dates

bool is_leap_year(int year) { return (year % 4 == 0 && year % 100 != 0) || year % 400 == 0; }

int days_in_month(int year, int month) {
  static constexpr int lens[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month == 2 && is_leap_year(year)) return 29;
  return lens[month - 1];
}

Date parse_date(const std::string& iso, std::string_view field) {
  auto bad = [&](const char* why) {
    fail(Err::MalformedDate, std::string(field) + ": '" + iso + "' " + why);
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') bad("is not YYYY-MM-DD");
  for (int i : {0, 1, 2, 3, 5, 6, 8, 9})
    if (!std::isdigit(static_cast<unsigned char>(iso[i]))) bad("is not YYYY-MM-DD");
  Date d;
  d.year = std::stoi(iso.substr(0, 4));
  d.month = std::stoi(iso.substr(5, 2));
  d.day = std::stoi(iso.substr(8, 2));
  if (d.month < 1 || d.month > 12) bad("has month out of range");
  if (d.day < 1 || d.day > days_in_month(d.year, d.month)) bad("has day out of range");
  return d;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

int day_of_year(const Date& d) {
  int doy = d.day;
  for (int m = 1; m < d.month; ++m) doy += days_in_month(d.year, m);
  return doy;
}

// ---------------------------------------------------------------------------
// Scene accessors

bool Scene::has_channel(std::string_view name) const { return channel_index(name) >= 0; }

int Scene::channel_index(std::string_view name) const {
  for (size_t i = 0; i < channel_specs.size(); ++i)
    if (channel_specs[i].name == name) return static_cast<int>(i);
  return -1;
}

const ChannelSpec& Scene::channel_spec(std::string_view name) const {
  int i = channel_index(name);
  if (i < 0) fail(Err::UnknownChannel, "scene " + scene_id + " has no channel '" +
                                           std::string(name) + "'");
  return channel_specs[static_cast<size_t>(i)];
}

const Raster<float>& Scene::channel(std::string_view name) const {
  int i = channel_index(name);
  if (i < 0) fail(Err::UnknownChannel, "scene " + scene_id + " has no channel '" +
                                           std::string(name) + "'");
  return channel_data[static_cast<size_t>(i)];
}

const Raster<float>& channel_raster(const Scene& scene, std::string_view name) {
  return scene.channel(name);
}

Raster<uint8_t> land_mask_at_ref(const Scene& scene, double land_zone_max) {
  Raster<uint8_t> land(scene.height, scene.width, 0);
  if (scene.land_mask) {
    return *scene.land_mask;
  }
  int idx = scene.channel_index(kDistanceMapChannel);
  if (idx < 0) return land;  // no land information -> all water
  const auto& dm = scene.channel_data[static_cast<size_t>(idx)];
  const auto& spec = scene.channel_specs[static_cast<size_t>(idx)];
  for (int r = 0; r < scene.height; ++r) {
    // nearest-index map covers both finer and coarser native grids
    int sr = spec.native_height == scene.height
                 ? r
                 : static_cast<int>(static_cast<int64_t>(r) * spec.native_height / scene.height);
    for (int c = 0; c < scene.width; ++c) {
      int sc = spec.native_width == scene.width
                   ? c
                   : static_cast<int>(static_cast<int64_t>(c) * spec.native_width / scene.width);
      float v = dm.at(sr, sc);
      if (std::isfinite(v) && v <= land_zone_max) land.at(r, c) = 1;
    }
  }
  return land;
}

// ---------------------------------------------------------------------------
// validation

void validate_scene(const Scene& scene) {
  if (scene.scene_id.empty()) fail(Err::ConfigError, "scene_id: must be non-empty");
  if (scene.height < 1 || scene.width < 1)
    fail(Err::ConfigError, "scene " + scene.scene_id + ": height/width must be >= 1");
  parse_date(scene.acquisition_date);

  std::set<std::string> names;
  if (scene.channel_specs.size() != scene.channel_data.size())
    fail(Err::ShapeMismatch, "scene " + scene.scene_id + ": channel spec/data list mismatch");
  for (size_t i = 0; i < scene.channel_specs.size(); ++i) {
    const auto& spec = scene.channel_specs[i];
    if (!names.insert(spec.name).second)
      fail(Err::DuplicateChannel, "channels: duplicate name '" + spec.name + "'");
    if (spec.native_height < 1 || spec.native_width < 1)
      fail(Err::ConfigError, "channel " + spec.name + ": native dims must be >= 1");
    if (spec.dtype != "f32") fail(Err::UnknownDtype, "channel " + spec.name + ": " + spec.dtype);
    const auto& data = scene.channel_data[i];
    if (data.height() != spec.native_height || data.width() != spec.native_width)
      fail(Err::ShapeMismatch, "channel " + spec.name + ": raster dims disagree with spec");
  }

  if (scene.polygon_raster.height() != scene.height || scene.polygon_raster.width() != scene.width)
    fail(Err::ShapeMismatch, "polygon_raster: dims must match scene reference grid");

  std::set<int> poly_ids;
  for (const auto& p : scene.polygons) {
    if (p.id < 0) fail(Err::InvalidPolygon, "polygon id " + std::to_string(p.id) + ": negative");
    if (!poly_ids.insert(p.id).second)
      fail(Err::InvalidPolygon, "polygon id " + std::to_string(p.id) + ": duplicate");
    if (p.total_sic < 0.0 || p.total_sic > 100.0)
      fail(Err::InvalidPolygon,
           "polygon " + std::to_string(p.id) + ": total_sic out of [0,100]");
    if (p.partials.size() > 3)
      fail(Err::InvalidPolygon, "polygon " + std::to_string(p.id) + ": more than 3 partials");
    double partial_sum = 0.0;
    for (const auto& part : p.partials) {
      if (part.concentration < 0.0 || part.concentration > 100.0)
        fail(Err::InvalidPolygon,
             "polygon " + std::to_string(p.id) + ": partial concentration out of [0,100]");
      partial_sum += part.concentration;
    }
    // charts round to tens; tolerate up to 10 points of overshoot
    if (partial_sum > p.total_sic + 10.0)
      fail(Err::InvalidPolygon, "polygon " + std::to_string(p.id) +
                                    ": partial concentrations exceed total_sic beyond slack");
  }
  for (int32_t v : scene.polygon_raster.storage()) {
    if (v >= 0 && !poly_ids.count(static_cast<int>(v)))
      fail(Err::OrphanPolygonId,
           "polygon_raster: id " + std::to_string(v) + " has no polygon entry");
  }

  if (scene.land_mask) {
    if (!scene.land_mask->same_shape(scene.polygon_raster))
      fail(Err::ShapeMismatch, "land_mask: dims must match scene reference grid");
    for (uint8_t v : scene.land_mask->storage())
      if (v > 1) fail(Err::CorruptPayload, "land_mask: values must be 0 or 1");
  }
}

// ---------------------------------------------------------------------------
// load / write

namespace {

fs::path manifest_path_of(const fs::path& container) {
  if (container.extension() == ".json") return container;
  return container / "manifest.json";
}

const json& require_field(const json& j, const char* key, const std::string& ctx) {
  auto it = j.find(key);
  if (it == j.end()) fail(Err::CorruptPayload, ctx + ": missing field '" + key + "'");
  return *it;
}

template <typename T>
Raster<T> load_raster_payload(const fs::path& dir, const std::string& rel, int h, int w,
                              const std::string& field) {
  std::vector<T> data(static_cast<size_t>(h) * static_cast<size_t>(w));
  read_bytes_exact(dir / rel, data.data(), data.size() * sizeof(T), field);
  return Raster<T>::from_data(h, w, std::move(data));
}

}  // namespace

Scene load_scene(const std::string& path) {
  fs::path mpath = manifest_path_of(path);
  fs::path dir = mpath.parent_path();
  json j = load_json_file(mpath);
  const std::string ctx = "manifest.json";

  Scene s;
  s.scene_id = require_field(j, "scene_id", ctx).get<std::string>();
  s.location_id = require_field(j, "location_id", ctx).get<std::string>();
  s.acquisition_date = require_field(j, "acquisition_date", ctx).get<std::string>();
  parse_date(s.acquisition_date);
  s.height = require_field(j, "height", ctx).get<int>();
  s.width = require_field(j, "width", ctx).get<int>();

  for (const auto& cj : require_field(j, "channels", ctx)) {
    ChannelSpec spec;
    spec.name = require_field(cj, "name", "channels").get<std::string>();
    spec.native_height = require_field(cj, "native_height", spec.name).get<int>();
    spec.native_width = require_field(cj, "native_width", spec.name).get<int>();
    spec.dtype = require_field(cj, "dtype", spec.name).get<std::string>();
    spec.file = require_field(cj, "file", spec.name).get<std::string>();
    if (spec.dtype != "f32")
      fail(Err::UnknownDtype, "channel " + spec.name + ": dtype '" + spec.dtype + "'");
    if (spec.native_height < 1 || spec.native_width < 1)
      fail(Err::ConfigError, "channel " + spec.name + ": native dims must be >= 1");
    s.channel_data.push_back(load_raster_payload<float>(dir, spec.file, spec.native_height,
                                                        spec.native_width,
                                                        "channel " + spec.name));
    s.channel_specs.push_back(std::move(spec));
  }

  const json& pr = require_field(j, "polygon_raster", ctx);
  if (require_field(pr, "dtype", "polygon_raster").get<std::string>() != "i32")
    fail(Err::UnknownDtype, "polygon_raster: dtype must be i32");
  s.polygon_raster = load_raster_payload<int32_t>(
      dir, require_field(pr, "file", "polygon_raster").get<std::string>(), s.height, s.width,
      "polygon_raster");

  for (const auto& pj : require_field(j, "polygons", ctx)) {
    IceChartPolygon p;
    p.id = require_field(pj, "id", "polygons").get<int>();
    p.total_sic = require_field(pj, "total_sic", "polygons").get<double>();
    for (const auto& qj : require_field(pj, "partials", "polygons")) {
      SodPartial part;
      part.sod_code = require_field(qj, "sod_code", "partials").get<int>();
      part.concentration = require_field(qj, "concentration", "partials").get<double>();
      p.partials.push_back(part);
    }
    s.polygons.push_back(std::move(p));
  }

  if (auto it = j.find("land_mask"); it != j.end() && !it->is_null()) {
    if (require_field(*it, "dtype", "land_mask").get<std::string>() != "u8")
      fail(Err::UnknownDtype, "land_mask: dtype must be u8");
    s.land_mask = load_raster_payload<uint8_t>(
        dir, require_field(*it, "file", "land_mask").get<std::string>(), s.height, s.width,
        "land_mask");
  }

  validate_scene(s);
  return s;
}

void write_scene(const Scene& scene, const std::string& path) {
  validate_scene(scene);
  fs::path dir(path);
  std::error_code ec;
  fs::create_directories(dir, ec);

  json j;
  j["scene_id"] = scene.scene_id;
  j["location_id"] = scene.location_id;
  j["acquisition_date"] = scene.acquisition_date;
  j["height"] = scene.height;
  j["width"] = scene.width;
  json channels = json::array();
  for (size_t i = 0; i < scene.channel_specs.size(); ++i) {
    const auto& spec = scene.channel_specs[i];
    channels.push_back({{"name", spec.name},
                        {"native_height", spec.native_height},
                        {"native_width", spec.native_width},
                        {"dtype", spec.dtype},
                        {"file", spec.file}});
    const auto& data = scene.channel_data[i];
    write_bytes(dir / spec.file, data.data(), data.size() * sizeof(float));
  }
  j["channels"] = channels;

  j["polygon_raster"] = {{"file", "polygon_raster.i32"}, {"dtype", "i32"}};
  write_bytes(dir / "polygon_raster.i32", scene.polygon_raster.data(),
              scene.polygon_raster.size() * sizeof(int32_t));

  json polys = json::array();
  for (const auto& p : scene.polygons) {
    json partials = json::array();
    for (const auto& q : p.partials)
      partials.push_back({{"sod_code", q.sod_code}, {"concentration", q.concentration}});
    polys.push_back({{"id", p.id}, {"total_sic", p.total_sic}, {"partials", partials}});
  }
  j["polygons"] = polys;

  if (scene.land_mask) {
    j["land_mask"] = {{"file", "land_mask.u8"}, {"dtype", "u8"}};
    write_bytes(dir / "land_mask.u8", scene.land_mask->data(), scene.land_mask->size());
  }

  save_json_file(j, dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// dataset manifests

DatasetManifest load_dataset_manifest(const std::string& path) {
  json j = load_json_file(path);
  DatasetManifest m;
  m.split = require_field(j, "split", "dataset manifest").get<std::string>();
  if (m.split != "train" && m.split != "validation" && m.split != "test")
    fail(Err::ConfigError, "dataset manifest split: '" + m.split + "'");
  fs::path base = fs::path(path).parent_path();
  for (const auto& sj : require_field(j, "scenes", "dataset manifest")) {
    fs::path p = sj.get<std::string>();
    if (p.is_relative()) p = base / p;
    m.scenes.push_back(p.string());
  }
  return m;
}

void save_dataset_manifest(const DatasetManifest& m, const std::string& path) {
  json j;
  j["split"] = m.split;
  j["scenes"] = m.scenes;
  save_json_file(j, path);
}

std::vector<Scene> load_scenes(const DatasetManifest& m, int workers) {
  std::vector<Scene> scenes(m.scenes.size());
  parallel_for(m.scenes.size(), workers, [&](size_t i) { scenes[i] = load_scene(m.scenes[i]); });
  std::set<std::string> ids;
  for (const auto& s : scenes)
    if (!ids.insert(s.scene_id).second)
      fail(Err::ConfigError, "dataset manifest: duplicate scene_id '" + s.scene_id + "'");
  return scenes;
}

}  // namespace icebench
