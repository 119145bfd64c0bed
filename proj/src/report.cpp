#include <cinttypes>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <set>

#include "icebench/experiments.hpp"
#include "icebench/kernels.hpp"
#include "icebench/rng.hpp"

namespace icebench {

namespace {

std::string iso_utc_now() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string file_hash(const std::string& path) {
  std::string bytes;
  try {
    bytes = read_text_file(path);
  } catch (const Error&) {
    return "absent";
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(bytes));
  return buf;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

const char* cell_status(const CellResult& cell) {
  if (cell.errored) return "error";
  if (cell.skipped) return "skipped";
  return "ok";
}

json cell_to_json(const CellResult& cell) {
  json j{{"train_key", cell.train_key},
         {"test_key", cell.test_key},
         {"status", cell_status(cell)}};
  if (!cell.value.empty()) j["value"] = cell.value;
  if (!cell.note.empty()) j["note"] = cell.note;
  if (cell.has_metrics) j["metrics"] = metrics_to_json(cell.metrics);
  if (!cell.extra.is_null() && !cell.extra.empty()) j["extra"] = cell.extra;
  return j;
}

// Wall clocks, memory and timestamps vary between identical runs; everything
// else must not.
const std::set<std::string>& volatile_keys() {
  static const std::set<std::string> keys = {"efficiency", "created_at", "wall_seconds",
                                             "elapsed_seconds"};
  return keys;
}

json strip_volatile(const json& j) {
  if (j.is_object()) {
    json out = json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (volatile_keys().count(it.key())) continue;
      out[it.key()] = strip_volatile(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const json& v : j) out.push_back(strip_volatile(v));
    return out;
  }
  return j;
}

}  // namespace

json experiment_provenance(const std::string& name, const std::string& kind,
                           const PipelineConfig& cfg, const std::vector<std::string>& input_files,
                           int workers) {
  json inputs = json::object();
  for (const std::string& path : input_files)
    if (!path.empty()) inputs[path] = file_hash(path);
  return json{{"name", name},
              {"kind", kind},
              {"created_at", iso_utc_now()},
              {"seed", cfg.seed},
              {"workers", workers},
              {"kernel_backend", kernels::backend_name(kernels::active_backend())},
              {"config", pipeline_config_to_json(cfg)},
              {"inputs", inputs}};
}

json report_to_json(const ExperimentReport& report) {
  json cells = json::array();
  for (const CellResult& cell : report.cells) cells.push_back(cell_to_json(cell));
  return json{{"name", report.name},
              {"kind", report.kind},
              {"provenance", report.provenance},
              {"cells", cells}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport report;
  report.name = j.value("name", std::string());
  report.kind = j.value("kind", std::string());
  if (j.contains("provenance")) report.provenance = j.at("provenance");
  for (const json& c : j.value("cells", json::array())) {
    CellResult cell;
    cell.train_key = c.value("train_key", std::string());
    cell.test_key = c.value("test_key", std::string());
    cell.value = c.value("value", std::string());
    const std::string status = c.value("status", "ok");
    cell.skipped = status == "skipped";
    cell.errored = status == "error";
    cell.note = c.value("note", std::string());
    if (c.contains("metrics")) {
      cell.metrics = metrics_from_json(c.at("metrics"));
      cell.has_metrics = true;
    }
    if (c.contains("extra")) cell.extra = c.at("extra");
    report.cells.push_back(std::move(cell));
  }
  return report;
}

bool report_has_errors(const ExperimentReport& report) {
  for (const CellResult& cell : report.cells)
    if (cell.errored) return true;
  return false;
}

std::string stable_digest(const json& report_json) {
  const std::string canonical = strip_volatile(report_json).dump();
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, fnv1a(canonical));
  return buf;
}

namespace {

void write_cells_csv(const ExperimentReport& report, const std::string& path) {
  std::string out =
      "train_key,test_key,value,status,total_support,accuracy,precision_w,recall_w,f1_w,iou_w,"
      "note\n";
  char num[192];
  for (const CellResult& cell : report.cells) {
    out += csv_escape(cell.train_key);
    out += ',';
    out += csv_escape(cell.test_key);
    out += ',';
    out += csv_escape(cell.value);
    out += ',';
    out += cell_status(cell);
    out += ',';
    if (cell.has_metrics) {
      std::snprintf(num, sizeof(num), "%" PRIu64 ",%.9f,%.9f,%.9f,%.9f,%.9f",
                    cell.metrics.total_support, cell.metrics.accuracy, cell.metrics.precision_w,
                    cell.metrics.recall_w, cell.metrics.f1_w, cell.metrics.iou_w);
      out += num;
    } else {
      out += ",,,,,";
    }
    out += ',';
    out += csv_escape(cell.note);
    out += '\n';
  }
  write_text_file(path, out);
}

void write_plotdata(const ExperimentReport& report, const std::string& dir) {
  namespace fs = std::filesystem;
  if (report.kind == "sweep") {
    struct MetricCol {
      const char* name;
      double MetricsReport::* member;
    };
    const MetricCol cols[] = {{"accuracy", &MetricsReport::accuracy},
                              {"f1_w", &MetricsReport::f1_w},
                              {"iou_w", &MetricsReport::iou_w}};
    for (const MetricCol& col : cols) {
      std::string out = "value\t";
      out += col.name;
      out += '\n';
      char line[64];
      for (const CellResult& cell : report.cells) {
        if (!cell.has_metrics) continue;
        std::snprintf(line, sizeof(line), "%s\t%.9f\n", cell.value.c_str(),
                      cell.metrics.*(col.member));
        out += line;
      }
      write_text_file((fs::path(dir) / (std::string(col.name) + ".tsv")).string(), out);
    }
    return;
  }
  if (report.kind == "transfer") {
    std::set<std::string> train_keys, test_keys;
    for (const CellResult& cell : report.cells) {
      train_keys.insert(cell.train_key);
      test_keys.insert(cell.test_key);
    }
    std::string out = "train";
    for (const std::string& t : test_keys) {
      out += '\t';
      out += t;
    }
    out += '\n';
    char num[32];
    for (const std::string& row : train_keys) {
      out += row;
      for (const std::string& col : test_keys) {
        out += '\t';
        bool found = false;
        for (const CellResult& cell : report.cells) {
          if (cell.train_key == row && cell.test_key == col) {
            if (cell.has_metrics) {
              std::snprintf(num, sizeof(num), "%.9f", cell.metrics.f1_w);
              out += num;
            } else {
              out += cell.skipped ? "skipped" : "error";
            }
            found = true;
            break;
          }
        }
        if (!found) out += "absent";
      }
      out += '\n';
    }
    write_text_file((fs::path(dir) / "f1_w_matrix.tsv").string(), out);
  }
}

}  // namespace

void emit_report(const ExperimentReport& report, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "plotdata");
  json j = report_to_json(report);
  j["stable_digest"] = stable_digest(j);
  save_json_file(j, (fs::path(out_dir) / "report.json").string());
  write_cells_csv(report, (fs::path(out_dir) / "cells.csv").string());
  write_plotdata(report, (fs::path(out_dir) / "plotdata").string());
}

}  // namespace icebench
