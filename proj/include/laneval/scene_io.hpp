// Copyright 2026 The laneval Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "laneval/bev_raster.hpp"
#include "laneval/metrics.hpp"
#include "laneval/types.hpp"

namespace laneval {

inline constexpr const char* kSchemaVersion = "1.0";

class io_error : public std::runtime_error {
 public:
  enum class Kind { kIo, kParse, kValidation, kVersion };

  io_error(Kind kind, std::string message)
      : std::runtime_error(std::move(message)), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// One scene: ordered frames plus an optional SD map per frame.
struct SceneArchive {
  std::string scene_id;
  std::vector<Frame> frames;
  std::vector<std::optional<SdMap>> sd_maps;  // parallel to frames
};

namespace detail {

using nlohmann::json;

[[noreturn]] inline void fail_parse(const std::string& where,
                                    const std::string& what) {
  throw io_error(io_error::Kind::kParse, where + ": " + what);
}

inline const json& require_field(const json& node, const char* key,
                                 const std::string& where) {
  const auto it = node.find(key);
  if (it == node.end()) fail_parse(where, std::string("missing field '") + key + "'");
  return *it;
}

inline double read_number(const json& node, const std::string& where) {
  if (!node.is_number()) fail_parse(where, "expected a number");
  return node.get<double>();
}

inline Point3 read_point(const json& node, const std::string& where) {
  if (!node.is_array() || node.size() != 3)
    fail_parse(where, "expected [x,y,z]");
  return {read_number(node[0], where), read_number(node[1], where),
          read_number(node[2], where)};
}

inline Polyline3 read_polyline(const json& node, const std::string& where) {
  if (!node.is_array()) fail_parse(where, "expected an array of points");
  Polyline3 line;
  line.points.reserve(node.size());
  for (std::size_t i = 0; i < node.size(); ++i)
    line.points.push_back(
        read_point(node[i], where + "[" + std::to_string(i) + "]"));
  return line;
}

inline json polyline_to_json(const Polyline3& line) {
  json out = json::array();
  for (const Point3& p : line.points) out.push_back(json::array({p.x, p.y, p.z}));
  return out;
}

// Sparse edge list: [i, j] carries implicit score 1, [i, j, s] an explicit one.
inline ScoreMatrix read_edges(const json& node, std::size_t rows,
                              std::size_t cols, const std::string& where) {
  ScoreMatrix m(rows, cols, 0.0);
  if (node.is_null()) return m;
  if (!node.is_array()) fail_parse(where, "expected an edge array");
  for (std::size_t e = 0; e < node.size(); ++e) {
    const json& edge = node[e];
    const std::string at = where + "[" + std::to_string(e) + "]";
    if (!edge.is_array() || edge.size() < 2 || edge.size() > 3)
      fail_parse(at, "expected [i,j] or [i,j,score]");
    if (!edge[0].is_number_unsigned() || !edge[1].is_number_unsigned())
      fail_parse(at, "edge indices must be non-negative integers");
    const std::size_t i = edge[0].get<std::size_t>();
    const std::size_t j = edge[1].get<std::size_t>();
    if (i >= rows || j >= cols) fail_parse(at, "edge index out of range");
    m.at(i, j) = edge.size() == 3 ? read_number(edge[2], at) : 1.0;
  }
  return m;
}

inline json edges_to_json(const ScoreMatrix& m) {
  json out = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const double s = m.at(i, j);
      if (s == 0.0) continue;
      if (s == 1.0)
        out.push_back(json::array({i, j}));
      else
        out.push_back(json::array({i, j, s}));
    }
  }
  return out;
}

inline Frame read_frame(const json& node, const std::string& where,
                        std::optional<SdMap>& sd_map) {
  if (!node.is_object()) fail_parse(where, "expected a frame object");
  Frame frame;
  frame.frame_id = require_field(node, "frame_id", where).get<std::string>();

  if (const auto it = node.find("lane_segments"); it != node.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& ls = (*it)[i];
      const std::string at = where + ".lane_segments[" + std::to_string(i) + "]";
      LaneSegment out;
      out.id = require_field(ls, "id", at).get<std::int64_t>();
      out.class_id = require_field(ls, "class_id", at).get<int>();
      out.left_type = ls.value("left_type", 0);
      out.right_type = ls.value("right_type", 0);
      out.confidence = read_number(require_field(ls, "confidence", at), at);
      out.centerline = read_polyline(require_field(ls, "centerline", at),
                                     at + ".centerline");
      out.left_boundary = read_polyline(require_field(ls, "left_boundary", at),
                                        at + ".left_boundary");
      out.right_boundary = read_polyline(
          require_field(ls, "right_boundary", at), at + ".right_boundary");
      frame.lane_segments.push_back(std::move(out));
    }
  }
  if (const auto it = node.find("areas"); it != node.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& area = (*it)[i];
      const std::string at = where + ".areas[" + std::to_string(i) + "]";
      AreaInstance out;
      out.id = require_field(area, "id", at).get<std::int64_t>();
      out.class_id = require_field(area, "class_id", at).get<int>();
      out.confidence = read_number(require_field(area, "confidence", at), at);
      out.curve = read_polyline(require_field(area, "curve", at), at + ".curve");
      frame.areas.push_back(std::move(out));
    }
  }
  if (const auto it = node.find("traffic_elements"); it != node.end()) {
    for (std::size_t i = 0; i < it->size(); ++i) {
      const json& te = (*it)[i];
      const std::string at =
          where + ".traffic_elements[" + std::to_string(i) + "]";
      TrafficElement out;
      out.id = require_field(te, "id", at).get<std::int64_t>();
      out.class_id = require_field(te, "class_id", at).get<int>();
      out.confidence = read_number(require_field(te, "confidence", at), at);
      const json& box = require_field(te, "box", at);
      if (!box.is_array() || box.size() != 4)
        fail_parse(at + ".box", "expected [x1,y1,x2,y2]");
      out.box = {read_number(box[0], at), read_number(box[1], at),
                 read_number(box[2], at), read_number(box[3], at)};
      frame.traffic_elements.push_back(std::move(out));
    }
  }

  const json topology = node.value("topology", json::object());
  frame.topology.ll_scores = read_edges(
      topology.value("ll_edges", json()), frame.lane_segments.size(),
      frame.lane_segments.size(), where + ".topology.ll_edges");
  frame.topology.lt_scores = read_edges(
      topology.value("lt_edges", json()), frame.lane_segments.size(),
      frame.traffic_elements.size(), where + ".topology.lt_edges");

  sd_map.reset();
  if (const auto it = node.find("sd_map"); it != node.end() && !it->is_null()) {
    SdMap map;
    const json& polylines = require_field(*it, "polylines", where + ".sd_map");
    for (std::size_t i = 0; i < polylines.size(); ++i) {
      const std::string at =
          where + ".sd_map.polylines[" + std::to_string(i) + "]";
      SdPolyline pl;
      pl.road_type = polylines[i].value("road_type", 0);
      pl.line = read_polyline(require_field(polylines[i], "points", at),
                              at + ".points");
      if (pl.line.size() < 2) fail_parse(at, "SD polyline needs >= 2 points");
      map.polylines.push_back(std::move(pl));
    }
    sd_map = std::move(map);
  }
  return frame;
}

inline void check_archive(const SceneArchive& archive,
                          const ValidationOptions& opts,
                          const std::string& source) {
  std::string prev;
  for (std::size_t i = 0; i < archive.frames.size(); ++i) {
    const std::string& id = archive.frames[i].frame_id;
    if (i > 0 && !(prev < id))
      throw io_error(io_error::Kind::kValidation,
                     source + ": frame ids must be unique and sorted ('" +
                         prev + "' then '" + id + "')");
    prev = id;
  }
  std::vector<std::string> lines;
  for (const Frame& frame : archive.frames) {
    const std::vector<Violation> violations =
        validate_frame(frame, BevGridSpec{}, opts);
    for (const Violation& v : violations) {
      std::ostringstream os;
      os << "frame '" << frame.frame_id << "': " << v.subject << "." << v.field
         << ": " << v.message;
      lines.push_back(os.str());
    }
  }
  if (!lines.empty()) {
    std::ostringstream os;
    os << source << ": " << lines.size() << " invariant violation(s)";
    const std::size_t shown = std::min<std::size_t>(lines.size(), 20);
    for (std::size_t i = 0; i < shown; ++i) os << "\n  " << lines[i];
    if (shown < lines.size()) os << "\n  ...";
    throw io_error(io_error::Kind::kValidation, os.str());
  }
}

}  // namespace detail

/// Parses one scene document without invariant checks. Used by the loaders
/// below, which add validation.
inline SceneArchive parse_scene_json(const std::string& text,
                                     const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw io_error(io_error::Kind::kParse, source + ": " + e.what());
  }
  if (!doc.is_object())
    detail::fail_parse(source, "top-level document must be an object");
  const auto version = doc.find("schema_version");
  if (version == doc.end() || !version->is_string())
    detail::fail_parse(source, "missing schema_version");
  if (version->get<std::string>() != kSchemaVersion)
    throw io_error(io_error::Kind::kVersion,
                   source + ": unsupported schema_version '" +
                       version->get<std::string>() + "' (expected " +
                       kSchemaVersion + ")");

  SceneArchive archive;
  archive.scene_id = doc.value("scene_id", "");
  const nlohmann::json& frames = detail::require_field(doc, "frames", source);
  if (!frames.is_array()) detail::fail_parse(source, "frames must be an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    std::optional<SdMap> sd_map;
    archive.frames.push_back(detail::read_frame(
        frames[i], source + ".frames[" + std::to_string(i) + "]", sd_map));
    archive.sd_maps.push_back(std::move(sd_map));
  }
  return archive;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(io_error::Kind::kIo, "cannot open file: " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline SceneArchive load_scene(const std::string& path,
                               ValidationOptions opts = {}) {
  SceneArchive archive = parse_scene_json(read_text_file(path), path);
  detail::check_archive(archive, opts, path);
  return archive;
}

inline SceneArchive load_ground_truth(const std::string& path,
                                      ValidationOptions opts = {}) {
  opts.ground_truth = true;
  return load_scene(path, opts);
}

inline SceneArchive load_predictions(const std::string& path,
                                     ValidationOptions opts = {}) {
  opts.ground_truth = false;
  return load_scene(path, opts);
}

/// Loads a dataset from one scene file or from a directory of *.json scene
/// files (sorted by filename).
inline std::vector<SceneArchive> load_dataset(const std::string& path,
                                              ValidationOptions opts = {}) {
  namespace fs = std::filesystem;
  std::vector<SceneArchive> scenes;
  if (fs::is_directory(path)) {
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(path))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw io_error(io_error::Kind::kIo, "no .json scene files in " + path);
    scenes.reserve(files.size());
    for (const std::string& file : files) scenes.push_back(load_scene(file, opts));
  } else {
    scenes.push_back(load_scene(path, opts));
  }
  return scenes;
}

inline nlohmann::json scene_to_json(const SceneArchive& archive) {
  using nlohmann::json;
  json frames = json::array();
  for (std::size_t f = 0; f < archive.frames.size(); ++f) {
    const Frame& frame = archive.frames[f];
    json node;
    node["frame_id"] = frame.frame_id;
    json lanes = json::array();
    for (const LaneSegment& ls : frame.lane_segments) {
      json out;
      out["id"] = ls.id;
      out["class_id"] = ls.class_id;
      out["left_type"] = ls.left_type;
      out["right_type"] = ls.right_type;
      out["confidence"] = ls.confidence;
      out["centerline"] = detail::polyline_to_json(ls.centerline);
      out["left_boundary"] = detail::polyline_to_json(ls.left_boundary);
      out["right_boundary"] = detail::polyline_to_json(ls.right_boundary);
      lanes.push_back(std::move(out));
    }
    node["lane_segments"] = std::move(lanes);

    json areas = json::array();
    for (const AreaInstance& a : frame.areas) {
      json out;
      out["id"] = a.id;
      out["class_id"] = a.class_id;
      out["confidence"] = a.confidence;
      out["curve"] = detail::polyline_to_json(a.curve);
      areas.push_back(std::move(out));
    }
    node["areas"] = std::move(areas);

    json tes = json::array();
    for (const TrafficElement& te : frame.traffic_elements) {
      json out;
      out["id"] = te.id;
      out["class_id"] = te.class_id;
      out["confidence"] = te.confidence;
      out["box"] = json::array({te.box.x1, te.box.y1, te.box.x2, te.box.y2});
      tes.push_back(std::move(out));
    }
    node["traffic_elements"] = std::move(tes);

    node["topology"] = {
        {"ll_edges", detail::edges_to_json(frame.topology.ll_scores)},
        {"lt_edges", detail::edges_to_json(frame.topology.lt_scores)}};

    if (f < archive.sd_maps.size() && archive.sd_maps[f]) {
      json polylines = json::array();
      for (const SdPolyline& pl : archive.sd_maps[f]->polylines) {
        json out;
        out["road_type"] = pl.road_type;
        out["points"] = detail::polyline_to_json(pl.line);
        polylines.push_back(std::move(out));
      }
      node["sd_map"] = {{"polylines", std::move(polylines)}};
    }
    frames.push_back(std::move(node));
  }
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["scene_id"] = archive.scene_id;
  doc["frames"] = std::move(frames);
  return doc;
}

inline void write_scene(const SceneArchive& archive, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(io_error::Kind::kIo, "cannot open for writing: " + path);
  out << scene_to_json(archive).dump(2) << '\n';
  if (!out) throw io_error(io_error::Kind::kIo, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Report serialization

enum class ReportFormat { kJson, kTable };

inline nlohmann::json config_to_json(const MetricConfig& cfg) {
  nlohmann::json out;
  out["frechet_thresholds"] = cfg.frechet_thresholds;
  out["chamfer_thresholds"] = cfg.chamfer_thresholds;
  out["iou_thresholds"] = cfg.iou_thresholds;
  out["topology_frechet_gate_m"] = cfg.topology_frechet_gate_m;
  out["topology_iou_gate"] = cfg.topology_iou_gate;
  out["interpolation"] =
      cfg.interpolation == ApInterpolation::kAllPoint ? "all_point" : "eleven_point";
  out["include_pred_only_classes"] = cfg.include_pred_only_classes;
  out["planar_distances"] = cfg.planar_distances;
  out["area_resample_count"] = cfg.area_resample_count;
  // Worker count is an execution detail, not provenance: reports must be
  // byte-identical for any parallelism.
  return out;
}

inline std::string report_to_json(const MetricsReport& report,
                                  const MetricConfig& cfg) {
  nlohmann::json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config"] = config_to_json(cfg);
  doc["metrics"] = {{"det_l", report.det_l}, {"det_a", report.det_a},
                    {"det_t", report.det_t}, {"top_ll", report.top_ll},
                    {"top_lt", report.top_lt}, {"olus", report.olus}};
  doc["per_class"] = report.per_class;
  doc["per_threshold"] = report.per_threshold;
  return doc.dump(2) + "\n";
}

inline std::string report_to_table(const MetricsReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6);
  os << "metric    value\n";
  os << "------    --------\n";
  os << "DET_l     " << report.det_l << "\n";
  os << "DET_a     " << report.det_a << "\n";
  os << "DET_t     " << report.det_t << "\n";
  os << "TOP_ll    " << report.top_ll << "\n";
  os << "TOP_lt    " << report.top_lt << "\n";
  os << "OLUS      " << report.olus << "\n";
  return os.str();
}

inline void write_report(const MetricsReport& report, const MetricConfig& cfg,
                         const std::string& path,
                         ReportFormat format = ReportFormat::kJson) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error(io_error::Kind::kIo, "cannot open for writing: " + path);
  out << (format == ReportFormat::kJson ? report_to_json(report, cfg)
                                        : report_to_table(report));
  if (!out) throw io_error(io_error::Kind::kIo, "write failed: " + path);
}

}  // namespace laneval
