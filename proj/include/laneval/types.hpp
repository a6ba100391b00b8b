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

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace laneval {

/// 3D point in the ego frame: x forward, y left, z up. Meters.
struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend Point3 operator+(const Point3& a, const Point3& b) {
    return {a.x + b.x, a.y + b.y, a.z + b.z};
  }
  friend Point3 operator-(const Point3& a, const Point3& b) {
    return {a.x - b.x, a.y - b.y, a.z - b.z};
  }
  friend Point3 operator*(const Point3& a, double s) {
    return {a.x * s, a.y * s, a.z * s};
  }
  friend bool operator==(const Point3& a, const Point3& b) {
    return a.x == b.x && a.y == b.y && a.z == b.z;
  }
};

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

inline double norm(const Point3& p) {
  return std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
}

/// Ordered point sequence. Valid instances have >= 2 points, no NaN, and are
/// not a single repeated point.
struct Polyline3 {
  std::vector<Point3> points;

  Polyline3() = default;
  Polyline3(std::initializer_list<Point3> pts) : points(pts) {}
  explicit Polyline3(std::vector<Point3> pts) : points(std::move(pts)) {}

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  const Point3& operator[](std::size_t i) const { return points[i]; }
  Point3& operator[](std::size_t i) { return points[i]; }
};

inline double arc_length(const Polyline3& p) {
  double total = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) total += norm(p[i] - p[i - 1]);
  return total;
}

/// Line-type vocabulary for lane boundaries.
enum LineType : int { kLineNone = 0, kLineSolid = 1, kLineDashed = 2 };

/// One lane instance: centerline plus left/right boundary, each sampled with
/// the same fixed point count (default 11).
struct LaneSegment {
  std::int64_t id = 0;
  Polyline3 centerline;
  Polyline3 left_boundary;
  Polyline3 right_boundary;
  int class_id = 0;
  int left_type = kLineNone;
  int right_type = kLineNone;
  double confidence = 1.0;  // ground truth carries 1.0
};

enum AreaClass : int { kAreaPedestrianCrossing = 0, kAreaRoadBoundary = 1 };

inline const char* area_class_name(int class_id) {
  switch (class_id) {
    case kAreaPedestrianCrossing: return "pedestrian_crossing";
    case kAreaRoadBoundary: return "road_boundary";
    default: return "unknown";
  }
}

/// Undirected BEV curve: pedestrian crossing or road boundary.
struct AreaInstance {
  std::int64_t id = 0;
  Polyline3 curve;
  int class_id = kAreaPedestrianCrossing;
  double confidence = 1.0;
};

/// Axis-aligned box in front-view image pixels.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool valid() const {
    return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) &&
           std::isfinite(y2) && x1 < x2 && y1 < y2;
  }
};

struct TrafficElement {
  std::int64_t id = 0;
  Box box;
  int class_id = 0;
  double confidence = 1.0;
};

/// Dense row-major score matrix, entries in [0,1].
class ScoreMatrix {
 public:
  ScoreMatrix() = default;
  ScoreMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const ScoreMatrix& a, const ScoreMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Lane-lane and lane-traffic relationship scores, keyed by instance order
/// within the owning frame. Ground-truth entries are exactly 0 or 1.
struct TopologyPrediction {
  ScoreMatrix ll_scores;  // [num_lanes x num_lanes]
  ScoreMatrix lt_scores;  // [num_lanes x num_traffic_elements]
};

struct Frame {
  std::string frame_id;
  std::vector<LaneSegment> lane_segments;
  std::vector<AreaInstance> areas;
  std::vector<TrafficElement> traffic_elements;
  TopologyPrediction topology;
};

using FrameGroundTruth = Frame;
using FramePrediction = Frame;

/// BEV raster window and resolution. Defaults: +-50 m x, +-25 m y, 200x100
/// cells (0.5 m cell size).
struct BevGridSpec {
  double x_min = -50.0;
  double x_max = 50.0;
  double y_min = -25.0;
  double y_max = 25.0;
  int rows = 200;  // cell count along x
  int cols = 100;  // cell count along y

  double cell_size_x() const { return (x_max - x_min) / rows; }
  double cell_size_y() const { return (y_max - y_min) / cols; }

  void require_valid() const {
    if (!(x_max > x_min) || !(y_max > y_min))
      throw std::invalid_argument("BevGridSpec: max must exceed min");
    if (rows < 1 || cols < 1)
      throw std::invalid_argument("BevGridSpec: rows/cols must be >= 1");
  }
};

struct LaneLossWeights {
  double cls = 1.5;
  double reg = 0.0025;
  double type = 0.1;
  double mask = 3.0;
  double dice = 3.0;
};

struct AreaLossWeights {
  double cls = 1.5;
  double reg = 0.0025;
  double dir = 0.005;
  double seg = 10.0;
};

struct TrafficLossWeights {
  double cls = 1.0;
  double reg = 2.5;
  double iou = 1.0;
};

struct LossWeights {
  LaneLossWeights lanesegment;
  AreaLossWeights area;
  TrafficLossWeights traffic;
  double topology_ll = 5.0;
  double topology_lt = 5.0;
};

/// Final evaluation output: the five sub-metrics plus their aggregate, with
/// per-class and per-threshold AP breakdowns keyed by stable string names.
struct MetricsReport {
  double det_l = 0.0;
  double det_a = 0.0;
  double det_t = 0.0;
  double top_ll = 0.0;
  double top_lt = 0.0;
  double olus = 0.0;
  std::map<std::string, double> per_class;
  std::map<std::string, double> per_threshold;
};

// ---------------------------------------------------------------------------
// Frame validation

struct Violation {
  std::string subject;  // e.g. "lane_segment id=3"
  std::string field;
  std::string message;
};

struct ValidationOptions {
  int lane_points = 11;          // required sample count per lane polyline
  double range_margin_m = 10.0;  // slack around the BEV window
  int line_type_count = 3;
  int lane_class_count = 1;
  int traffic_class_count = 13;
  bool ground_truth = false;  // enforce binary topology and confidence 1
};

namespace detail {

inline std::string subject_of(const char* kind, std::int64_t id) {
  std::ostringstream os;
  os << kind << " id=" << id;
  return os.str();
}

inline void check_polyline(const Polyline3& line, const std::string& subject,
                           const char* field, std::vector<Violation>& out,
                           int required_points = -1) {
  if (required_points >= 0 &&
      line.size() != static_cast<std::size_t>(required_points)) {
    std::ostringstream os;
    os << "expected " << required_points << " points, got " << line.size();
    out.push_back({subject, field, os.str()});
    return;
  }
  if (line.size() < 2) {
    out.push_back({subject, field, "polyline needs at least 2 points"});
    return;
  }
  bool all_same = true;
  for (const Point3& p : line.points) {
    if (!is_finite(p)) {
      out.push_back({subject, field, "non-finite coordinate"});
      return;
    }
    if (!(p == line[0])) all_same = false;
  }
  if (all_same)
    out.push_back({subject, field, "degenerate polyline (single repeated point)"});
}

inline void check_range(const Polyline3& line, const std::string& subject,
                        const char* field, const BevGridSpec& grid,
                        double margin, std::vector<Violation>& out) {
  for (const Point3& p : line.points) {
    if (!is_finite(p)) return;  // reported elsewhere
    if (p.x < grid.x_min - margin || p.x > grid.x_max + margin ||
        p.y < grid.y_min - margin || p.y > grid.y_max + margin) {
      std::ostringstream os;
      os << "point (" << p.x << "," << p.y << ") outside BEV range + margin";
      out.push_back({subject, field, os.str()});
      return;
    }
  }
}

inline void check_confidence(double c, const std::string& subject,
                             bool ground_truth, std::vector<Violation>& out) {
  if (!std::isfinite(c) || c < 0.0 || c > 1.0)
    out.push_back({subject, "confidence", "confidence outside [0,1]"});
  else if (ground_truth && c != 1.0)
    out.push_back({subject, "confidence", "ground-truth confidence must be 1.0"});
}

inline void check_scores(const ScoreMatrix& m, std::size_t want_rows,
                         std::size_t want_cols, const char* field,
                         bool ground_truth, std::vector<Violation>& out) {
  if (m.rows() != want_rows || m.cols() != want_cols) {
    std::ostringstream os;
    os << "expected " << want_rows << "x" << want_cols << ", got " << m.rows()
       << "x" << m.cols();
    out.push_back({"topology", field, os.str()});
    return;
  }
  for (double v : m.data()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      out.push_back({"topology", field, "score outside [0,1]"});
      return;
    }
    if (ground_truth && v != 0.0 && v != 1.0) {
      out.push_back({"topology", field, "ground-truth scores must be binary"});
      return;
    }
  }
}

template <class T>
void check_unique_ids(const std::vector<T>& items, const char* kind,
                      std::vector<Violation>& out) {
  std::set<std::int64_t> seen;
  for (const T& item : items) {
    if (!seen.insert(item.id).second)
      out.push_back({subject_of(kind, item.id), "id", "duplicate instance id"});
  }
}

}  // namespace detail

/// Audits every type invariant of a frame plus the in-range requirement.
/// Returns an empty list iff the frame is well formed. Never mutates input;
/// violations are data, not failures.
inline std::vector<Violation> validate_frame(const Frame& frame,
                                             const BevGridSpec& grid,
                                             const ValidationOptions& opts = {}) {
  grid.require_valid();
  std::vector<Violation> out;

  for (const LaneSegment& ls : frame.lane_segments) {
    const std::string subject = detail::subject_of("lane_segment", ls.id);
    detail::check_polyline(ls.centerline, subject, "centerline", out,
                           opts.lane_points);
    detail::check_polyline(ls.left_boundary, subject, "left_boundary", out,
                           opts.lane_points);
    detail::check_polyline(ls.right_boundary, subject, "right_boundary", out,
                           opts.lane_points);
    detail::check_range(ls.centerline, subject, "centerline", grid,
                        opts.range_margin_m, out);
    detail::check_range(ls.left_boundary, subject, "left_boundary", grid,
                        opts.range_margin_m, out);
    detail::check_range(ls.right_boundary, subject, "right_boundary", grid,
                        opts.range_margin_m, out);
    if (ls.class_id < 0 || ls.class_id >= opts.lane_class_count)
      out.push_back({subject, "class_id", "lane class outside vocabulary"});
    if (ls.left_type < 0 || ls.left_type >= opts.line_type_count)
      out.push_back({subject, "left_type", "line type outside vocabulary"});
    if (ls.right_type < 0 || ls.right_type >= opts.line_type_count)
      out.push_back({subject, "right_type", "line type outside vocabulary"});
    detail::check_confidence(ls.confidence, subject, opts.ground_truth, out);
  }

  for (const AreaInstance& a : frame.areas) {
    const std::string subject = detail::subject_of("area", a.id);
    detail::check_polyline(a.curve, subject, "curve", out);
    detail::check_range(a.curve, subject, "curve", grid, opts.range_margin_m,
                        out);
    if (a.class_id != kAreaPedestrianCrossing && a.class_id != kAreaRoadBoundary)
      out.push_back({subject, "class_id", "area class outside vocabulary"});
    detail::check_confidence(a.confidence, subject, opts.ground_truth, out);
  }

  for (const TrafficElement& te : frame.traffic_elements) {
    const std::string subject = detail::subject_of("traffic_element", te.id);
    if (!te.box.valid())
      out.push_back({subject, "box", "degenerate box"});
    else if (te.box.x1 < 0.0 || te.box.y1 < 0.0)
      out.push_back({subject, "box", "negative pixel coordinate"});
    if (te.class_id < 0 || te.class_id >= opts.traffic_class_count)
      out.push_back({subject, "class_id", "traffic class outside vocabulary"});
    detail::check_confidence(te.confidence, subject, opts.ground_truth, out);
  }

  detail::check_scores(frame.topology.ll_scores, frame.lane_segments.size(),
                       frame.lane_segments.size(), "ll_scores",
                       opts.ground_truth, out);
  detail::check_scores(frame.topology.lt_scores, frame.lane_segments.size(),
                       frame.traffic_elements.size(), "lt_scores",
                       opts.ground_truth, out);

  detail::check_unique_ids(frame.lane_segments, "lane_segment", out);
  detail::check_unique_ids(frame.areas, "area", out);
  detail::check_unique_ids(frame.traffic_elements, "traffic_element", out);

  return out;
}

}  // namespace laneval
