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
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "laneval/geometry.hpp"
#include "laneval/metrics.hpp"
#include "laneval/scene_io.hpp"
#include "laneval/types.hpp"

namespace laneval {

namespace detail {

// Hand-rolled generator so archives are byte-identical on every platform;
// std:: distributions are implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform() {  // [0, 1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  std::size_t below(std::size_t n) { return n ? next() % n : 0; }

  double normal(double sigma) {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i)
      std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::uint64_t state_;
};

}  // namespace detail

enum class LaneLayout { kStraight, kArc };

struct SceneSpec {
  int frames = 1;
  int lanes = 3;
  int areas = 2;
  int traffic_elements = 2;
  LaneLayout layout = LaneLayout::kStraight;
  std::uint64_t seed = 0;
  int lane_points = 11;
  double lane_width = 3.5;
};

/// Deterministic synthetic scene: chained lanes with consistent boundaries
/// (left is +half-width along the in-plane normal), chained lane-lane
/// topology, traffic elements attached to lane heads, and areas inside the
/// BEV range. Byte-identical output per (spec, seed).
inline SceneArchive generate_scene(const SceneSpec& spec) {
  SceneArchive archive;
  std::ostringstream scene_id;
  scene_id << "synth-" << spec.seed;
  archive.scene_id = scene_id.str();

  const int n_points = spec.lane_points;
  const double half_width = spec.lane_width / 2.0;

  for (int f = 0; f < spec.frames; ++f) {
    Frame frame;
    std::ostringstream frame_id;
    frame_id << std::setw(6) << std::setfill('0') << f;
    frame.frame_id = frame_id.str();

    const double lateral = ((f % 5) - 2) * 2.0;  // dyadic per-frame variation

    SdMap sd_map;

    if (spec.lanes > 0) {
      if (spec.layout == LaneLayout::kStraight) {
        const double span = 90.0;
        const double len = span / spec.lanes;
        const double x_start = -45.0;
        for (int i = 0; i < spec.lanes; ++i) {
          LaneSegment ls;
          ls.id = i + 1;
          ls.class_id = 0;
          ls.left_type = kLineSolid;
          ls.right_type = (i % 2 == 0) ? kLineDashed : kLineSolid;
          ls.confidence = 1.0;
          const double x0 = x_start + i * len;
          for (int k = 0; k < n_points; ++k) {
            const double x = x0 + len * k / (n_points - 1);
            ls.centerline.points.push_back({x, lateral, 0.0});
            ls.left_boundary.points.push_back({x, lateral + half_width, 0.0});
            ls.right_boundary.points.push_back({x, lateral - half_width, 0.0});
          }
          frame.lane_segments.push_back(std::move(ls));
        }
        SdPolyline road;
        road.road_type = 0;
        road.line.points.push_back({x_start, lateral, 0.0});
        road.line.points.push_back({x_start + span, lateral, 0.0});
        sd_map.polylines.push_back(std::move(road));
      } else {
        // Circular arc around (0, cy): stays inside the window and keeps the
        // samples evenly spaced in arc length.
        const double radius = 80.0 + lateral;
        const double cy = -80.0;
        const double theta_max = std::asin(45.0 / radius);
        const double dtheta = 2.0 * theta_max / spec.lanes;
        for (int i = 0; i < spec.lanes; ++i) {
          LaneSegment ls;
          ls.id = i + 1;
          ls.class_id = 0;
          ls.left_type = kLineSolid;
          ls.right_type = (i % 2 == 0) ? kLineDashed : kLineSolid;
          ls.confidence = 1.0;
          const double theta0 = -theta_max + i * dtheta;
          for (int k = 0; k < n_points; ++k) {
            const double theta = theta0 + dtheta * k / (n_points - 1);
            auto at_radius = [&](double r) -> Point3 {
              return {r * std::sin(theta), cy + r * std::cos(theta), 0.0};
            };
            ls.centerline.points.push_back(at_radius(radius));
            ls.left_boundary.points.push_back(at_radius(radius + half_width));
            ls.right_boundary.points.push_back(at_radius(radius - half_width));
          }
          frame.lane_segments.push_back(std::move(ls));
        }
        SdPolyline road;
        road.road_type = 0;
        for (int k = 0; k <= 16; ++k) {
          const double theta = -theta_max + 2.0 * theta_max * k / 16.0;
          road.line.points.push_back(
              {radius * std::sin(theta), cy + radius * std::cos(theta), 0.0});
        }
        sd_map.polylines.push_back(std::move(road));
      }
    }

    for (int j = 0; j < spec.areas; ++j) {
      AreaInstance area;
      area.id = 101 + j;
      area.confidence = 1.0;
      if (j % 2 == 0) {
        area.class_id = kAreaPedestrianCrossing;
        const double cx = -40.0 + 10.0 * j;
        area.curve.points = {{cx - 2.0, 6.0, 0.0},
                             {cx + 2.0, 6.0, 0.0},
                             {cx + 2.0, 10.0, 0.0},
                             {cx - 2.0, 10.0, 0.0},
                             {cx - 2.0, 6.0, 0.0}};
      } else {
        area.class_id = kAreaRoadBoundary;
        const double y = -12.0 - 2.0 * (j / 2);
        const int segs = 8;
        for (int k = 0; k <= segs; ++k)
          area.curve.points.push_back({-40.0 + 80.0 * k / segs, y, 0.0});
        SdPolyline boundary;
        boundary.road_type = 1;
        boundary.line.points.push_back({-40.0, y, 0.0});
        boundary.line.points.push_back({40.0, y, 0.0});
        sd_map.polylines.push_back(std::move(boundary));
      }
      frame.areas.push_back(std::move(area));
    }

    for (int k = 0; k < spec.traffic_elements; ++k) {
      TrafficElement te;
      te.id = 201 + k;
      te.class_id = k % 4;
      te.confidence = 1.0;
      const double x = 50.0 + 120.0 * k;
      te.box = {x, 400.0, x + 80.0, 520.0};
      frame.traffic_elements.push_back(te);
    }

    frame.topology.ll_scores = ScoreMatrix(frame.lane_segments.size(),
                                           frame.lane_segments.size(), 0.0);
    for (int i = 0; i + 1 < spec.lanes; ++i)
      frame.topology.ll_scores.at(static_cast<std::size_t>(i),
                                  static_cast<std::size_t>(i + 1)) = 1.0;
    frame.topology.lt_scores = ScoreMatrix(frame.lane_segments.size(),
                                           frame.traffic_elements.size(), 0.0);
    for (int k = 0; k < spec.traffic_elements && spec.lanes > 0; ++k)
      frame.topology.lt_scores.at(static_cast<std::size_t>(k % spec.lanes),
                                  static_cast<std::size_t>(k)) = 1.0;

    archive.frames.push_back(std::move(frame));
    archive.sd_maps.emplace_back(std::move(sd_map));
  }
  return archive;
}

inline SceneArchive generate_scene(int n_lanes, int n_areas, int n_tes,
                                   LaneLayout layout, std::uint64_t seed) {
  SceneSpec spec;
  spec.lanes = n_lanes;
  spec.areas = n_areas;
  spec.traffic_elements = n_tes;
  spec.layout = layout;
  spec.seed = seed;
  return generate_scene(spec);
}

// ---------------------------------------------------------------------------
// Perturbation

enum class JitterMode {
  kRigidInstance,    // one offset per instance, centerline and boundaries alike
  kRigidCenterline,  // offset lane centerlines only
  kPerPoint,         // independent Gaussian noise per point
};

struct PerturbationSpec {
  double point_jitter_sigma = 0.0;  // meters; rigid modes use it as the exact offset norm
  JitterMode jitter_mode = JitterMode::kRigidInstance;
  double drop_rate = 0.0;           // fraction of instances removed, per family
  int false_positive_count = 0;     // far-away lane instances injected per frame
  double confidence_noise = 0.0;    // kept confidences drawn from [1-noise, 1]
  double topology_flip_rate = 0.0;  // fraction of true edges zeroed
  std::uint64_t seed = 0;
};

/// Closed-form outcome bounds for the analytically forced cases. A field is
/// set only when the perturbation combination forces it exactly.
struct ExpectedOutcome {
  std::optional<double> det_l;
  std::optional<double> det_a;
  std::optional<double> det_t;
  std::optional<double> top_ll;
  std::optional<double> top_lt;
  std::optional<double> frechet_ap_family;
  std::optional<double> chamfer_ap_family;
  std::optional<double> olus;
  std::vector<std::string> notes;
};

struct PerturbResult {
  SceneArchive predictions;
  ExpectedOutcome expected;
};

namespace detail {

inline std::vector<std::size_t> pick_dropped(std::size_t n, double rate,
                                             SplitMix64& rng) {
  const std::size_t k =
      static_cast<std::size_t>(std::floor(rate * static_cast<double>(n) + 1e-9));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<std::size_t> dropped(order.begin(),
                                   order.begin() + static_cast<long>(std::min(k, n)));
  std::sort(dropped.begin(), dropped.end());
  return dropped;
}

inline bool is_dropped(const std::vector<std::size_t>& dropped, std::size_t i) {
  return std::binary_search(dropped.begin(), dropped.end(), i);
}

inline void translate(Polyline3& line, const Point3& offset) {
  for (Point3& p : line.points) p = p + offset;
}

inline void jitter_points(Polyline3& line, double sigma, SplitMix64& rng) {
  for (Point3& p : line.points) {
    p.x += rng.normal(sigma);
    p.y += rng.normal(sigma);
    p.z += rng.normal(sigma);
  }
}

// Lower bound on pairwise lane separation: any monotone coupling pairs the
// endpoints, so max(first-first, last-last) bounds the Frechet distance from
// below.
inline double lane_separation_lower_bound(const std::vector<LaneSegment>& lanes) {
  double lb = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    for (std::size_t j = i + 1; j < lanes.size(); ++j) {
      if (lanes[i].class_id != lanes[j].class_id) continue;
      const double first = point_distance(lanes[i].centerline[0],
                                          lanes[j].centerline[0]);
      const double last =
          point_distance(lanes[i].centerline.points.back(),
                         lanes[j].centerline.points.back());
      lb = std::min(lb, std::max(first, last));
    }
  }
  return lb;
}

inline bool lanes_are_axis_straight(const std::vector<LaneSegment>& lanes) {
  for (const LaneSegment& ls : lanes)
    for (const Polyline3* line :
         {&ls.centerline, &ls.left_boundary, &ls.right_boundary})
      for (const Point3& p : line->points)
        if (p.y != line->points[0].y || p.z != line->points[0].z) return false;
  return true;
}

inline double fraction_passing(const std::vector<double>& thresholds,
                               double distance) {
  std::size_t pass = 0;
  for (double t : thresholds) pass += distance <= t;
  return static_cast<double>(pass) / static_cast<double>(thresholds.size());
}

inline bool knife_edge(const std::vector<double>& thresholds, double distance) {
  for (double t : thresholds)
    if (std::abs(t - distance) < 1e-9) return true;
  return false;
}

}  // namespace detail

/// Applies jitter, dropout, false-positive injection, confidence noise, and
/// topology edge zeroing to a ground-truth archive, producing a prediction
/// archive and the closed-form metric expectations the perturbation forces.
inline PerturbResult perturb(const SceneArchive& gt,
                             const PerturbationSpec& spec,
                             const MetricConfig& cfg = {}) {
  cfg.require_valid();
  detail::SplitMix64 rng(spec.seed ^ 0xC0FFEEULL);

  PerturbResult result;
  result.predictions.scene_id = gt.scene_id;
  result.predictions.sd_maps = gt.sd_maps;

  // Dataset-wide tallies for the expectation bookkeeping.
  std::size_t lane_total = 0, lane_kept = 0;
  std::map<int, std::size_t> area_total, area_kept;
  std::map<int, std::size_t> te_total, te_kept;
  std::size_t ll_vertices = 0, lt_vertices = 0;
  double ll_ap_sum = 0.0, lt_ap_sum = 0.0;
  bool straight = true;
  double separation_lb = std::numeric_limits<double>::infinity();

  const double sigma = spec.point_jitter_sigma;
  const bool rigid = spec.jitter_mode != JitterMode::kPerPoint &&
                     sigma > 0.0;

  for (const Frame& gt_frame : gt.frames) {
    straight = straight && detail::lanes_are_axis_straight(gt_frame.lane_segments);
    separation_lb = std::min(
        separation_lb,
        detail::lane_separation_lower_bound(gt_frame.lane_segments));

    Frame pred;
    pred.frame_id = gt_frame.frame_id;

    const auto lane_drop =
        detail::pick_dropped(gt_frame.lane_segments.size(), spec.drop_rate, rng);
    const auto area_drop =
        detail::pick_dropped(gt_frame.areas.size(), spec.drop_rate, rng);
    const auto te_drop = detail::pick_dropped(gt_frame.traffic_elements.size(),
                                              spec.drop_rate, rng);

    lane_total += gt_frame.lane_segments.size();
    for (const AreaInstance& a : gt_frame.areas) area_total[a.class_id]++;
    for (const TrafficElement& te : gt_frame.traffic_elements)
      te_total[te.class_id]++;

    // Kept instances, jittered and renumbered; old index -> new index.
    std::vector<long> lane_map(gt_frame.lane_segments.size(), -1);
    for (std::size_t i = 0; i < gt_frame.lane_segments.size(); ++i) {
      if (detail::is_dropped(lane_drop, i)) continue;
      LaneSegment ls = gt_frame.lane_segments[i];
      if (sigma > 0.0) {
        if (spec.jitter_mode == JitterMode::kPerPoint) {
          detail::jitter_points(ls.centerline, sigma, rng);
          detail::jitter_points(ls.left_boundary, sigma, rng);
          detail::jitter_points(ls.right_boundary, sigma, rng);
        } else {
          const Point3 offset{0.0, rng.uniform() < 0.5 ? sigma : -sigma, 0.0};
          detail::translate(ls.centerline, offset);
          if (spec.jitter_mode == JitterMode::kRigidInstance) {
            detail::translate(ls.left_boundary, offset);
            detail::translate(ls.right_boundary, offset);
          }
        }
      }
      if (spec.confidence_noise > 0.0)
        ls.confidence = std::max(0.0, 1.0 - spec.confidence_noise * rng.uniform());
      lane_map[i] = static_cast<long>(pred.lane_segments.size());
      pred.lane_segments.push_back(std::move(ls));
      ++lane_kept;
    }

    std::vector<long> te_map(gt_frame.traffic_elements.size(), -1);
    for (std::size_t i = 0; i < gt_frame.traffic_elements.size(); ++i) {
      if (detail::is_dropped(te_drop, i)) continue;
      TrafficElement te = gt_frame.traffic_elements[i];
      if (spec.confidence_noise > 0.0)
        te.confidence = std::max(0.0, 1.0 - spec.confidence_noise * rng.uniform());
      te_map[i] = static_cast<long>(pred.traffic_elements.size());
      pred.traffic_elements.push_back(te);
      te_kept[te.class_id]++;
    }

    for (std::size_t i = 0; i < gt_frame.areas.size(); ++i) {
      if (detail::is_dropped(area_drop, i)) continue;
      AreaInstance a = gt_frame.areas[i];
      if (sigma > 0.0) {
        if (spec.jitter_mode == JitterMode::kPerPoint)
          detail::jitter_points(a.curve, sigma, rng);
        else if (spec.jitter_mode == JitterMode::kRigidInstance)
          detail::translate(a.curve,
                            {0.0, rng.uniform() < 0.5 ? sigma : -sigma, 0.0});
      }
      if (spec.confidence_noise > 0.0)
        a.confidence = std::max(0.0, 1.0 - spec.confidence_noise * rng.uniform());
      area_kept[a.class_id]++;
      pred.areas.push_back(std::move(a));
    }

    // False positives: lane instances far below the roadway (well beyond
    // three times the widest gate) with deliberately low confidence.
    for (int j = 0; j < spec.false_positive_count; ++j) {
      LaneSegment fp;
      fp.id = 9000 + j;
      fp.class_id = 0;
      fp.left_type = kLineSolid;
      fp.right_type = kLineSolid;
      fp.confidence = 0.3;
      const double y = -20.0 - 2.0 * (j % 2);
      const double x0 = -45.0 + 10.0 * (j / 2 % 8) + rng.uniform();
      for (int k = 0; k < 11; ++k) {
        const double x = x0 + 8.0 * k / 10.0;
        fp.centerline.points.push_back({x, y, 0.0});
        fp.left_boundary.points.push_back({x, y + 1.75, 0.0});
        fp.right_boundary.points.push_back({x, y - 1.75, 0.0});
      }
      pred.lane_segments.push_back(std::move(fp));
    }

    // Rebuild prediction topology over kept instances, then zero a chosen
    // fraction of the surviving true edges.
    pred.topology.ll_scores =
        ScoreMatrix(pred.lane_segments.size(), pred.lane_segments.size(), 0.0);
    pred.topology.lt_scores = ScoreMatrix(pred.lane_segments.size(),
                                          pred.traffic_elements.size(), 0.0);
    std::vector<std::pair<std::size_t, std::size_t>> ll_translated, lt_translated;
    const ScoreMatrix& gt_ll = gt_frame.topology.ll_scores;
    const ScoreMatrix& gt_lt = gt_frame.topology.lt_scores;
    for (std::size_t u = 0; u < gt_ll.rows(); ++u)
      for (std::size_t v = 0; v < gt_ll.cols(); ++v)
        if (gt_ll.at(u, v) != 0.0 && lane_map[u] >= 0 && lane_map[v] >= 0)
          ll_translated.emplace_back(static_cast<std::size_t>(lane_map[u]),
                                     static_cast<std::size_t>(lane_map[v]));
    for (std::size_t u = 0; u < gt_lt.rows(); ++u)
      for (std::size_t v = 0; v < gt_lt.cols(); ++v)
        if (gt_lt.at(u, v) != 0.0 && lane_map[u] >= 0 && te_map[v] >= 0)
          lt_translated.emplace_back(static_cast<std::size_t>(lane_map[u]),
                                     static_cast<std::size_t>(te_map[v]));

    auto zero_some = [&](std::vector<std::pair<std::size_t, std::size_t>>& edges) {
      const std::size_t z = static_cast<std::size_t>(std::floor(
          spec.topology_flip_rate * static_cast<double>(edges.size()) + 1e-9));
      rng.shuffle(edges);
      std::vector<std::pair<std::size_t, std::size_t>> zeroed(
          edges.begin(), edges.begin() + static_cast<long>(std::min(z, edges.size())));
      return zeroed;
    };
    auto ll_zeroed = zero_some(ll_translated);
    auto lt_zeroed = zero_some(lt_translated);
    for (const auto& e : ll_translated) pred.topology.ll_scores.at(e.first, e.second) = 1.0;
    for (const auto& e : ll_zeroed) pred.topology.ll_scores.at(e.first, e.second) = 0.0;
    for (const auto& e : lt_translated) pred.topology.lt_scores.at(e.first, e.second) = 1.0;
    for (const auto& e : lt_zeroed) pred.topology.lt_scores.at(e.first, e.second) = 0.0;

    // Per-vertex expected AP: edges survive iff both endpoints kept and the
    // edge was not zeroed; surviving scores are all 1, so each vertex scores
    // surviving/total.
    auto count_edges = [](const ScoreMatrix& m, std::size_t u) {
      std::size_t n = 0;
      for (std::size_t v = 0; v < m.cols(); ++v) n += m.at(u, v) != 0.0;
      return n;
    };
    for (std::size_t u = 0; u < gt_ll.rows(); ++u) {
      const std::size_t total = count_edges(gt_ll, u);
      if (total == 0) continue;
      std::size_t surviving = 0;
      for (std::size_t v = 0; v < gt_ll.cols(); ++v) {
        if (gt_ll.at(u, v) == 0.0 || lane_map[u] < 0 || lane_map[v] < 0) continue;
        const std::pair<std::size_t, std::size_t> e{
            static_cast<std::size_t>(lane_map[u]),
            static_cast<std::size_t>(lane_map[v])};
        if (pred.topology.ll_scores.at(e.first, e.second) != 0.0) ++surviving;
      }
      ++ll_vertices;
      ll_ap_sum += static_cast<double>(surviving) / static_cast<double>(total);
    }
    for (std::size_t u = 0; u < gt_lt.rows(); ++u) {
      const std::size_t total = count_edges(gt_lt, u);
      if (total == 0) continue;
      std::size_t surviving = 0;
      for (std::size_t v = 0; v < gt_lt.cols(); ++v) {
        if (gt_lt.at(u, v) == 0.0 || lane_map[u] < 0 || te_map[v] < 0) continue;
        if (pred.topology.lt_scores.at(static_cast<std::size_t>(lane_map[u]),
                                       static_cast<std::size_t>(te_map[v])) != 0.0)
          ++surviving;
      }
      ++lt_vertices;
      lt_ap_sum += static_cast<double>(surviving) / static_cast<double>(total);
    }

    result.predictions.frames.push_back(std::move(pred));
  }

  // ---- expectation registration -------------------------------------------
  ExpectedOutcome& exp = result.expected;
  const double rigid_offset = rigid ? sigma : 0.0;
  const bool per_point_noise = spec.jitter_mode == JitterMode::kPerPoint && sigma > 0.0;
  const double max_gate =
      std::max(cfg.frechet_thresholds.back(), cfg.topology_frechet_gate_m);
  // Identity matching must stay forced: offsets may not reach other
  // instances or any gate knife-edge.
  const bool separation_ok = separation_lb > max_gate + rigid_offset + 1e-9;

  const double lane_keep =
      lane_total == 0 ? 1.0
                      : static_cast<double>(lane_kept) / static_cast<double>(lane_total);

  if (!per_point_noise && separation_ok &&
      !detail::knife_edge(cfg.frechet_thresholds, rigid_offset)) {
    // Any rigid translation yields a Frechet distance of exactly the offset
    // norm (the coupling pins both endpoint pairs).
    exp.frechet_ap_family =
        detail::fraction_passing(cfg.frechet_thresholds, rigid_offset) * lane_keep;
    exp.notes.push_back("frechet family forced by rigid offset and drops");

    const bool boundaries_moved =
        spec.jitter_mode == JitterMode::kRigidInstance && rigid_offset > 0.0;
    std::optional<double> chamfer_family;
    if (!boundaries_moved) {
      chamfer_family = lane_keep;
    } else if (straight &&
               !detail::knife_edge(cfg.chamfer_thresholds, rigid_offset)) {
      // Straight axis-aligned lines moved along the normal: every nearest
      // neighbor sits at exactly the offset norm.
      chamfer_family =
          detail::fraction_passing(cfg.chamfer_thresholds, rigid_offset) * lane_keep;
    }
    if (chamfer_family) {
      exp.chamfer_ap_family = chamfer_family;
      exp.det_l = (*exp.frechet_ap_family + *chamfer_family) / 2.0;
    }
  }

  // Areas: rigid offsets bound Chamfer by the offset norm, so detection is
  // unaffected whenever the offset stays under the smallest gate.
  if (!per_point_noise &&
      (spec.jitter_mode == JitterMode::kRigidCenterline || sigma == 0.0 ||
       (spec.jitter_mode == JitterMode::kRigidInstance &&
        sigma < cfg.chamfer_thresholds.front() - 1e-9))) {
    std::vector<double> per_class;
    for (const auto& [cls, total] : area_total) {
      if (total == 0) continue;
      per_class.push_back(static_cast<double>(area_kept[cls]) /
                          static_cast<double>(total));
    }
    if (!per_class.empty()) {
      double s = 0.0;
      for (double v : per_class) s += v;
      exp.det_a = s / static_cast<double>(per_class.size());
    } else {
      exp.det_a = 1.0;  // vacuous
    }
  }

  {
    std::vector<double> per_class;
    for (const auto& [cls, total] : te_total) {
      if (total == 0) continue;
      per_class.push_back(static_cast<double>(te_kept[cls]) /
                          static_cast<double>(total));
    }
    exp.det_t = per_class.empty()
                    ? 1.0
                    : [&] {
                        double s = 0.0;
                        for (double v : per_class) s += v;
                        return s / static_cast<double>(per_class.size());
                      }();
  }

  const bool topology_matching_forced =
      !per_point_noise && separation_ok &&
      rigid_offset < cfg.topology_frechet_gate_m - 1e-9;
  if (topology_matching_forced) {
    exp.top_ll = ll_vertices == 0 ? 1.0 : ll_ap_sum / static_cast<double>(ll_vertices);
    exp.top_lt = lt_vertices == 0 ? 1.0 : lt_ap_sum / static_cast<double>(lt_vertices);
  }

  if (spec.confidence_noise > 0.5) {
    // Low-confidence false positives could outrank true positives; nothing
    // is forced any more.
    exp.det_l.reset();
    exp.det_a.reset();
    exp.det_t.reset();
    exp.frechet_ap_family.reset();
    exp.chamfer_ap_family.reset();
    exp.notes.push_back("confidence noise too large for closed forms");
  }

  if (exp.det_l && exp.det_a && exp.det_t && exp.top_ll && exp.top_lt)
    exp.olus = olus(*exp.det_l, *exp.det_a, *exp.det_t, *exp.top_ll, *exp.top_lt);

  return result;
}

}  // namespace laneval
