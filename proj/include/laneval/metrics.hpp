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
#include <atomic>
#include <cmath>
#include <exception>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "laneval/assignment.hpp"
#include "laneval/geometry.hpp"
#include "laneval/types.hpp"

namespace laneval {

struct MetricConfig {
  std::vector<double> frechet_thresholds{1.0, 2.0, 3.0};  // meters
  std::vector<double> chamfer_thresholds{0.5, 1.0, 1.5};  // meters
  std::vector<double> iou_thresholds{0.75};
  double topology_frechet_gate_m = 2.0;  // lane matching for TOP metrics
  double topology_iou_gate = 0.75;       // traffic-element matching for TOP_lt
  ApInterpolation interpolation = ApInterpolation::kAllPoint;
  // Vacuous-AP policy: classes with predictions but no ground truth anywhere
  // count as AP 0 when set; classes with neither are always excluded.
  bool include_pred_only_classes = false;
  bool planar_distances = false;  // project all distances to the BEV plane
  int area_resample_count = 100;  // points per side before area Chamfer
  int workers = 1;

  void require_valid() const {
    auto check = [](const std::vector<double>& v, const char* name) {
      if (v.empty())
        throw std::invalid_argument(std::string(name) + ": empty threshold list");
      double prev = 0.0;
      for (double t : v) {
        if (!(t > 0.0) || !std::isfinite(t))
          throw std::invalid_argument(std::string(name) + ": thresholds must be positive");
        if (!(t > prev))
          throw std::invalid_argument(std::string(name) + ": thresholds must be strictly increasing");
        prev = t;
      }
    };
    check(frechet_thresholds, "frechet_thresholds");
    check(chamfer_thresholds, "chamfer_thresholds");
    check(iou_thresholds, "iou_thresholds");
    if (!(topology_frechet_gate_m > 0.0))
      throw std::invalid_argument("topology_frechet_gate_m must be positive");
    if (!(topology_iou_gate > 0.0) || topology_iou_gate > 1.0)
      throw std::invalid_argument("topology_iou_gate must be in (0,1]");
    if (area_resample_count < 2)
      throw std::invalid_argument("area_resample_count must be >= 2");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  }
};

struct MetricValue {
  double value = 0.0;
  std::map<std::string, double> per_class;
  std::map<std::string, double> per_threshold;
};

/// The aggregate score: (det_l + det_a + det_t + sqrt(top_ll) + sqrt(top_lt)) / 5.
inline double olus(double det_l, double det_a, double det_t, double top_ll,
                   double top_lt) {
  for (double v : {det_l, det_a, det_t, top_ll, top_lt})
    if (!(v >= 0.0) || !(v <= 1.0))
      throw std::invalid_argument("olus: inputs must lie in [0,1]");
  return (det_l + det_a + det_t + std::sqrt(top_ll) + std::sqrt(top_lt)) / 5.0;
}

namespace detail {

inline void check_aligned(const std::vector<Frame>& preds,
                          const std::vector<Frame>& gts) {
  if (preds.size() != gts.size()) {
    std::ostringstream os;
    os << "frame count mismatch: " << gts.size() << " ground-truth vs "
       << preds.size() << " prediction frames";
    throw std::invalid_argument(os.str());
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].frame_id != gts[i].frame_id) {
      std::ostringstream os;
      os << "frame id mismatch at index " << i << ": ground truth '"
         << gts[i].frame_id << "' vs prediction '" << preds[i].frame_id << "'";
      throw std::invalid_argument(os.str());
    }
  }
}

inline void check_topology_dims(const Frame& f) {
  const std::size_t lanes = f.lane_segments.size();
  const std::size_t tes = f.traffic_elements.size();
  if (f.topology.ll_scores.rows() != lanes ||
      f.topology.ll_scores.cols() != lanes ||
      f.topology.lt_scores.rows() != lanes ||
      f.topology.lt_scores.cols() != tes) {
    std::ostringstream os;
    os << "topology matrix dimensions do not match instance lists in frame '"
       << f.frame_id << "'";
    throw std::invalid_argument(os.str());
  }
}

template <class Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  workers = std::max(1, workers);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int count = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  pool.reserve(static_cast<std::size_t>(count));
  for (int w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct Aabb {
  Point3 lo{1e300, 1e300, 1e300};
  Point3 hi{-1e300, -1e300, -1e300};

  void add(const Point3& p) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
    hi.z = std::max(hi.z, p.z);
  }
};

inline Aabb bounds_of(const Polyline3& line) {
  Aabb box;
  for (const Point3& p : line.points) box.add(p);
  return box;
}

// Distance between boxes lower-bounds every point-pair distance, hence also
// Chamfer and Frechet; pairs beyond the largest gate skip the full DP.
inline double aabb_gap(const Aabb& a, const Aabb& b, bool planar) {
  const double gx = std::max({0.0, a.lo.x - b.hi.x, b.lo.x - a.hi.x});
  const double gy = std::max({0.0, a.lo.y - b.hi.y, b.lo.y - a.hi.y});
  const double gz = planar ? 0.0 : std::max({0.0, a.lo.z - b.hi.z, b.lo.z - a.hi.z});
  return std::sqrt(gx * gx + gy * gy + gz * gz);
}

struct DetectionRecord {
  double confidence = 0.0;
  bool tp = false;
};

// Per-frame detection outcomes for one AP family: class -> per-threshold
// record lists, plus this frame's ground-truth count per class.
struct FamilyPiece {
  std::map<int, std::vector<std::vector<DetectionRecord>>> per_class;
  std::map<int, std::size_t> gt_counts;
  std::set<int> pred_classes;
};

// `gates` are cost-space cutoffs aligned with the reported threshold list
// (identical for distance metrics, 1 - t for IoU metrics).
template <class Instance>
FamilyPiece run_family(const std::vector<Instance>& preds,
                       const std::vector<Instance>& gts,
                       const CostMatrix& costs,
                       const std::vector<double>& gates) {
  FamilyPiece piece;
  for (const Instance& g : gts) piece.gt_counts[g.class_id]++;
  for (const Instance& p : preds) piece.pred_classes.insert(p.class_id);

  for (std::size_t ti = 0; ti < gates.size(); ++ti) {
    const MatchResult match = match_with_costs(costs, gates[ti]);
    std::vector<char> matched(preds.size(), 0);
    for (const auto& [pi, gi] : match.matches) matched[pi] = 1;
    for (std::size_t pi = 0; pi < preds.size(); ++pi) {
      auto& lists = piece.per_class[preds[pi].class_id];
      if (lists.empty()) lists.resize(gates.size());
      lists[ti].push_back({preds[pi].confidence, matched[pi] != 0});
    }
  }
  return piece;
}

struct FamilyAccumulator {
  std::vector<double> thresholds;
  std::map<int, std::vector<std::vector<DetectionRecord>>> per_class;
  std::map<int, std::size_t> gt_counts;
  std::set<int> pred_classes;

  void merge(const FamilyPiece& piece) {
    for (const auto& [cls, lists] : piece.per_class) {
      auto& dst = per_class[cls];
      if (dst.empty()) dst.resize(thresholds.size());
      for (std::size_t ti = 0; ti < lists.size(); ++ti)
        dst[ti].insert(dst[ti].end(), lists[ti].begin(), lists[ti].end());
    }
    for (const auto& [cls, n] : piece.gt_counts) gt_counts[cls] += n;
    pred_classes.insert(piece.pred_classes.begin(), piece.pred_classes.end());
  }
};

inline std::string format_threshold(double t) {
  std::ostringstream os;
  os << std::setprecision(9) << t;
  return os.str();
}

// AP grid over (class, threshold), averaged over thresholds innermost and
// classes outermost. No qualifying class at all scores vacuous 1.
struct FamilySummary {
  double value = 1.0;
  std::map<int, double> class_means;                 // class -> mean over thresholds
  std::vector<double> threshold_means;               // threshold -> mean over classes
};

inline FamilySummary summarize_family(const FamilyAccumulator& acc,
                                      const MetricConfig& cfg) {
  std::set<int> classes;
  for (const auto& [cls, n] : acc.gt_counts)
    if (n > 0) classes.insert(cls);
  if (cfg.include_pred_only_classes)
    classes.insert(acc.pred_classes.begin(), acc.pred_classes.end());

  FamilySummary summary;
  summary.threshold_means.assign(acc.thresholds.size(), 0.0);
  if (classes.empty()) return summary;  // vacuous: nothing annotated, nothing claimed

  std::vector<std::vector<double>> grid;  // [class][threshold]
  for (int cls : classes) {
    std::vector<double> row(acc.thresholds.size(), 0.0);
    const auto gt_it = acc.gt_counts.find(cls);
    const std::size_t num_gt = gt_it == acc.gt_counts.end() ? 0 : gt_it->second;
    const auto det_it = acc.per_class.find(cls);
    for (std::size_t ti = 0; ti < acc.thresholds.size(); ++ti) {
      ApInput input;
      input.num_ground_truth = num_gt;
      if (det_it != acc.per_class.end())
        for (const DetectionRecord& r : det_it->second[ti])
          input.detections.emplace_back(r.confidence, r.tp);
      row[ti] = average_precision(std::move(input), cfg.interpolation);
    }
    grid.push_back(row);
  }

  double class_sum = 0.0;
  std::size_t ci = 0;
  for (int cls : classes) {
    double thr_sum = 0.0;
    for (double ap : grid[ci]) thr_sum += ap;
    const double mean = thr_sum / static_cast<double>(acc.thresholds.size());
    summary.class_means[cls] = mean;
    class_sum += mean;
    ++ci;
  }
  summary.value = class_sum / static_cast<double>(classes.size());

  for (std::size_t ti = 0; ti < acc.thresholds.size(); ++ti) {
    double s = 0.0;
    for (const auto& row : grid) s += row[ti];
    summary.threshold_means[ti] = s / static_cast<double>(grid.size());
  }
  return summary;
}

inline std::string lane_class_label(int cls) {
  return "class=" + std::to_string(cls);
}
inline std::string area_class_label(int cls) {
  return std::string("class=") + area_class_name(cls);
}

inline void emit_family(const FamilyAccumulator& acc, const FamilySummary& s,
                        const std::string& prefix,
                        std::string (*label)(int), MetricValue& out) {
  for (const auto& [cls, ap] : s.class_means)
    out.per_class[prefix + "/" + label(cls)] = ap;
  for (std::size_t ti = 0; ti < acc.thresholds.size(); ++ti)
    out.per_threshold[prefix + "@" + format_threshold(acc.thresholds[ti])] =
        s.threshold_means[ti];
}

// ---- per-frame cost matrices -------------------------------------------

inline CostMatrix lane_frechet_costs(const std::vector<LaneSegment>& preds,
                                     const std::vector<LaneSegment>& gts,
                                     double cutoff, bool planar) {
  CostMatrix costs(preds.size(), gts.size());
  std::vector<Aabb> pred_boxes(preds.size()), gt_boxes(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    pred_boxes[i] = bounds_of(preds[i].centerline);
  for (std::size_t j = 0; j < gts.size(); ++j)
    gt_boxes[j] = bounds_of(gts[j].centerline);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (preds[i].class_id != gts[j].class_id) continue;
      if (aabb_gap(pred_boxes[i], gt_boxes[j], planar) > cutoff) continue;
      const double d =
          discrete_frechet(preds[i].centerline, gts[j].centerline, planar);
      if (d <= cutoff) costs.at(i, j) = d;
    }
  }
  return costs;
}

inline CostMatrix lane_chamfer_costs(const std::vector<LaneSegment>& preds,
                                     const std::vector<LaneSegment>& gts,
                                     double cutoff, bool planar) {
  CostMatrix costs(preds.size(), gts.size());
  std::vector<Aabb> pred_boxes(preds.size()), gt_boxes(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    pred_boxes[i] = bounds_of(preds[i].left_boundary);
    for (const Point3& p : preds[i].right_boundary.points) pred_boxes[i].add(p);
  }
  for (std::size_t j = 0; j < gts.size(); ++j) {
    gt_boxes[j] = bounds_of(gts[j].left_boundary);
    for (const Point3& p : gts[j].right_boundary.points) gt_boxes[j].add(p);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (preds[i].class_id != gts[j].class_id) continue;
      if (aabb_gap(pred_boxes[i], gt_boxes[j], planar) > cutoff) continue;
      const double left =
          chamfer(preds[i].left_boundary, gts[j].left_boundary, planar).symmetric;
      const double right =
          chamfer(preds[i].right_boundary, gts[j].right_boundary, planar).symmetric;
      const double d = (left + right) / 2.0;
      if (d <= cutoff) costs.at(i, j) = d;
    }
  }
  return costs;
}

inline CostMatrix area_chamfer_costs(const std::vector<AreaInstance>& preds,
                                     const std::vector<AreaInstance>& gts,
                                     const MetricConfig& cfg, double cutoff) {
  std::vector<Polyline3> pred_lines(preds.size()), gt_lines(gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    pred_lines[i] = resample_polyline(preds[i].curve, cfg.area_resample_count);
  for (std::size_t j = 0; j < gts.size(); ++j)
    gt_lines[j] = resample_polyline(gts[j].curve, cfg.area_resample_count);

  CostMatrix costs(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const Aabb pb = bounds_of(pred_lines[i]);
    for (std::size_t j = 0; j < gts.size(); ++j) {
      if (preds[i].class_id != gts[j].class_id) continue;
      if (aabb_gap(pb, bounds_of(gt_lines[j]), cfg.planar_distances) > cutoff)
        continue;
      const double d =
          chamfer(pred_lines[i], gt_lines[j], cfg.planar_distances).symmetric;
      if (d <= cutoff) costs.at(i, j) = d;
    }
  }
  return costs;
}

inline CostMatrix traffic_iou_costs(const std::vector<TrafficElement>& preds,
                                    const std::vector<TrafficElement>& gts) {
  CostMatrix costs(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (preds[i].class_id == gts[j].class_id)
        costs.at(i, j) = 1.0 - box_iou(preds[i].box, gts[j].box);
  return costs;
}

// ---- topology ------------------------------------------------------------

// Per-vertex AP of projected edge scores against binary ground-truth edges.
// A projected score of zero means "no predicted connection": it does not
// enter the ranking, so silent heads score zero rather than luck into ties.
struct TopologyPiece {
  std::vector<double> vertex_aps;
};

inline TopologyPiece run_topology(const ScoreMatrix& projected,
                                  const ScoreMatrix& gt, bool skip_diagonal,
                                  ApInterpolation interp) {
  TopologyPiece piece;
  for (std::size_t u = 0; u < gt.rows(); ++u) {
    ApInput input;
    for (std::size_t v = 0; v < gt.cols(); ++v) {
      if (skip_diagonal && u == v) continue;
      const bool edge = gt.at(u, v) != 0.0;
      if (edge) ++input.num_ground_truth;
      const double score = projected.at(u, v);
      if (score > 0.0) input.detections.emplace_back(score, edge);
    }
    if (input.num_ground_truth == 0) continue;  // vertex has no outgoing edges
    piece.vertex_aps.push_back(average_precision(std::move(input), interp));
  }
  return piece;
}

inline ScoreMatrix project_topology(
    const ScoreMatrix& pred, std::size_t gt_rows, std::size_t gt_cols,
    const std::vector<std::pair<std::size_t, std::size_t>>& row_match,
    const std::vector<std::pair<std::size_t, std::size_t>>& col_match) {
  ScoreMatrix out(gt_rows, gt_cols, 0.0);
  for (const auto& [pr, gr] : row_match)
    for (const auto& [pc, gc] : col_match) out.at(gr, gc) = pred.at(pr, pc);
  return out;
}

// ---- shared evaluation pipeline -------------------------------------------

enum EvalParts : unsigned {
  kEvalLanes = 1u << 0,
  kEvalAreas = 1u << 1,
  kEvalTraffic = 1u << 2,
  kEvalTopology = 1u << 3,
  kEvalAll = 0xFu,
};

struct FramePieces {
  FamilyPiece lane_frechet;
  FamilyPiece lane_chamfer;
  FamilyPiece area;
  FamilyPiece traffic;
  TopologyPiece top_ll;
  TopologyPiece top_lt;
};

struct DatasetEvaluation {
  FamilyAccumulator lane_frechet;
  FamilyAccumulator lane_chamfer;
  FamilyAccumulator area;
  FamilyAccumulator traffic;
  std::vector<double> ll_vertex_aps;
  std::vector<double> lt_vertex_aps;
};

inline DatasetEvaluation evaluate_parts(const std::vector<Frame>& preds,
                                        const std::vector<Frame>& gts,
                                        const MetricConfig& cfg,
                                        unsigned parts) {
  cfg.require_valid();
  check_aligned(preds, gts);
  if (parts & kEvalTopology) {
    for (const Frame& f : preds) check_topology_dims(f);
    for (const Frame& f : gts) check_topology_dims(f);
  }

  const bool planar = cfg.planar_distances;
  const double frechet_cutoff =
      std::max(cfg.frechet_thresholds.back(), cfg.topology_frechet_gate_m);
  const double chamfer_cutoff = cfg.chamfer_thresholds.back();

  std::vector<FramePieces> pieces(gts.size());
  parallel_for(gts.size(), cfg.workers, [&](std::size_t f) {
    const Frame& pred = preds[f];
    const Frame& gt = gts[f];
    FramePieces& out = pieces[f];

    CostMatrix frechet_costs;
    if (parts & (kEvalLanes | kEvalTopology))
      frechet_costs = lane_frechet_costs(pred.lane_segments, gt.lane_segments,
                                         frechet_cutoff, planar);
    CostMatrix te_costs;
    if (parts & (kEvalTraffic | kEvalTopology))
      te_costs = traffic_iou_costs(pred.traffic_elements, gt.traffic_elements);

    if (parts & kEvalLanes) {
      out.lane_frechet = run_family(pred.lane_segments, gt.lane_segments,
                                    frechet_costs, cfg.frechet_thresholds);
      const CostMatrix chamfer_costs = lane_chamfer_costs(
          pred.lane_segments, gt.lane_segments, chamfer_cutoff, planar);
      out.lane_chamfer = run_family(pred.lane_segments, gt.lane_segments,
                                    chamfer_costs, cfg.chamfer_thresholds);
    }
    if (parts & kEvalAreas) {
      const CostMatrix area_costs =
          area_chamfer_costs(pred.areas, gt.areas, cfg, chamfer_cutoff);
      out.area = run_family(pred.areas, gt.areas, area_costs,
                            cfg.chamfer_thresholds);
    }
    if (parts & kEvalTraffic) {
      std::vector<double> iou_gates;  // cost space: IoU >= t means 1-IoU <= 1-t
      for (double t : cfg.iou_thresholds) iou_gates.push_back(1.0 - t);
      out.traffic = run_family(pred.traffic_elements, gt.traffic_elements,
                               te_costs, iou_gates);
    }

    if (parts & kEvalTopology) {
      const MatchResult lane_match =
          match_with_costs(frechet_costs, cfg.topology_frechet_gate_m);
      const MatchResult te_match =
          match_with_costs(te_costs, 1.0 - cfg.topology_iou_gate);
      const std::size_t gl = gt.lane_segments.size();
      const std::size_t gte = gt.traffic_elements.size();
      const ScoreMatrix ll_proj =
          project_topology(pred.topology.ll_scores, gl, gl, lane_match.matches,
                           lane_match.matches);
      const ScoreMatrix lt_proj =
          project_topology(pred.topology.lt_scores, gl, gte,
                           lane_match.matches, te_match.matches);
      out.top_ll = run_topology(ll_proj, gt.topology.ll_scores, true,
                                cfg.interpolation);
      out.top_lt = run_topology(lt_proj, gt.topology.lt_scores, false,
                                cfg.interpolation);
    }
  });

  // Deterministic merge in frame order; results are scheduling-independent.
  DatasetEvaluation result;
  result.lane_frechet.thresholds = cfg.frechet_thresholds;
  result.lane_chamfer.thresholds = cfg.chamfer_thresholds;
  result.area.thresholds = cfg.chamfer_thresholds;
  result.traffic.thresholds = cfg.iou_thresholds;
  for (const FramePieces& p : pieces) {
    result.lane_frechet.merge(p.lane_frechet);
    result.lane_chamfer.merge(p.lane_chamfer);
    result.area.merge(p.area);
    result.traffic.merge(p.traffic);
    result.ll_vertex_aps.insert(result.ll_vertex_aps.end(),
                                p.top_ll.vertex_aps.begin(),
                                p.top_ll.vertex_aps.end());
    result.lt_vertex_aps.insert(result.lt_vertex_aps.end(),
                                p.top_lt.vertex_aps.begin(),
                                p.top_lt.vertex_aps.end());
  }
  return result;
}

inline double mean_or_vacuous(const std::vector<double>& values) {
  if (values.empty()) return 1.0;
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

}  // namespace detail

/// Lane-segment detection: mean of a Frechet AP family on centerlines and a
/// Chamfer AP family on the left/right boundaries.
inline MetricValue det_l(const std::vector<Frame>& preds,
                         const std::vector<Frame>& gts,
                         const MetricConfig& cfg = {}) {
  const auto eval = detail::evaluate_parts(preds, gts, cfg, detail::kEvalLanes);
  const auto frechet =
      detail::summarize_family(eval.lane_frechet, cfg);
  const auto chamfer_s =
      detail::summarize_family(eval.lane_chamfer, cfg);
  MetricValue out;
  out.value = (frechet.value + chamfer_s.value) / 2.0;
  detail::emit_family(eval.lane_frechet, frechet, "det_l/frechet",
                      detail::lane_class_label, out);
  detail::emit_family(eval.lane_chamfer, chamfer_s, "det_l/chamfer",
                      detail::lane_class_label, out);
  return out;
}

/// Area detection: Chamfer AP family on resampled curves over the two area
/// classes.
inline MetricValue det_a(const std::vector<Frame>& preds,
                         const std::vector<Frame>& gts,
                         const MetricConfig& cfg = {}) {
  const auto eval = detail::evaluate_parts(preds, gts, cfg, detail::kEvalAreas);
  const auto summary = detail::summarize_family(eval.area, cfg);
  MetricValue out;
  out.value = summary.value;
  detail::emit_family(eval.area, summary, "det_a", detail::area_class_label, out);
  return out;
}

/// Traffic-element detection: IoU-gated AP per front-view class.
inline MetricValue det_t(const std::vector<Frame>& preds,
                         const std::vector<Frame>& gts,
                         const MetricConfig& cfg = {}) {
  const auto eval =
      detail::evaluate_parts(preds, gts, cfg, detail::kEvalTraffic);
  const auto summary = detail::summarize_family(eval.traffic, cfg);
  MetricValue out;
  out.value = summary.value;
  detail::emit_family(eval.traffic, summary, "det_t", detail::lane_class_label,
                      out);
  return out;
}

/// Lane-lane topology: per-vertex AP of projected connection scores, averaged
/// over ground-truth lanes with at least one outgoing edge.
inline MetricValue top_ll(const std::vector<Frame>& preds,
                          const std::vector<Frame>& gts,
                          const MetricConfig& cfg = {}) {
  const auto eval =
      detail::evaluate_parts(preds, gts, cfg, detail::kEvalTopology);
  MetricValue out;
  out.value = detail::mean_or_vacuous(eval.ll_vertex_aps);
  return out;
}

/// Lane-traffic topology: as top_ll over lane-to-traffic-element edges.
inline MetricValue top_lt(const std::vector<Frame>& preds,
                          const std::vector<Frame>& gts,
                          const MetricConfig& cfg = {}) {
  const auto eval =
      detail::evaluate_parts(preds, gts, cfg, detail::kEvalTopology);
  MetricValue out;
  out.value = detail::mean_or_vacuous(eval.lt_vertex_aps);
  return out;
}

/// Full evaluation over aligned frame lists. Deterministic for any worker
/// count.
inline MetricsReport evaluate_dataset(const std::vector<Frame>& preds,
                                      const std::vector<Frame>& gts,
                                      const MetricConfig& cfg = {}) {
  const auto eval = detail::evaluate_parts(preds, gts, cfg, detail::kEvalAll);

  MetricsReport report;
  MetricValue scratch;
  const auto frechet = detail::summarize_family(eval.lane_frechet, cfg);
  const auto lane_chamfer =
      detail::summarize_family(eval.lane_chamfer, cfg);
  const auto area = detail::summarize_family(eval.area, cfg);
  const auto traffic = detail::summarize_family(eval.traffic, cfg);

  report.det_l = (frechet.value + lane_chamfer.value) / 2.0;
  report.det_a = area.value;
  report.det_t = traffic.value;
  report.top_ll = detail::mean_or_vacuous(eval.ll_vertex_aps);
  report.top_lt = detail::mean_or_vacuous(eval.lt_vertex_aps);
  report.olus =
      olus(report.det_l, report.det_a, report.det_t, report.top_ll, report.top_lt);

  detail::emit_family(eval.lane_frechet, frechet, "det_l/frechet",
                      detail::lane_class_label, scratch);
  detail::emit_family(eval.lane_chamfer, lane_chamfer, "det_l/chamfer",
                      detail::lane_class_label, scratch);
  detail::emit_family(eval.area, area, "det_a", detail::area_class_label, scratch);
  detail::emit_family(eval.traffic, traffic, "det_t", detail::lane_class_label,
                      scratch);
  report.per_class = std::move(scratch.per_class);
  report.per_threshold = std::move(scratch.per_threshold);
  return report;
}

}  // namespace laneval
