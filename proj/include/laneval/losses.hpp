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
#include <array>
#include <cmath>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "laneval/assignment.hpp"
#include "laneval/bev_raster.hpp"
#include "laneval/geometry.hpp"
#include "laneval/types.hpp"

namespace laneval {

// Forward values only: these evaluators verify a training stack and test
// target generation; no gradients anywhere.

struct FocalParams {
  double alpha = 0.25;
  double gamma = 2.0;
};

/// Probability floor. Log arguments are clamped here so exact predictions
/// evaluate to exactly zero loss.
inline constexpr double kProbClamp = 1e-7;

namespace detail {

inline double log_clamped(double p) { return std::log(std::max(p, kProbClamp)); }

}  // namespace detail

/// Mean focal term -alpha_t (1 - p_t)^gamma log(p_t) over binary labels.
/// p_t is p for positives and 1-p for negatives; alpha_t follows suit.
inline double focal_loss(std::span<const double> probs,
                         std::span<const int> targets, FocalParams params = {}) {
  if (probs.size() != targets.size())
    throw std::invalid_argument("focal_loss: shape mismatch");
  if (probs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const bool positive = targets[i] != 0;
    const double p_t = std::clamp(positive ? probs[i] : 1.0 - probs[i],
                                  kProbClamp, 1.0 - kProbClamp);
    const double alpha_t = positive ? params.alpha : 1.0 - params.alpha;
    sum += -alpha_t * std::pow(1.0 - p_t, params.gamma) * std::log(p_t);
  }
  return sum / static_cast<double>(probs.size());
}

/// Mean absolute difference over all elements.
inline double l1_loss(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("l1_loss: shape mismatch");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - gt[i]);
  return sum / static_cast<double>(pred.size());
}

/// Mean absolute coordinate difference over all points and axes.
inline double l1_reg_loss(std::span<const Point3> pred,
                          std::span<const Point3> gt) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("l1_reg_loss: shape mismatch");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    sum += std::abs(pred[i].x - gt[i].x);
    sum += std::abs(pred[i].y - gt[i].y);
    sum += std::abs(pred[i].z - gt[i].z);
  }
  return sum / (3.0 * static_cast<double>(pred.size()));
}

/// Mean -log(prob of the true class). Every probability row must sum to 1
/// within 1e-6.
inline double type_ce_loss(const std::vector<std::vector<double>>& pred_probs,
                           std::span<const int> gt_types) {
  if (pred_probs.size() != gt_types.size())
    throw std::invalid_argument("type_ce_loss: shape mismatch");
  if (pred_probs.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred_probs.size(); ++i) {
    const auto& row = pred_probs[i];
    double row_sum = 0.0;
    for (double v : row) row_sum += v;
    if (std::abs(row_sum - 1.0) > 1e-6)
      throw std::invalid_argument("type_ce_loss: probability row not normalized");
    const int t = gt_types[i];
    if (t < 0 || static_cast<std::size_t>(t) >= row.size())
      throw std::invalid_argument("type_ce_loss: class index out of range");
    sum += -detail::log_clamped(row[t]);
  }
  return sum / static_cast<double>(pred_probs.size());
}

/// Mean binary cross-entropy per cell. gt entries must be 0 or 1.
inline double mask_ce_loss(std::span<const double> pred_mask,
                           std::span<const double> gt_mask) {
  if (pred_mask.size() != gt_mask.size())
    throw std::invalid_argument("mask_ce_loss: shape mismatch");
  if (pred_mask.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    const double p = pred_mask[i];
    const double g = gt_mask[i];
    sum += -(g * detail::log_clamped(p) + (1.0 - g) * detail::log_clamped(1.0 - p));
  }
  return sum / static_cast<double>(pred_mask.size());
}

/// Dice loss 1 - (2*sum(p*g) + eps) / (sum(p) + sum(g) + eps).
inline double dice_loss(std::span<const double> pred_mask,
                        std::span<const double> gt_mask, double eps = 1.0) {
  if (pred_mask.size() != gt_mask.size())
    throw std::invalid_argument("dice_loss: shape mismatch");
  double inter = 0.0, p_sum = 0.0, g_sum = 0.0;
  for (std::size_t i = 0; i < pred_mask.size(); ++i) {
    inter += pred_mask[i] * gt_mask[i];
    p_sum += pred_mask[i];
    g_sum += gt_mask[i];
  }
  return 1.0 - (2.0 * inter + eps) / (p_sum + g_sum + eps);
}

// ---------------------------------------------------------------------------
// Composite per-frame losses

struct LaneLossComponents {
  double cls = 0.0, reg = 0.0, type = 0.0, mask = 0.0, dice = 0.0;
};
struct AreaLossComponents {
  double cls = 0.0, reg = 0.0, dir = 0.0, seg = 0.0;
};
struct TrafficLossComponents {
  double cls = 0.0, reg = 0.0, iou = 0.0;
};

inline double lane_loss_total(const LaneLossComponents& c,
                              const LaneLossWeights& w) {
  return w.cls * c.cls + w.reg * c.reg + w.type * c.type + w.mask * c.mask +
         w.dice * c.dice;
}

inline double area_loss_total(const AreaLossComponents& c,
                              const AreaLossWeights& w) {
  return w.cls * c.cls + w.reg * c.reg + w.dir * c.dir + w.seg * c.seg;
}

inline double traffic_loss_total(const TrafficLossComponents& c,
                                 const TrafficLossWeights& w) {
  return w.cls * c.cls + w.reg * c.reg + w.iou * c.iou;
}

/// Prediction-to-ground-truth index pairs per instance family.
struct FrameAssignment {
  std::vector<std::pair<std::size_t, std::size_t>> lanes;
  std::vector<std::pair<std::size_t, std::size_t>> areas;
  std::vector<std::pair<std::size_t, std::size_t>> traffic;
};

struct LossConfig {
  FocalParams focal;
  BevGridSpec grid;
  // Normalization for traffic-element (cx, cy, w, h) regression targets.
  double image_width = 1550.0;
  double image_height = 2048.0;
  int lane_class_count = 1;
  int area_class_count = 2;
  int traffic_class_count = 13;
  int line_type_count = 3;
};

struct CompositeLossReport {
  LaneLossComponents lane;
  AreaLossComponents area;
  TrafficLossComponents traffic;
  double topo_ll_focal = 0.0;
  double topo_lt_focal = 0.0;
  double l_ls = 0.0;
  double l_a = 0.0;
  double l_te = 0.0;
  double l_ll = 0.0;
  double l_lt = 0.0;
  double total = 0.0;
};

namespace detail {

inline void require_assignment(
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    std::size_t num_preds, std::size_t num_gts, const char* family) {
  if (num_preds > 0 && num_gts > 0 && pairs.empty())
    throw std::invalid_argument(std::string("composite_losses: missing ") +
                                family + " assignment");
  std::set<std::size_t> preds, gts;
  for (const auto& [p, g] : pairs) {
    if (p >= num_preds || g >= num_gts)
      throw std::invalid_argument(std::string("composite_losses: ") + family +
                                  " assignment index out of range");
    if (!preds.insert(p).second || !gts.insert(g).second)
      throw std::invalid_argument(std::string("composite_losses: ") + family +
                                  " assignment not one-to-one");
  }
}

// Class probabilities reconstructed from a labeled detection: the labeled
// class gets the confidence, the remaining mass spreads uniformly.
inline std::vector<double> spread_probs(int label, double confidence,
                                        int num_classes) {
  if (label < 0 || label >= num_classes)
    throw std::invalid_argument("composite_losses: class id outside vocabulary");
  std::vector<double> probs(static_cast<std::size_t>(num_classes),
                            num_classes > 1
                                ? (1.0 - confidence) / (num_classes - 1)
                                : 0.0);
  probs[static_cast<std::size_t>(label)] = confidence;
  return probs;
}

template <class Instance>
std::pair<std::vector<double>, std::vector<int>> classification_pairs(
    const std::vector<Instance>& preds, const std::vector<Instance>& gts,
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
    int num_classes) {
  std::vector<int> matched_gt(preds.size(), -1);
  for (const auto& [p, g] : pairs) matched_gt[p] = static_cast<int>(g);

  std::vector<double> probs;
  std::vector<int> targets;
  probs.reserve(preds.size() * static_cast<std::size_t>(num_classes));
  targets.reserve(probs.capacity());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::vector<double> row =
        spread_probs(preds[i].class_id, preds[i].confidence, num_classes);
    const int gt_class =
        matched_gt[i] >= 0 ? gts[static_cast<std::size_t>(matched_gt[i])].class_id
                           : -1;
    for (int c = 0; c < num_classes; ++c) {
      probs.push_back(row[static_cast<std::size_t>(c)]);
      targets.push_back(c == gt_class ? 1 : 0);
    }
  }
  return {std::move(probs), std::move(targets)};
}

inline std::vector<double> mask_to_doubles(const BevMask& m) {
  return std::vector<double>(m.cells.begin(), m.cells.end());
}

inline std::vector<double> union_lane_mask(const std::vector<LaneSegment>& lanes,
                                           const BevGridSpec& grid) {
  BevMask acc(grid);
  for (const LaneSegment& ls : lanes) {
    const BevMask m = lane_segment_mask(ls, grid);
    for (std::size_t i = 0; i < acc.cells.size(); ++i)
      acc.cells[i] = acc.cells[i] | m.cells[i];
  }
  return mask_to_doubles(acc);
}

inline std::vector<double> union_area_mask(const std::vector<AreaInstance>& areas,
                                           const BevGridSpec& grid) {
  BevMask acc(grid);
  for (const AreaInstance& a : areas) {
    const BevMask m = area_boundary_mask(a, grid);
    for (std::size_t i = 0; i < acc.cells.size(); ++i)
      acc.cells[i] = acc.cells[i] | m.cells[i];
  }
  return mask_to_doubles(acc);
}

// Projects predicted scores onto ground-truth index space via the lane (and
// optionally traffic) matching; entries touching unmatched instances drop to
// zero.
inline ScoreMatrix project_scores(
    const ScoreMatrix& pred, std::size_t gt_rows, std::size_t gt_cols,
    const std::vector<std::pair<std::size_t, std::size_t>>& row_pairs,
    const std::vector<std::pair<std::size_t, std::size_t>>& col_pairs) {
  ScoreMatrix out(gt_rows, gt_cols, 0.0);
  for (const auto& [pr, gr] : row_pairs)
    for (const auto& [pc, gc] : col_pairs)
      if (pr < pred.rows() && pc < pred.cols())
        out.at(gr, gc) = pred.at(pr, pc);
  return out;
}

inline double topology_focal(const ScoreMatrix& projected,
                             const ScoreMatrix& gt, FocalParams params) {
  if (projected.rows() != gt.rows() || projected.cols() != gt.cols())
    throw std::invalid_argument("topology focal: shape mismatch");
  if (gt.data().empty()) return 0.0;
  std::vector<int> targets(gt.data().size());
  for (std::size_t i = 0; i < gt.data().size(); ++i)
    targets[i] = gt.data()[i] != 0.0 ? 1 : 0;
  return focal_loss(projected.data(), targets, params);
}

}  // namespace detail

/// Matches predictions to ground truth per family for loss evaluation:
/// ungated Hungarian on centerline Frechet (lanes), symmetric Chamfer
/// (areas), and 1 - GIoU (traffic elements). Classes do not gate the
/// matching; the classification loss penalizes label errors instead.
inline FrameAssignment match_for_losses(const Frame& pred, const Frame& gt) {
  FrameAssignment out;

  CostMatrix lane_costs(pred.lane_segments.size(), gt.lane_segments.size());
  for (std::size_t i = 0; i < pred.lane_segments.size(); ++i)
    for (std::size_t j = 0; j < gt.lane_segments.size(); ++j)
      lane_costs.at(i, j) = discrete_frechet(pred.lane_segments[i].centerline,
                                             gt.lane_segments[j].centerline);
  out.lanes = hungarian_min_cost(lane_costs).pairs;

  CostMatrix area_costs(pred.areas.size(), gt.areas.size());
  for (std::size_t i = 0; i < pred.areas.size(); ++i)
    for (std::size_t j = 0; j < gt.areas.size(); ++j)
      area_costs.at(i, j) =
          chamfer(pred.areas[i].curve, gt.areas[j].curve).symmetric;
  out.areas = hungarian_min_cost(area_costs).pairs;

  CostMatrix te_costs(pred.traffic_elements.size(),
                      gt.traffic_elements.size());
  for (std::size_t i = 0; i < pred.traffic_elements.size(); ++i)
    for (std::size_t j = 0; j < gt.traffic_elements.size(); ++j)
      te_costs.at(i, j) = 1.0 - box_giou(pred.traffic_elements[i].box,
                                         gt.traffic_elements[j].box);
  out.traffic = hungarian_min_cost(te_costs).pairs;

  return out;
}

/// Evaluates every loss term of the three detection heads plus both topology
/// heads and combines them with the given weights. All component values are
/// reported alongside the weighted sums.
inline CompositeLossReport composite_losses(const Frame& pred, const Frame& gt,
                                            const LossWeights& weights,
                                            const FrameAssignment& assignment,
                                            const LossConfig& cfg = {}) {
  detail::require_assignment(assignment.lanes, pred.lane_segments.size(),
                             gt.lane_segments.size(), "lane");
  detail::require_assignment(assignment.areas, pred.areas.size(),
                             gt.areas.size(), "area");
  detail::require_assignment(assignment.traffic, pred.traffic_elements.size(),
                             gt.traffic_elements.size(), "traffic");

  CompositeLossReport report;

  // Lane head.
  {
    auto [probs, targets] = detail::classification_pairs(
        pred.lane_segments, gt.lane_segments, assignment.lanes,
        cfg.lane_class_count);
    report.lane.cls = focal_loss(probs, targets, cfg.focal);

    std::vector<Point3> pred_pts, gt_pts;
    std::vector<std::vector<double>> type_rows;
    std::vector<int> type_targets;
    for (const auto& [p, g] : assignment.lanes) {
      const LaneSegment& lp = pred.lane_segments[p];
      const LaneSegment& lg = gt.lane_segments[g];
      for (const Polyline3* line :
           {&lp.centerline, &lp.left_boundary, &lp.right_boundary})
        pred_pts.insert(pred_pts.end(), line->points.begin(), line->points.end());
      for (const Polyline3* line :
           {&lg.centerline, &lg.left_boundary, &lg.right_boundary})
        gt_pts.insert(gt_pts.end(), line->points.begin(), line->points.end());

      auto one_hot = [&](int label) {
        if (label < 0 || label >= cfg.line_type_count)
          throw std::invalid_argument(
              "composite_losses: line type outside vocabulary");
        std::vector<double> row(static_cast<std::size_t>(cfg.line_type_count), 0.0);
        row[static_cast<std::size_t>(label)] = 1.0;
        return row;
      };
      type_rows.push_back(one_hot(lp.left_type));
      type_targets.push_back(lg.left_type);
      type_rows.push_back(one_hot(lp.right_type));
      type_targets.push_back(lg.right_type);
    }
    report.lane.reg = l1_reg_loss(pred_pts, gt_pts);
    report.lane.type = type_ce_loss(type_rows, type_targets);

    const std::vector<double> pred_mask =
        detail::union_lane_mask(pred.lane_segments, cfg.grid);
    const std::vector<double> gt_mask =
        detail::union_lane_mask(gt.lane_segments, cfg.grid);
    report.lane.mask = mask_ce_loss(pred_mask, gt_mask);
    report.lane.dice = dice_loss(pred_mask, gt_mask);
  }

  // Area head.
  {
    auto [probs, targets] = detail::classification_pairs(
        pred.areas, gt.areas, assignment.areas, cfg.area_class_count);
    report.area.cls = focal_loss(probs, targets, cfg.focal);

    std::vector<Point3> pred_pts, gt_pts;
    double dir_sum = 0.0;
    for (const auto& [p, g] : assignment.areas) {
      const Polyline3& gc = gt.areas[g].curve;
      Polyline3 pc = pred.areas[p].curve;
      if (pc.size() != gc.size())
        pc = resample_polyline(pc, static_cast<int>(gc.size()));
      pred_pts.insert(pred_pts.end(), pc.points.begin(), pc.points.end());
      gt_pts.insert(gt_pts.end(), gc.points.begin(), gc.points.end());
      dir_sum += direction_cosine_mismatch(pc, gc);
    }
    report.area.reg = l1_reg_loss(pred_pts, gt_pts);
    report.area.dir = assignment.areas.empty()
                          ? 0.0
                          : dir_sum / static_cast<double>(assignment.areas.size());

    const std::vector<double> pred_mask =
        detail::union_area_mask(pred.areas, cfg.grid);
    const std::vector<double> gt_mask = detail::union_area_mask(gt.areas, cfg.grid);
    report.area.seg = mask_ce_loss(pred_mask, gt_mask);
  }

  // Traffic-element head.
  {
    auto [probs, targets] = detail::classification_pairs(
        pred.traffic_elements, gt.traffic_elements, assignment.traffic,
        cfg.traffic_class_count);
    report.traffic.cls = focal_loss(probs, targets, cfg.focal);

    std::vector<double> pred_reg, gt_reg;
    double giou_sum = 0.0;
    auto normalized = [&](const Box& b) {
      return std::array<double, 4>{(b.x1 + b.x2) / 2.0 / cfg.image_width,
                                   (b.y1 + b.y2) / 2.0 / cfg.image_height,
                                   b.width() / cfg.image_width,
                                   b.height() / cfg.image_height};
    };
    for (const auto& [p, g] : assignment.traffic) {
      const Box& bp = pred.traffic_elements[p].box;
      const Box& bg = gt.traffic_elements[g].box;
      for (double v : normalized(bp)) pred_reg.push_back(v);
      for (double v : normalized(bg)) gt_reg.push_back(v);
      giou_sum += 1.0 - box_giou(bp, bg);
    }
    report.traffic.reg = l1_loss(pred_reg, gt_reg);
    report.traffic.iou =
        assignment.traffic.empty()
            ? 0.0
            : giou_sum / static_cast<double>(assignment.traffic.size());
  }

  // Topology heads: focal loss on score matrices projected into GT space.
  {
    const std::size_t gl = gt.lane_segments.size();
    const std::size_t gte = gt.traffic_elements.size();
    const ScoreMatrix ll_proj = detail::project_scores(
        pred.topology.ll_scores, gl, gl, assignment.lanes, assignment.lanes);
    const ScoreMatrix lt_proj = detail::project_scores(
        pred.topology.lt_scores, gl, gte, assignment.lanes, assignment.traffic);
    report.topo_ll_focal =
        detail::topology_focal(ll_proj, gt.topology.ll_scores, cfg.focal);
    report.topo_lt_focal =
        detail::topology_focal(lt_proj, gt.topology.lt_scores, cfg.focal);
  }

  report.l_ls = lane_loss_total(report.lane, weights.lanesegment);
  report.l_a = area_loss_total(report.area, weights.area);
  report.l_te = traffic_loss_total(report.traffic, weights.traffic);
  report.l_ll = weights.topology_ll * report.topo_ll_focal;
  report.l_lt = weights.topology_lt * report.topo_lt_focal;
  report.total =
      report.l_ls + report.l_a + report.l_te + report.l_ll + report.l_lt;
  return report;
}

}  // namespace laneval
