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
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace laneval {

/// Rectangular prediction-by-ground-truth cost matrix. Infeasible pairings
/// carry +infinity.
struct CostMatrix {
  std::size_t rows = 0;  // predictions
  std::size_t cols = 0;  // ground truth
  std::vector<double> cost;

  static constexpr double kInfeasible = std::numeric_limits<double>::infinity();

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = kInfeasible)
      : rows(r), cols(c), cost(r * c, fill) {}

  double at(std::size_t i, std::size_t j) const { return cost[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return cost[i * cols + j]; }
};

struct AssignmentResult {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col)
  double total_cost = 0.0;
};

namespace detail {

// Shortest augmenting path (Jonker-Volgenant style) on a rectangular matrix
// with n rows <= m cols, O(n^2 m). Returns col index per row. Deterministic:
// rows are augmented in order and column scans prefer the lowest index on
// equal reduced cost.
template <class CostFn>
std::vector<int> solve_rectangular_assignment(int n, int m, CostFn cost) {
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<double> minv(m + 1);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), std::numeric_limits<double>::infinity());
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = std::numeric_limits<double>::infinity();
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace detail

/// Minimum-total-cost one-to-one assignment over the feasible entries of m.
/// Covers up to min(rows, cols) pairs; rows or columns whose entries are all
/// infeasible stay unassigned. Ties resolve deterministically, preferring the
/// lowest row index and then the lowest column index.
inline AssignmentResult hungarian_min_cost(const CostMatrix& m) {
  AssignmentResult result;
  if (m.rows == 0 || m.cols == 0) return result;

  double max_finite = 0.0;
  for (double c : m.cost) {
    if (std::isfinite(c)) {
      if (c < 0.0)
        throw std::invalid_argument("hungarian_min_cost: negative cost");
      max_finite = std::max(max_finite, c);
    }
  }
  // One sentinel edge must dominate any all-feasible assignment so the solver
  // maximizes the feasible pair count before minimizing real cost.
  const double big =
      (max_finite + 1.0) * (static_cast<double>(std::max(m.rows, m.cols)) + 1.0);

  // Augment the smaller side; solve the transpose when predictions outnumber
  // ground truths.
  const bool transposed = m.rows > m.cols;
  const int n = static_cast<int>(transposed ? m.cols : m.rows);
  const int cols = static_cast<int>(transposed ? m.rows : m.cols);
  const auto cost = [&](int i, int j) {
    const double v = transposed ? m.at(static_cast<std::size_t>(j),
                                       static_cast<std::size_t>(i))
                                : m.at(static_cast<std::size_t>(i),
                                       static_cast<std::size_t>(j));
    return std::isfinite(v) ? v : big;
  };
  const std::vector<int> row_to_col =
      detail::solve_rectangular_assignment(n, cols, cost);

  std::vector<int> assigned_col(m.rows, -1);
  for (int i = 0; i < n; ++i) {
    const int j = row_to_col[i];
    if (j < 0) continue;
    const std::size_t row = transposed ? static_cast<std::size_t>(j)
                                       : static_cast<std::size_t>(i);
    const std::size_t col = transposed ? static_cast<std::size_t>(i)
                                       : static_cast<std::size_t>(j);
    if (std::isfinite(m.at(row, col))) assigned_col[row] = static_cast<int>(col);
  }

  // Canonicalize equal-cost solutions: lower rows claim columns from higher
  // rows, and column choices swap into ascending order, whenever the exchange
  // leaves the total exactly unchanged.
  bool changed = true;
  std::size_t guard = 0;
  while (changed && guard++ < m.rows * m.rows + 8) {
    changed = false;
    for (std::size_t a = 0; a < m.rows; ++a) {
      if (assigned_col[a] >= 0) continue;
      for (std::size_t b = a + 1; b < m.rows; ++b) {
        const int j = assigned_col[b];
        if (j < 0) continue;
        const double ca = m.at(a, static_cast<std::size_t>(j));
        if (std::isfinite(ca) && ca == m.at(b, static_cast<std::size_t>(j))) {
          assigned_col[a] = j;
          assigned_col[b] = -1;
          changed = true;
          break;
        }
      }
    }
    for (std::size_t a = 0; a < m.rows; ++a) {
      int ja = assigned_col[a];
      if (ja < 0) continue;
      for (std::size_t b = a + 1; b < m.rows; ++b) {
        const int jb = assigned_col[b];
        if (jb < 0 || jb >= ja) continue;
        const double direct = m.at(a, static_cast<std::size_t>(ja)) +
                              m.at(b, static_cast<std::size_t>(jb));
        const double swapped = m.at(a, static_cast<std::size_t>(jb)) +
                               m.at(b, static_cast<std::size_t>(ja));
        if (std::isfinite(swapped) && swapped == direct) {
          assigned_col[a] = jb;
          assigned_col[b] = ja;
          ja = jb;
          changed = true;
        }
      }
    }
  }

  for (std::size_t i = 0; i < m.rows; ++i) {
    if (assigned_col[i] < 0) continue;
    const std::size_t j = static_cast<std::size_t>(assigned_col[i]);
    result.pairs.emplace_back(i, j);
    result.total_cost += m.at(i, j);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Average precision

enum class ApInterpolation { kAllPoint, kElevenPoint };

/// Ranked detections for one class: (confidence, is_true_positive).
struct ApInput {
  std::vector<std::pair<double, bool>> detections;
  std::size_t num_ground_truth = 0;
};

/// Area under the precision-recall curve. Sorting is stable so confidence
/// ties keep their original order and evaluation stays platform-independent.
/// With no ground truth, an empty detection list scores 1 (vacuous
/// perfection) and any detection scores 0.
inline double average_precision(ApInput input,
                                ApInterpolation interp = ApInterpolation::kAllPoint) {
  std::size_t true_positives = 0;
  for (const auto& [confidence, tp] : input.detections) true_positives += tp;
  if (true_positives > input.num_ground_truth)
    throw std::invalid_argument(
        "average_precision: more true positives than ground truths");
  if (input.num_ground_truth == 0) return input.detections.empty() ? 1.0 : 0.0;
  if (input.detections.empty()) return 0.0;

  std::stable_sort(input.detections.begin(), input.detections.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });

  const std::size_t n = input.detections.size();
  std::vector<double> precision(n), recall(n);
  std::size_t tp = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (input.detections[k].second) ++tp;
    precision[k] = static_cast<double>(tp) / static_cast<double>(k + 1);
    recall[k] = static_cast<double>(tp) /
                static_cast<double>(input.num_ground_truth);
  }
  // Interpolated precision: max precision at any recall >= here.
  for (std::size_t k = n - 1; k-- > 0;)
    precision[k] = std::max(precision[k], precision[k + 1]);

  if (interp == ApInterpolation::kElevenPoint) {
    double sum = 0.0;
    for (int level = 0; level <= 10; ++level) {
      const double r = level / 10.0;
      double best = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (recall[k] >= r) {
          best = precision[k];
          break;
        }
      }
      sum += best;
    }
    return sum / 11.0;
  }

  // All-point: one interpolated-precision term per true positive; divide once
  // so a perfect ranking yields exactly 1.
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (input.detections[k].second) sum += precision[k];
  return sum / static_cast<double>(input.num_ground_truth);
}

// ---------------------------------------------------------------------------
// Threshold-gated matching

struct MatchResult {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // (pred, gt)
  std::vector<std::size_t> unmatched_preds;
  std::vector<std::size_t> unmatched_gts;
};

/// Gates a precomputed cost matrix at `threshold` (entries above become
/// infeasible) and solves the assignment. Matched predictions are true
/// positives; the rest are false positives / false negatives.
inline MatchResult match_with_costs(const CostMatrix& costs, double threshold) {
  CostMatrix gated = costs;
  for (double& c : gated.cost)
    if (c > threshold) c = CostMatrix::kInfeasible;
  const AssignmentResult assignment = hungarian_min_cost(gated);

  MatchResult result;
  result.matches = assignment.pairs;
  std::vector<char> pred_used(costs.rows, 0), gt_used(costs.cols, 0);
  for (const auto& [i, j] : assignment.pairs) {
    pred_used[i] = 1;
    gt_used[j] = 1;
  }
  for (std::size_t i = 0; i < costs.rows; ++i)
    if (!pred_used[i]) result.unmatched_preds.push_back(i);
  for (std::size_t j = 0; j < costs.cols; ++j)
    if (!gt_used[j]) result.unmatched_gts.push_back(j);
  return result;
}

/// Builds the same-class cost matrix from a distance function and matches at
/// the given threshold.
template <class Pred, class Gt, class DistanceFn>
MatchResult match_at_threshold(const std::vector<Pred>& preds,
                               const std::vector<Gt>& gts, DistanceFn distance,
                               double threshold) {
  CostMatrix costs(preds.size(), gts.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < gts.size(); ++j)
      if (preds[i].class_id == gts[j].class_id)
        costs.at(i, j) = distance(preds[i], gts[j]);
  return match_with_costs(costs, threshold);
}

}  // namespace laneval
