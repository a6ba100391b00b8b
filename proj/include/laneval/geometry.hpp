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
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "laneval/types.hpp"

namespace laneval {

/// Squared Euclidean point distance; planar drops the z axis.
inline double point_distance_sq(const Point3& a, const Point3& b,
                                bool planar = false) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  const double dz = planar ? 0.0 : a.z - b.z;
  return dx * dx + dy * dy + dz * dz;
}

inline double point_distance(const Point3& a, const Point3& b,
                             bool planar = false) {
  return std::sqrt(point_distance_sq(a, b, planar));
}

/// Discrete Frechet distance: minimum over monotone couplings of the maximum
/// paired point distance, with first-to-first and last-to-last pairing
/// enforced. Symmetric in its arguments. O(|a|*|b|) dynamic program run on
/// squared distances, rooted once at the end.
inline double discrete_frechet(const Polyline3& a, const Polyline3& b,
                               bool planar = false) {
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  if (n == 0 || m == 0)
    throw std::invalid_argument("discrete_frechet: empty polyline");

  std::vector<double> prev(m), cur(m);
  for (std::size_t j = 0; j < m; ++j) {
    const double d = point_distance_sq(a[0], b[j], planar);
    prev[j] = (j == 0) ? d : std::max(prev[j - 1], d);
  }
  for (std::size_t i = 1; i < n; ++i) {
    cur[0] = std::max(prev[0], point_distance_sq(a[i], b[0], planar));
    for (std::size_t j = 1; j < m; ++j) {
      const double reach = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = std::max(reach, point_distance_sq(a[i], b[j], planar));
    }
    std::swap(prev, cur);
  }
  return std::sqrt(prev[m - 1]);
}

/// Directed and symmetrized Chamfer distances. Means, not sums, so values
/// stay in meters regardless of point count.
struct DirectedChamferResult {
  double forward = 0.0;   // mean nearest-neighbor distance a -> b
  double backward = 0.0;  // b -> a
  double symmetric = 0.0; // (forward + backward) / 2
};

namespace detail {

inline double mean_nearest_distance(std::span<const Point3> from,
                                    std::span<const Point3> to, bool planar) {
  double sum = 0.0;
  for (const Point3& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const Point3& q : to) best = std::min(best, point_distance_sq(p, q, planar));
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(from.size());
}

}  // namespace detail

inline DirectedChamferResult chamfer(std::span<const Point3> a,
                                     std::span<const Point3> b,
                                     bool planar = false) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("chamfer: empty point set");
  DirectedChamferResult r;
  r.forward = detail::mean_nearest_distance(a, b, planar);
  r.backward = detail::mean_nearest_distance(b, a, planar);
  r.symmetric = (r.forward + r.backward) / 2.0;
  return r;
}

inline DirectedChamferResult chamfer(const Polyline3& a, const Polyline3& b,
                                     bool planar = false) {
  return chamfer(std::span<const Point3>(a.points),
                 std::span<const Point3>(b.points), planar);
}

/// Resamples a polyline to n points at equal arc-length spacing, preserving
/// both endpoints exactly. A zero-length input yields n copies of the first
/// point and sets *degenerate when provided.
inline Polyline3 resample_polyline(const Polyline3& p, int n,
                                   bool* degenerate = nullptr) {
  if (p.size() < 2)
    throw std::invalid_argument("resample_polyline: need at least 2 points");
  if (n < 2) throw std::invalid_argument("resample_polyline: need n >= 2");
  if (degenerate) *degenerate = false;

  std::vector<double> cum(p.size(), 0.0);
  for (std::size_t i = 1; i < p.size(); ++i)
    cum[i] = cum[i - 1] + norm(p[i] - p[i - 1]);
  const double total = cum.back();

  Polyline3 out;
  out.points.reserve(static_cast<std::size_t>(n));
  if (total <= 0.0) {
    if (degenerate) *degenerate = true;
    out.points.assign(static_cast<std::size_t>(n), p[0]);
    return out;
  }

  out.points.push_back(p[0]);
  std::size_t seg = 1;
  for (int k = 1; k < n - 1; ++k) {
    const double target = total * static_cast<double>(k) / (n - 1);
    while (seg < p.size() - 1 && cum[seg] < target) ++seg;
    const double seg_len = cum[seg] - cum[seg - 1];
    const double t = seg_len > 0.0 ? (target - cum[seg - 1]) / seg_len : 0.0;
    out.points.push_back(p[seg - 1] + (p[seg] - p[seg - 1]) * t);
  }
  out.points.push_back(p[p.size() - 1]);
  return out;
}

/// Intersection over union of two valid boxes, in [0,1].
inline double box_iou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("box_iou: degenerate box");
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = std::max(0.0, iw) * std::max(0.0, ih);
  const double uni = a.area() + b.area() - inter;
  return inter / uni;
}

/// Generalized IoU in (-1, 1]: IoU minus the empty fraction of the smallest
/// enclosing box. Equals IoU when the enclosing box adds no slack.
inline double box_giou(const Box& a, const Box& b) {
  if (!a.valid() || !b.valid())
    throw std::invalid_argument("box_giou: degenerate box");
  const double iou = box_iou(a, b);
  const double cw = std::max(a.x2, b.x2) - std::min(a.x1, b.x1);
  const double ch = std::max(a.y2, b.y2) - std::min(a.y1, b.y1);
  const double enclosing = cw * ch;
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  const double inter = std::max(0.0, iw) * std::max(0.0, ih);
  const double uni = a.area() + b.area() - inter;
  return iou - (enclosing - uni) / enclosing;
}

/// Mean (1 - cos theta) between corresponding edge directions, in [0,2].
/// Zero-length edges on either side contribute 0 and bump the optional
/// degenerate-edge counter; collapsed predictions must not produce NaN.
inline double direction_cosine_mismatch(const Polyline3& pred,
                                        const Polyline3& gt,
                                        int* degenerate_edges = nullptr) {
  if (pred.size() != gt.size())
    throw std::invalid_argument("direction_cosine_mismatch: size mismatch");
  if (pred.size() < 2)
    throw std::invalid_argument("direction_cosine_mismatch: need >= 2 points");
  if (degenerate_edges) *degenerate_edges = 0;

  double sum = 0.0;
  const std::size_t edges = pred.size() - 1;
  for (std::size_t i = 0; i < edges; ++i) {
    const Point3 u = pred[i + 1] - pred[i];
    const Point3 v = gt[i + 1] - gt[i];
    const double nu = norm(u);
    const double nv = norm(v);
    if (nu == 0.0 || nv == 0.0) {
      if (degenerate_edges) ++*degenerate_edges;
      continue;
    }
    const double cosine = (u.x * v.x + u.y * v.y + u.z * v.z) / (nu * nv);
    sum += 1.0 - std::clamp(cosine, -1.0, 1.0);
  }
  return sum / static_cast<double>(edges);
}

}  // namespace laneval
