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
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "laneval/types.hpp"

namespace laneval {

/// Vectorized SD map: polylines with a coarse road-type tag, already in the
/// ego frame of the queried pose. Pose handling happens upstream; the
/// rasterizer is frame-pure.
struct SdPolyline {
  Polyline3 line;
  int road_type = 0;
};

struct SdMap {
  std::vector<SdPolyline> polylines;
};

/// Binary BEV occupancy grid tied to its grid spec.
struct BevMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> cells;
  BevGridSpec spec;

  BevMask() = default;
  explicit BevMask(const BevGridSpec& s)
      : rows(s.rows), cols(s.cols), cells(static_cast<std::size_t>(s.rows) *
                                          static_cast<std::size_t>(s.cols), 0),
        spec(s) {}

  std::uint8_t at(int r, int c) const {
    return cells[static_cast<std::size_t>(r) * cols + c];
  }
  void set(int r, int c) {
    cells[static_cast<std::size_t>(r) * cols + c] = 1;
  }
  std::size_t count_marked() const {
    std::size_t n = 0;
    for (std::uint8_t v : cells) n += v != 0;
    return n;
  }

  friend bool operator==(const BevMask& a, const BevMask& b) {
    return a.rows == b.rows && a.cols == b.cols && a.cells == b.cells;
  }
};

namespace detail {

// Half-open cell membership: cell r covers [lo, lo+cs) except the last one,
// which also owns the max edge. Every in-window point belongs to exactly one
// cell, so traversals and counting stay unambiguous on boundaries.
inline std::optional<std::pair<int, int>> cell_of(const Point3& p,
                                                  const BevGridSpec& spec) {
  if (p.x < spec.x_min || p.x > spec.x_max || p.y < spec.y_min ||
      p.y > spec.y_max)
    return std::nullopt;
  int r = static_cast<int>(std::floor((p.x - spec.x_min) / spec.cell_size_x()));
  int c = static_cast<int>(std::floor((p.y - spec.y_min) / spec.cell_size_y()));
  r = std::min(r, spec.rows - 1);
  c = std::min(c, spec.cols - 1);
  return std::make_pair(r, c);
}

}  // namespace detail

/// Maps a world point to its (row, col) cell. Points exactly on the max edge
/// clamp to the last cell; anything else outside the window reports
/// out-of-range.
inline std::optional<std::pair<int, int>> world_to_cell(const Point3& p,
                                                        const BevGridSpec& spec) {
  spec.require_valid();
  return detail::cell_of(p, spec);
}

namespace detail {

// Supercover traversal: marks exactly { cell_of(p(t)) : t in [0,1] }. The
// cell can only change where the segment crosses a grid line, so marking the
// cells of all crossing points, both endpoints, and every sub-interval
// midpoint enumerates the set without gaps.
inline void mark_segment_supercover(BevMask& mask, const Point3& a,
                                    const Point3& b) {
  const BevGridSpec& spec = mask.spec;
  const double csx = spec.cell_size_x();
  const double csy = spec.cell_size_y();

  if (std::max(a.x, b.x) < spec.x_min || std::min(a.x, b.x) > spec.x_max)
    return;
  if (std::max(a.y, b.y) < spec.y_min || std::min(a.y, b.y) > spec.y_max)
    return;

  const double dx = b.x - a.x;
  const double dy = b.y - a.y;

  std::vector<double> ts{0.0, 1.0};
  auto add_crossings = [&ts](double origin, double delta, double axis_min,
                             double cell_size, int cell_count) {
    if (delta == 0.0) return;
    const double lo = std::min(origin, origin + delta);
    const double hi = std::max(origin, origin + delta);
    int k_lo = static_cast<int>(std::floor((lo - axis_min) / cell_size));
    int k_hi = static_cast<int>(std::floor((hi - axis_min) / cell_size)) + 1;
    k_lo = std::max(k_lo, 0);
    k_hi = std::min(k_hi, cell_count);
    for (int k = k_lo; k <= k_hi; ++k) {
      const double boundary = axis_min + k * cell_size;
      const double t = (boundary - origin) / delta;
      if (t > 0.0 && t < 1.0) ts.push_back(t);
    }
  };
  add_crossings(a.x, dx, spec.x_min, csx, spec.rows);
  add_crossings(a.y, dy, spec.y_min, csy, spec.cols);
  std::sort(ts.begin(), ts.end());

  auto mark_at = [&](double t) {
    const Point3 p{a.x + dx * t, a.y + dy * t, 0.0};
    if (const auto cell = cell_of(p, spec)) mask.set(cell->first, cell->second);
  };
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mark_at(ts[i]);
    if (i + 1 < ts.size()) mark_at((ts[i] + ts[i + 1]) / 2.0);
  }
}

// Even-odd point-in-polygon (PNPOLY crossing test).
inline bool point_in_polygon(double px, double py,
                             const std::vector<Point3>& poly) {
  bool inside = false;
  for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++) {
    const bool crosses = (poly[i].y > py) != (poly[j].y > py);
    if (crosses) {
      const double x_int = (poly[j].x - poly[i].x) * (py - poly[i].y) /
                               (poly[j].y - poly[i].y) +
                           poly[i].x;
      if (px < x_int) inside = !inside;
    }
  }
  return inside;
}

// Proper crossing between non-adjacent polygon edges; used only to flag
// degenerate self-intersecting lane outlines.
inline bool segments_properly_intersect(const Point3& p1, const Point3& p2,
                                        const Point3& q1, const Point3& q2) {
  auto cross = [](double ax, double ay, double bx, double by) {
    return ax * by - ay * bx;
  };
  const double d1 = cross(q2.x - q1.x, q2.y - q1.y, p1.x - q1.x, p1.y - q1.y);
  const double d2 = cross(q2.x - q1.x, q2.y - q1.y, p2.x - q1.x, p2.y - q1.y);
  const double d3 = cross(p2.x - p1.x, p2.y - p1.y, q1.x - p1.x, q1.y - p1.y);
  const double d4 = cross(p2.x - p1.x, p2.y - p1.y, q2.x - p1.x, q2.y - p1.y);
  return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
         ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
}

}  // namespace detail

/// Marks every cell intersected by any SD-map polyline segment, clipped to
/// the BEV window. Empty map yields an empty mask. With clip=false,
/// out-of-window geometry is still dropped cell-wise; the flag only skips the
/// coarse pre-clip, so outputs are identical either way.
inline BevMask rasterize_sdmap(const SdMap& map, const BevGridSpec& spec,
                               bool clip = true) {
  spec.require_valid();
  BevMask mask(spec);
  for (const SdPolyline& pl : map.polylines) {
    for (std::size_t i = 1; i < pl.line.size(); ++i) {
      if (clip) {
        const Point3& a = pl.line[i - 1];
        const Point3& b = pl.line[i];
        if ((a.x < spec.x_min && b.x < spec.x_min) ||
            (a.x > spec.x_max && b.x > spec.x_max) ||
            (a.y < spec.y_min && b.y < spec.y_min) ||
            (a.y > spec.y_max && b.y > spec.y_max))
          continue;
      }
      detail::mark_segment_supercover(mask, pl.line[i - 1], pl.line[i]);
    }
  }
  return mask;
}

/// One binary channel per road type in [0, num_types).
inline std::vector<BevMask> rasterize_sdmap_by_type(const SdMap& map,
                                                    const BevGridSpec& spec,
                                                    int num_types) {
  if (num_types < 1)
    throw std::invalid_argument("rasterize_sdmap_by_type: num_types < 1");
  std::vector<BevMask> channels;
  channels.reserve(static_cast<std::size_t>(num_types));
  for (int t = 0; t < num_types; ++t) {
    SdMap filtered;
    for (const SdPolyline& pl : map.polylines)
      if (pl.road_type == t) filtered.polylines.push_back(pl);
    channels.push_back(rasterize_sdmap(filtered, spec));
  }
  return channels;
}

/// Fills the lane area bounded by the left and right boundaries: even-odd
/// scanline fill over cell centers of the polygon (left points, then right
/// points reversed). Self-intersecting outlines still fill by the even-odd
/// rule, with *degenerate set when provided.
inline BevMask lane_segment_mask(const LaneSegment& ls, const BevGridSpec& spec,
                                 bool* degenerate = nullptr) {
  spec.require_valid();
  if (degenerate) *degenerate = false;
  BevMask mask(spec);

  std::vector<Point3> poly = ls.left_boundary.points;
  poly.insert(poly.end(), ls.right_boundary.points.rbegin(),
              ls.right_boundary.points.rend());
  if (poly.size() < 3) return mask;

  if (degenerate) {
    double area2 = 0.0;
    for (std::size_t i = 0, j = poly.size() - 1; i < poly.size(); j = i++)
      area2 += poly[j].x * poly[i].y - poly[i].x * poly[j].y;
    if (std::abs(area2) < 1e-12) *degenerate = true;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n && !*degenerate; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // adjacent around the wrap
        if (detail::segments_properly_intersect(poly[i], poly[(i + 1) % n],
                                                poly[j], poly[(j + 1) % n])) {
          *degenerate = true;
          break;
        }
      }
    }
  }

  double min_x = poly[0].x, max_x = poly[0].x;
  double min_y = poly[0].y, max_y = poly[0].y;
  for (const Point3& p : poly) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double csx = spec.cell_size_x();
  const double csy = spec.cell_size_y();
  int r_lo = std::max(0, static_cast<int>(std::floor((min_x - spec.x_min) / csx)) - 1);
  int r_hi = std::min(spec.rows - 1,
                      static_cast<int>(std::floor((max_x - spec.x_min) / csx)) + 1);
  int c_lo = std::max(0, static_cast<int>(std::floor((min_y - spec.y_min) / csy)) - 1);
  int c_hi = std::min(spec.cols - 1,
                      static_cast<int>(std::floor((max_y - spec.y_min) / csy)) + 1);

  for (int r = r_lo; r <= r_hi; ++r) {
    const double cx = spec.x_min + (r + 0.5) * csx;
    for (int c = c_lo; c <= c_hi; ++c) {
      const double cy = spec.y_min + (c + 0.5) * csy;
      if (detail::point_in_polygon(cx, cy, poly)) mask.set(r, c);
    }
  }
  return mask;
}

/// Supercover rasterization of the area curve only: one-cell thickness, no
/// interior fill.
inline BevMask area_boundary_mask(const AreaInstance& a, const BevGridSpec& spec) {
  spec.require_valid();
  BevMask mask(spec);
  for (std::size_t i = 1; i < a.curve.size(); ++i)
    detail::mark_segment_supercover(mask, a.curve[i - 1], a.curve[i]);
  return mask;
}

// ---------------------------------------------------------------------------
// Mask export. Plain-text formats, bit-exact across platforms.

/// PGM (P2), maxval 1, row 0 first, columns left to right.
inline std::string mask_to_pgm(const BevMask& mask) {
  std::ostringstream os;
  os << "P2\n" << mask.cols << " " << mask.rows << "\n1\n";
  for (int r = 0; r < mask.rows; ++r) {
    for (int c = 0; c < mask.cols; ++c) {
      if (c) os << ' ';
      os << static_cast<int>(mask.at(r, c));
    }
    os << '\n';
  }
  return os.str();
}

/// CSV of marked cells, "row,col" per line in row-major order.
inline std::string mask_to_csv(const BevMask& mask) {
  std::ostringstream os;
  for (int r = 0; r < mask.rows; ++r)
    for (int c = 0; c < mask.cols; ++c)
      if (mask.at(r, c)) os << r << ',' << c << '\n';
  return os.str();
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << body;
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_mask_pgm(const BevMask& mask, const std::string& path) {
  write_text_file(path, mask_to_pgm(mask));
}

inline void write_mask_csv(const BevMask& mask, const std::string& path) {
  write_text_file(path, mask_to_csv(mask));
}

}  // namespace laneval
